//! C ABI for the pursuit-evasion engine.
//!
//! Every fallible entry point returns a [`PursuitStatus`]. On failure the
//! message is kept per thread and read back with [`pursuit_last_error`].
//! Handles are opaque, created by `*_new`/`*_run` calls, and released with
//! the matching `*_free`. Strings returned to the caller are released with
//! [`pursuit_string_free`]. Panics never cross the boundary; they surface
//! as [`PursuitStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pursuit_core::experiment::{
    emit_outputs, run_batch, run_single, save_trace, BatchResult, Case, ExperimentConfig,
    RunMetrics, Simulation,
};
use pursuit_core::PursuitError;

/// Result of a call. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PursuitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    Io = 5,
    Runtime = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Experiment configuration.
pub struct PursuitConfig(ExperimentConfig);

/// Finished batch of seeded runs for one case.
pub struct PursuitBatch(BatchResult);

/// A single run that can be stepped one tick at a time.
pub struct PursuitSimulation(Simulation);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PursuitRunSummary {
    pub seed: u64,
    /// Tick of the last capture, or the tick cap when `completed` is false.
    pub capture_ticks: u64,
    pub completed: bool,
    pub flexibility: u32,
    pub cumulative_reward: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PursuitBatchSummary {
    pub runs: usize,
    pub mean_capture: f64,
    pub std_capture: f64,
    pub min_capture: f64,
    pub max_capture: f64,
    pub mean_flexibility: f64,
    pub std_flexibility: f64,
    /// Runs that hit the tick cap.
    pub cut_off: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PursuitPursuer {
    pub id: u32,
    pub x: usize,
    pub y: usize,
    /// False while the pursuer belongs to no coalition; `group` is then 0.
    pub in_group: bool,
    pub group: usize,
    pub c_s: u32,
    pub c_t: u32,
    pub c_b: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PursuitEvader {
    pub id: u32,
    pub x: usize,
    pub y: usize,
    pub difficulty: u32,
    pub captured: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PursuitStatus, String);

impl From<PursuitError> for Failure {
    fn from(e: PursuitError) -> Self {
        let status = match &e {
            PursuitError::InvalidConfig(_)
            | PursuitError::Parse { .. }
            | PursuitError::UnknownCase(_)
            | PursuitError::UnknownMethod(_)
            | PursuitError::MismatchedScenario(_) => PursuitStatus::InvalidConfig,
            PursuitError::Io { .. } | PursuitError::Csv(_) => PursuitStatus::Io,
            _ => PursuitStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PursuitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PursuitStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PursuitStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PursuitStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PursuitStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn run_summary(m: &RunMetrics) -> PursuitRunSummary {
    PursuitRunSummary {
        seed: m.seed,
        capture_ticks: m.capture_ticks,
        completed: m.completed,
        flexibility: m.flexibility,
        cumulative_reward: m.cumulative_reward(),
    }
}

/// Copies `items` into a caller buffer of `cap` slots. `*len` always gets
/// the full count so callers can size the buffer with a first call.
unsafe fn fill<T: Copy>(
    items: &[T],
    buf: *mut T,
    cap: usize,
    len: *mut usize,
) -> Result<(), Failure> {
    *mut_arg(len, "len")? = items.len();
    if items.len() > cap {
        return Err(Failure(
            PursuitStatus::BufferTooSmall,
            format!("buffer holds {cap}, need {}", items.len()),
        ));
    }
    if !items.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(items.as_ptr(), buf, items.len());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pursuit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failure on the same thread.
#[no_mangle]
pub extern "C" fn pursuit_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pursuit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration for `case_name`, or for the default case when it is null.
///
/// # Safety
/// `case_name` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_new(
    case_name: *const c_char,
    out: *mut *mut PursuitConfig,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let cfg = if case_name.is_null() {
            ExperimentConfig::default()
        } else {
            let case: Case = str_arg(case_name, "case_name")?.parse()?;
            ExperimentConfig::for_case(case)
        };
        *out = Box::into_raw(Box::new(PursuitConfig(cfg)));
        Ok(())
    })
}

/// Parses a TOML configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_from_toml(
    text: *const c_char,
    out: *mut *mut PursuitConfig,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let cfg = ExperimentConfig::from_toml_str(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(PursuitConfig(cfg)));
        Ok(())
    })
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_load(
    path: *const c_char,
    out: *mut *mut PursuitConfig,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let cfg = ExperimentConfig::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(PursuitConfig(cfg)));
        Ok(())
    })
}

/// Applies one `dotted.key=value` override, e.g. `learning.alpha=0.5`.
///
/// # Safety
/// `cfg` must be a live config handle; `assignment` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_set(
    cfg: *mut PursuitConfig,
    assignment: *const c_char,
) -> PursuitStatus {
    guard(|| {
        let cfg = mut_arg(cfg, "cfg")?;
        cfg.0.set(str_arg(assignment, "assignment")?)?;
        Ok(())
    })
}

/// Switches the case, keeping every other field.
///
/// # Safety
/// `cfg` must be a live config handle; `case_name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_set_case(
    cfg: *mut PursuitConfig,
    case_name: *const c_char,
) -> PursuitStatus {
    guard(|| {
        let cfg = mut_arg(cfg, "cfg")?;
        cfg.0.case = str_arg(case_name, "case_name")?.parse()?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_validate(cfg: *const PursuitConfig) -> PursuitStatus {
    guard(|| {
        ref_arg(cfg, "cfg")?.0.validate()?;
        Ok(())
    })
}

/// Serializes the config as TOML. Free the string with [`pursuit_string_free`].
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_to_toml(
    cfg: *const PursuitConfig,
    out: *mut *mut c_char,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let text = ref_arg(cfg, "cfg")?.0.to_toml_string();
        let c = CString::new(text)
            .map_err(|_| Failure(PursuitStatus::Runtime, "config text contains NUL".into()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pursuit_config_free(cfg: *mut PursuitConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one seed to completion.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_run_single(
    cfg: *const PursuitConfig,
    seed: u64,
    out: *mut PursuitRunSummary,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let m = run_single(&ref_arg(cfg, "cfg")?.0, seed)?;
        *out = run_summary(&m);
        Ok(())
    })
}

/// Runs every repetition of the configured case.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_batch_run(
    cfg: *const PursuitConfig,
    out: *mut *mut PursuitBatch,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let batch = run_batch(&ref_arg(cfg, "cfg")?.0)?;
        *out = Box::into_raw(Box::new(PursuitBatch(batch)));
        Ok(())
    })
}

/// Number of runs in the batch; 0 for a null handle.
///
/// # Safety
/// `batch` must be null or a live batch handle.
#[no_mangle]
pub unsafe extern "C" fn pursuit_batch_len(batch: *const PursuitBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.0.runs.len())
}

/// Run `index` in seed order.
///
/// # Safety
/// `batch` must be a live batch handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_batch_run_at(
    batch: *const PursuitBatch,
    index: usize,
    out: *mut PursuitRunSummary,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let runs = &ref_arg(batch, "batch")?.0.runs;
        let run = runs.get(index).ok_or_else(|| {
            Failure(
                PursuitStatus::InvalidArgument,
                format!("index {index} out of range for {} runs", runs.len()),
            )
        })?;
        *out = run_summary(run);
        Ok(())
    })
}

/// # Safety
/// `batch` must be a live batch handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_batch_summary(
    batch: *const PursuitBatch,
    out: *mut PursuitBatchSummary,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let s = &ref_arg(batch, "batch")?.0.summary;
        *out = PursuitBatchSummary {
            runs: s.runs,
            mean_capture: s.capture.mean,
            std_capture: s.capture.std,
            min_capture: s.capture.min,
            max_capture: s.capture.max,
            mean_flexibility: s.flexibility.mean,
            std_flexibility: s.flexibility.std,
            cut_off: s.cut_off,
        };
        Ok(())
    })
}

/// Writes the same CSV files and manifest as the command-line `run`.
///
/// # Safety
/// `batch` and `cfg` must be live handles; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pursuit_batch_write_outputs(
    batch: *const PursuitBatch,
    cfg: *const PursuitConfig,
    dir: *const c_char,
) -> PursuitStatus {
    guard(|| {
        let batch = ref_arg(batch, "batch")?;
        let cfg = ref_arg(cfg, "cfg")?;
        let dir = Path::new(str_arg(dir, "dir")?);
        emit_outputs(&cfg.0, std::slice::from_ref(&batch.0), &[], dir)?;
        Ok(())
    })
}

/// # Safety
/// `batch` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pursuit_batch_free(batch: *mut PursuitBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// Writes a JSON-lines replay of one run. `ticks` may be null.
///
/// # Safety
/// `cfg` must be a live config handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pursuit_trace_save(
    cfg: *const PursuitConfig,
    seed: u64,
    path: *const c_char,
    ticks: *mut u64,
) -> PursuitStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let n = save_trace(&cfg.0, seed, Path::new(str_arg(path, "path")?))?;
        if let Some(t) = ticks.as_mut() {
            *t = n;
        }
        Ok(())
    })
}

/// Places agents and forms the first coalitions; no tick has run yet.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_sim_new(
    cfg: *const PursuitConfig,
    seed: u64,
    out: *mut *mut PursuitSimulation,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let sim = Simulation::new(&ref_arg(cfg, "cfg")?.0, seed)?;
        *out = Box::into_raw(Box::new(PursuitSimulation(sim)));
        Ok(())
    })
}

/// Advances one tick. `*finished` is set when the run is over, either
/// before this call or because of it; a finished run is left unchanged.
///
/// # Safety
/// `sim` must be a live simulation handle; `finished` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_sim_step(
    sim: *mut PursuitSimulation,
    finished: *mut bool,
) -> PursuitStatus {
    guard(|| {
        let finished = mut_arg(finished, "finished")?;
        let sim = &mut mut_arg(sim, "sim")?.0;
        sim.step()?;
        *finished = sim.is_finished();
        Ok(())
    })
}

/// Current tick; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn pursuit_sim_tick(sim: *const PursuitSimulation) -> u64 {
    sim.as_ref().map_or(0, |s| s.0.world().tick)
}

/// Copies pursuer states into `buf`. `*len` receives the pursuer count even
/// when `cap` is too small, in which case nothing is copied.
///
/// # Safety
/// `sim` must be a live handle; `buf` must hold `cap` elements; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_sim_pursuers(
    sim: *const PursuitSimulation,
    buf: *mut PursuitPursuer,
    cap: usize,
    len: *mut usize,
) -> PursuitStatus {
    guard(|| {
        let sim = &ref_arg(sim, "sim")?.0;
        let org = sim.organizer();
        let items: Vec<PursuitPursuer> = sim
            .world()
            .pursuers
            .iter()
            .map(|p| {
                let group = org.and_then(|o| o.coalition_of_pursuer(p.id)).map(|c| c.group_id);
                PursuitPursuer {
                    id: p.id.0,
                    x: p.pos.x,
                    y: p.pos.y,
                    in_group: group.is_some(),
                    group: group.unwrap_or(0),
                    c_s: p.c_s,
                    c_t: p.c_t,
                    c_b: p.c_b,
                }
            })
            .collect();
        fill(&items, buf, cap, len)
    })
}

/// Copies evader states into `buf`; sizing works as in [`pursuit_sim_pursuers`].
///
/// # Safety
/// `sim` must be a live handle; `buf` must hold `cap` elements; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_sim_evaders(
    sim: *const PursuitSimulation,
    buf: *mut PursuitEvader,
    cap: usize,
    len: *mut usize,
) -> PursuitStatus {
    guard(|| {
        let sim = &ref_arg(sim, "sim")?.0;
        let items: Vec<PursuitEvader> = sim
            .world()
            .evaders
            .iter()
            .map(|e| PursuitEvader {
                id: e.id.0,
                x: e.pos.x,
                y: e.pos.y,
                difficulty: e.difficulty,
                captured: e.captured,
            })
            .collect();
        fill(&items, buf, cap, len)
    })
}

/// Metrics so far. For an unfinished run `completed` is false and
/// `capture_ticks` is the tick cap.
///
/// # Safety
/// `sim` must be a live simulation handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_sim_metrics(
    sim: *const PursuitSimulation,
    out: *mut PursuitRunSummary,
) -> PursuitStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = run_summary(&ref_arg(sim, "sim")?.0.metrics());
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pursuit_sim_free(sim: *mut PursuitSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
