use std::ffi::{CStr, CString};
use std::ptr;

use pursuit_core::experiment::{run_batch, run_single, ExperimentConfig};
use pursuit_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = pursuit_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
case = "KMEANS_AGRMF"
repetitions = 3
max_ticks = 2000
[grid]
width = 14
height = 14
[agents]
pursuers = 6
evaders = 2
pursuer_range = 3
"#;

fn small_config() -> *mut PursuitConfig {
    let mut cfg = ptr::null_mut();
    let text = c(SMALL);
    assert_eq!(
        unsafe { pursuit_config_from_toml(text.as_ptr(), &mut cfg) },
        PursuitStatus::Ok
    );
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(pursuit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    unsafe {
        assert_eq!(
            pursuit_config_new(ptr::null(), ptr::null_mut()),
            PursuitStatus::NullPointer
        );
        assert!(last_error().contains("out"));
        let mut s = PursuitRunSummary::default();
        assert_eq!(pursuit_run_single(ptr::null(), 0, &mut s), PursuitStatus::NullPointer);
        assert_eq!(pursuit_batch_len(ptr::null()), 0);
        assert_eq!(pursuit_sim_tick(ptr::null()), 0);
        pursuit_config_free(ptr::null_mut());
        pursuit_batch_free(ptr::null_mut());
        pursuit_sim_free(ptr::null_mut());
        pursuit_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_input_maps_to_status_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let case = c("NOT_A_CASE");
        assert_eq!(pursuit_config_new(case.as_ptr(), &mut cfg), PursuitStatus::InvalidConfig);
        assert!(cfg.is_null());
        assert!(last_error().contains("NOT_A_CASE"));

        let bad = c("no_such_field = 3");
        assert_eq!(
            pursuit_config_from_toml(bad.as_ptr(), &mut cfg),
            PursuitStatus::InvalidConfig
        );

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            pursuit_config_new(invalid.as_ptr().cast(), &mut cfg),
            PursuitStatus::InvalidUtf8
        );

        let missing = c("/definitely/not/here.toml");
        assert_eq!(pursuit_config_load(missing.as_ptr(), &mut cfg), PursuitStatus::Io);

        let cfg = small_config();
        let bad_set = c("learning.nonsense=1");
        assert_eq!(pursuit_config_set(cfg, bad_set.as_ptr()), PursuitStatus::InvalidConfig);
        let neg = c("agents.difficulty_min=0");
        assert_eq!(pursuit_config_set(cfg, neg.as_ptr()), PursuitStatus::Ok);
        assert_eq!(pursuit_config_validate(cfg), PursuitStatus::InvalidConfig);
        pursuit_config_free(cfg);
    }
}

#[test]
fn config_round_trips_through_toml() {
    unsafe {
        let cfg = small_config();
        let set = c("coalition.life=12");
        assert_eq!(pursuit_config_set(cfg, set.as_ptr()), PursuitStatus::Ok);
        let case = c("dbscan_agrmf");
        assert_eq!(pursuit_config_set_case(cfg, case.as_ptr()), PursuitStatus::Ok);
        let mut text = ptr::null_mut();
        assert_eq!(pursuit_config_to_toml(cfg, &mut text), PursuitStatus::Ok);
        let owned = CStr::from_ptr(text).to_str().unwrap().to_owned();
        pursuit_string_free(text);
        let parsed = ExperimentConfig::from_toml_str(&owned).unwrap();
        assert_eq!(parsed.coalition.life, 12);
        assert_eq!(parsed.case.name(), "DBSCAN_AGRMF");
        assert_eq!(parsed.grid.width, 14);
        pursuit_config_free(cfg);
    }
}

#[test]
fn runs_match_the_rust_api() {
    let expected_cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    unsafe {
        let cfg = small_config();
        let mut s = PursuitRunSummary::default();
        assert_eq!(pursuit_run_single(cfg, 5, &mut s), PursuitStatus::Ok);
        let m = run_single(&expected_cfg, 5).unwrap();
        assert_eq!(s.seed, 5);
        assert_eq!(s.capture_ticks, m.capture_ticks);
        assert_eq!(s.completed, m.completed);
        assert_eq!(s.flexibility, m.flexibility);
        assert_eq!(s.cumulative_reward, m.cumulative_reward());

        let mut batch = ptr::null_mut();
        assert_eq!(pursuit_batch_run(cfg, &mut batch), PursuitStatus::Ok);
        let rust = run_batch(&expected_cfg).unwrap();
        assert_eq!(pursuit_batch_len(batch), 3);
        for (i, r) in rust.runs.iter().enumerate() {
            assert_eq!(pursuit_batch_run_at(batch, i, &mut s), PursuitStatus::Ok);
            assert_eq!((s.seed, s.capture_ticks), (r.seed, r.capture_ticks));
        }
        assert_eq!(pursuit_batch_run_at(batch, 3, &mut s), PursuitStatus::InvalidArgument);
        let mut sum = PursuitBatchSummary::default();
        assert_eq!(pursuit_batch_summary(batch, &mut sum), PursuitStatus::Ok);
        assert_eq!(sum.runs, 3);
        assert_eq!(sum.mean_capture, rust.summary.capture.mean);
        assert_eq!(sum.cut_off, rust.summary.cut_off);

        let dir = tempfile::tempdir().unwrap();
        let d = c(dir.path().to_str().unwrap());
        assert_eq!(pursuit_batch_write_outputs(batch, cfg, d.as_ptr()), PursuitStatus::Ok);
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("runs_KMEANS_AGRMF.csv").exists());

        let trace = c(dir.path().join("t.jsonl").to_str().unwrap());
        let mut ticks = 0;
        assert_eq!(pursuit_trace_save(cfg, 5, trace.as_ptr(), &mut ticks), PursuitStatus::Ok);
        assert_eq!(ticks, m.capture_ticks);

        pursuit_batch_free(batch);
        pursuit_config_free(cfg);
    }
}

#[test]
fn stepping_matches_a_full_run() {
    let expected = run_single(&ExperimentConfig::from_toml_str(SMALL).unwrap(), 9).unwrap();
    unsafe {
        let cfg = small_config();
        let mut sim = ptr::null_mut();
        assert_eq!(pursuit_sim_new(cfg, 9, &mut sim), PursuitStatus::Ok);
        assert_eq!(pursuit_sim_tick(sim), 0);

        let mut len = 0usize;
        assert_eq!(
            pursuit_sim_pursuers(sim, ptr::null_mut(), 0, &mut len),
            PursuitStatus::BufferTooSmall
        );
        assert_eq!(len, 6);
        let mut ps = vec![PursuitPursuer::default(); len];
        assert_eq!(pursuit_sim_pursuers(sim, ps.as_mut_ptr(), ps.len(), &mut len), PursuitStatus::Ok);
        assert_eq!(ps.iter().map(|p| p.id).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
        assert!(ps.iter().any(|p| p.in_group));
        assert!(ps.iter().all(|p| p.x < 14 && p.y < 14));

        let mut es = vec![PursuitEvader::default(); 2];
        assert_eq!(pursuit_sim_evaders(sim, es.as_mut_ptr(), 2, &mut len), PursuitStatus::Ok);
        assert_eq!(len, 2);
        assert!(es.iter().all(|e| (2..=4).contains(&e.difficulty) && !e.captured));

        let mut finished = false;
        let mut steps = 0;
        while !finished {
            assert_eq!(pursuit_sim_step(sim, &mut finished), PursuitStatus::Ok);
            steps += 1;
        }
        assert_eq!(steps, expected.capture_ticks);
        assert_eq!(pursuit_sim_step(sim, &mut finished), PursuitStatus::Ok);
        assert!(finished);
        assert_eq!(pursuit_sim_tick(sim), expected.capture_ticks);

        let mut s = PursuitRunSummary::default();
        assert_eq!(pursuit_sim_metrics(sim, &mut s), PursuitStatus::Ok);
        assert_eq!(s.capture_ticks, expected.capture_ticks);
        assert_eq!(s.flexibility, expected.flexibility);
        assert_eq!(s.cumulative_reward, expected.cumulative_reward());

        pursuit_sim_evaders(sim, es.as_mut_ptr(), 2, &mut len);
        assert_eq!(es.iter().all(|e| e.captured), expected.completed);

        pursuit_sim_free(sim);
        pursuit_config_free(cfg);
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let case = c("bogus_main");
        pursuit_config_new(case.as_ptr(), &mut cfg);
    }
    let other = std::thread::spawn(|| pursuit_last_error().is_null()).join().unwrap();
    assert!(other);
    assert!(last_error().contains("bogus_main"));
}
