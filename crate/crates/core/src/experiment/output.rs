use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::batch::{BatchResult, PairedDiff};
use super::config::ExperimentConfig;
use super::sim::Simulation;
use crate::error::{PursuitError, Result};

/// Bumped whenever a column or file changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const PAIRED_FILE: &str = "paired.csv";
pub const IMPROVEMENT_FILE: &str = "improvements.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn runs_file(case: impl std::fmt::Display) -> String {
    format!("runs_{case}.csv")
}

pub fn trajectory_file(case: impl std::fmt::Display) -> String {
    format!("trajectory_{case}.csv")
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    files: &'a [String],
    config: &'a ExperimentConfig,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| PursuitError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| PursuitError::io(path, e))
}

/// Writes the summary, per-run and trajectory CSVs for every batch, the
/// paired table and improvements when there is more than one case, and a
/// manifest. Returns the files written, relative to `dir`.
pub fn emit_outputs(
    config: &ExperimentConfig,
    batches: &[BatchResult],
    diffs: &[PairedDiff],
    dir: &Path,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| PursuitError::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join(SUMMARY_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record([
        "case",
        "runs",
        "mean_capture",
        "std_capture",
        "mean_flexibility",
        "std_flexibility",
    ])?;
    for b in batches {
        let s = &b.summary;
        w.write_record([
            s.case.to_string(),
            s.runs.to_string(),
            s.capture.mean.to_string(),
            s.capture.std.to_string(),
            s.flexibility.mean.to_string(),
            s.flexibility.std.to_string(),
        ])?;
    }
    finish(w, &path)?;
    written.push(SUMMARY_FILE.to_string());

    for b in batches {
        let name = runs_file(b.case);
        let path = dir.join(&name);
        let mut w = csv_writer(&path)?;
        w.write_record(["seed", "capture_ticks", "flexibility"])?;
        for r in &b.runs {
            w.write_record([
                r.seed.to_string(),
                r.capture_ticks.to_string(),
                r.flexibility.to_string(),
            ])?;
        }
        finish(w, &path)?;
        written.push(name);

        let name = trajectory_file(b.case);
        let path = dir.join(&name);
        let mut w = csv_writer(&path)?;
        w.write_record(["tick", "mean_reward"])?;
        for (t, v) in b.summary.mean_trajectory.iter().enumerate() {
            w.write_record([(t + 1).to_string(), v.to_string()])?;
        }
        finish(w, &path)?;
        written.push(name);
    }

    if batches.len() > 1 {
        let path = dir.join(PAIRED_FILE);
        let mut w = csv_writer(&path)?;
        let mut header = vec!["seed".to_string()];
        header.extend(batches.iter().map(|b| b.case.to_string()));
        w.write_record(&header)?;
        for (i, r) in batches[0].runs.iter().enumerate() {
            let mut row = vec![r.seed.to_string()];
            row.extend(batches.iter().map(|b| b.runs[i].capture_ticks.to_string()));
            w.write_record(&row)?;
        }
        finish(w, &path)?;
        written.push(PAIRED_FILE.to_string());
    }

    if !diffs.is_empty() {
        let path = dir.join(IMPROVEMENT_FILE);
        let mut w = csv_writer(&path)?;
        w.write_record(["case", "baseline", "mean_diff", "se_diff", "improvement_pct"])?;
        for d in diffs {
            w.write_record([
                d.candidate.to_string(),
                d.baseline.to_string(),
                d.mean_diff.to_string(),
                d.se_diff.to_string(),
                d.improvement_pct.to_string(),
            ])?;
        }
        finish(w, &path)?;
        written.push(IMPROVEMENT_FILE.to_string());
    }

    let path = dir.join(MANIFEST_FILE);
    let mut files = written.clone();
    files.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        files: &files,
        config,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| PursuitError::io(&path, e))?;
    Ok(files)
}

#[derive(Serialize)]
struct TraceHeader<'a> {
    schema_version: u32,
    case: &'a str,
    seed: u64,
    width: usize,
    height: usize,
    obstacles: &'a [crate::grid_world::Position],
}

/// Writes a JSON-lines replay of one run: a header line, then one record per
/// tick starting with the initial placement. Returns the number of ticks.
pub fn write_trace<W: Write>(cfg: &ExperimentConfig, seed: u64, out: W) -> Result<u64> {
    let mut out = BufWriter::new(out);
    let mut sim = Simulation::new(cfg, seed)?;
    let io = |e| PursuitError::io("<trace>", e);
    let header = TraceHeader {
        schema_version: SCHEMA_VERSION,
        case: cfg.case.name(),
        seed,
        width: cfg.grid.width,
        height: cfg.grid.height,
        obstacles: &cfg.grid.obstacles,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io)?;
    serde_json::to_writer(&mut out, &sim.initial_record())?;
    out.write_all(b"\n").map_err(io)?;
    while let Some(rec) = sim.step()? {
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(sim.world().tick)
}

pub fn save_trace(cfg: &ExperimentConfig, seed: u64, path: &Path) -> Result<u64> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| PursuitError::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| PursuitError::io(path, e))?;
    write_trace(cfg, seed, file).map_err(|e| match e {
        PursuitError::Io { source, .. } => PursuitError::io(path, source),
        other => other,
    })
}
