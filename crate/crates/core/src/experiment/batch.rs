use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Case, ExperimentConfig};
use super::sim::{run_single, RunMetrics};
use crate::error::{PursuitError, Result};
use crate::rng::run_seed;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stats {
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Standard error of the mean.
    pub fn sem(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.std / (n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub case: Case,
    pub runs: usize,
    pub capture: Stats,
    pub flexibility: Stats,
    /// Runs that hit `max_ticks`.
    pub cut_off: usize,
    /// Mean reward at each tick over the runs still going at that tick.
    pub mean_trajectory: Vec<f64>,
}

impl Summary {
    pub fn from_runs(case: Case, runs: &[RunMetrics]) -> Summary {
        let capture: Vec<f64> = runs.iter().map(|r| r.capture_ticks as f64).collect();
        let flex: Vec<f64> = runs.iter().map(|r| f64::from(r.flexibility)).collect();
        let len = runs.iter().map(|r| r.reward_trajectory.len()).max().unwrap_or(0);
        let mean_trajectory = (0..len)
            .map(|t| {
                let vals: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r.reward_trajectory.get(t).copied())
                    .collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        Summary {
            case,
            runs: runs.len(),
            capture: Stats::of(&capture),
            flexibility: Stats::of(&flex),
            cut_off: runs.iter().filter(|r| !r.completed).count(),
            mean_trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub case: Case,
    /// Sorted by seed.
    pub runs: Vec<RunMetrics>,
    pub summary: Summary,
}

/// Runs `repetitions` seeds starting at `base_seed`, in parallel up to the
/// configured worker count. Results do not depend on the worker count.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchResult> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.repetitions)
        .map(|i| run_seed(cfg.base_seed, i))
        .collect();
    let workers = cfg.workers();
    let mut runs: Vec<RunMetrics> = if workers <= 1 {
        seeds.iter().map(|&s| run_single(cfg, s)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| PursuitError::config(format!("worker pool: {e}")))?;
        pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| run_single(cfg, s))
                .collect::<Result<_>>()
        })?
    };
    runs.sort_by_key(|r| r.seed);
    let summary = Summary::from_runs(cfg.case, &runs);
    Ok(BatchResult {
        case: cfg.case,
        runs,
        summary,
    })
}

/// Paired difference of `baseline - candidate` capture ticks over shared seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDiff {
    pub candidate: Case,
    pub baseline: Case,
    pub mean_diff: f64,
    /// Standard error of the mean paired difference.
    pub se_diff: f64,
    /// `100 * (baseline - candidate) / baseline` on the means.
    pub improvement_pct: f64,
}

pub fn paired_diff(candidate: &BatchResult, baseline: &BatchResult) -> Result<PairedDiff> {
    let seeds_a: Vec<u64> = candidate.runs.iter().map(|r| r.seed).collect();
    let seeds_b: Vec<u64> = baseline.runs.iter().map(|r| r.seed).collect();
    if seeds_a != seeds_b {
        return Err(PursuitError::MismatchedScenario(
            "batches were run on different seeds".into(),
        ));
    }
    let diffs: Vec<f64> = candidate
        .runs
        .iter()
        .zip(&baseline.runs)
        .map(|(a, b)| b.capture_ticks as f64 - a.capture_ticks as f64)
        .collect();
    let s = Stats::of(&diffs);
    let base = baseline.summary.capture.mean;
    let improvement_pct = if base > 0.0 {
        100.0 * (base - candidate.summary.capture.mean) / base
    } else {
        0.0
    };
    Ok(PairedDiff {
        candidate: candidate.case,
        baseline: baseline.case,
        mean_diff: s.mean,
        se_diff: s.sem(diffs.len()),
        improvement_pct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub batches: Vec<BatchResult>,
    /// Every ordered pair of distinct cases, candidate first.
    pub diffs: Vec<PairedDiff>,
}

impl Comparison {
    pub fn batch(&self, case: Case) -> Option<&BatchResult> {
        self.batches.iter().find(|b| b.case == case)
    }

    pub fn diff(&self, candidate: Case, baseline: Case) -> Option<&PairedDiff> {
        self.diffs
            .iter()
            .find(|d| d.candidate == candidate && d.baseline == baseline)
    }
}

/// Runs every config on the same seeds. The configs may differ only in case.
pub fn compare_cases(configs: &[ExperimentConfig]) -> Result<Comparison> {
    let Some(first) = configs.first() else {
        return Err(PursuitError::config("nothing to compare"));
    };
    let key = first.scenario_key();
    if let Some(bad) = configs.iter().find(|c| c.scenario_key() != key) {
        return Err(PursuitError::MismatchedScenario(format!(
            "{} differs from {} in more than its case",
            bad.case, first.case
        )));
    }
    let batches: Vec<BatchResult> = configs.iter().map(run_batch).collect::<Result<_>>()?;
    let mut diffs = Vec::new();
    for a in &batches {
        for b in &batches {
            if a.case != b.case {
                diffs.push(paired_diff(a, b)?);
            }
        }
    }
    Ok(Comparison { batches, diffs })
}
