//! Batch harness for the five compared cases: seeded runs, summaries,
//! paired comparisons, CSV output and replay traces.

mod batch;
mod config;
mod output;
mod sim;

pub use batch::{compare_cases, paired_diff, run_batch, BatchResult, Comparison, PairedDiff, Stats, Summary};
pub use config::{
    AgentSpec, Case, CoalitionSpec, EvaderPolicy, EvaderSpot, ExperimentConfig, GridSpec, Scenario,
    WORKERS_ENV,
};
pub use output::{
    emit_outputs, runs_file, save_trace, trajectory_file, write_trace, IMPROVEMENT_FILE,
    MANIFEST_FILE, PAIRED_FILE, SCHEMA_VERSION, SUMMARY_FILE,
};
pub use sim::{
    initial_world, run_single, EvaderRecord, PursuerRecord, RunMetrics, Simulation, TickRecord,
};
