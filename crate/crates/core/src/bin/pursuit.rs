use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pursuit_core::experiment::{
    compare_cases, emit_outputs, run_batch, save_trace, Case, ExperimentConfig, WORKERS_ENV,
};
use pursuit_core::{PursuitError, Result};

#[derive(Parser)]
#[command(name = "pursuit", version, about = "Grid-world pursuit-evasion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case over seeded repetitions.
    Run {
        #[command(flatten)]
        common: Common,
        /// AGR, AGRMF, SOFM_AGRMF, KMEANS_AGRMF or DBSCAN_AGRMF.
        #[arg(long)]
        case: Option<Case>,
    },
    /// Run several cases on shared seeds and compare them.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated cases; all five by default.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<Case>,
    },
    /// Write a JSON-lines replay of a single run.
    ReplayExport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        case: Option<Case>,
        /// Run seed; defaults to the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trace file.
        #[arg(long, short)]
        trace: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, short, default_value = "results")]
    out_dir: PathBuf,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    max_ticks: Option<u64>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    pursuers: Option<usize>,
    #[arg(long)]
    evaders: Option<usize>,
    #[arg(long)]
    difficulty_min: Option<u32>,
    #[arg(long)]
    difficulty_max: Option<u32>,
    #[arg(long)]
    pursuer_range: Option<u32>,
    #[arg(long)]
    life: Option<u32>,
    /// Any config field as `dotted.key=value`, e.g. `learning.alpha=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$($field).+ = v; })*
            };
        }
        apply!(
            repetitions => repetitions,
            base_seed => base_seed,
            max_ticks => max_ticks,
            width => grid.width,
            height => grid.height,
            pursuers => agents.pursuers,
            evaders => agents.evaders,
            difficulty_min => agents.difficulty_min,
            difficulty_max => agents.difficulty_max,
            pursuer_range => agents.pursuer_range,
            life => coalition.life,
        );
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        for s in &self.sets {
            cfg.set(s)?;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, case } => {
            let mut cfg = common.config()?;
            if let Some(case) = case {
                cfg.case = case;
            }
            cfg.validate()?;
            let batch = run_batch(&cfg)?;
            let s = &batch.summary;
            println!(
                "{}: runs={} capture={:.2}±{:.2} flexibility={:.2}±{:.2} cut_off={}",
                s.case, s.runs, s.capture.mean, s.capture.std, s.flexibility.mean, s.flexibility.std, s.cut_off
            );
            emit_outputs(&cfg, &[batch], &[], &common.out_dir)?;
        }
        Command::Compare { common, cases } => {
            let cfg = common.config()?;
            cfg.validate()?;
            let cases = if cases.is_empty() { Case::ALL.to_vec() } else { cases };
            let configs: Vec<ExperimentConfig> = cases.iter().map(|&c| cfg.with_case(c)).collect();
            let cmp = compare_cases(&configs)?;
            println!("{:<14}{:>8}{:>12}{:>10}{:>12}{:>10}", "case", "runs", "capture", "std", "flex", "std");
            for b in &cmp.batches {
                let s = &b.summary;
                println!(
                    "{:<14}{:>8}{:>12.2}{:>10.2}{:>12.2}{:>10.2}",
                    s.case.name(),
                    s.runs,
                    s.capture.mean,
                    s.capture.std,
                    s.flexibility.mean,
                    s.flexibility.std
                );
            }
            for pair in cmp.batches.windows(2) {
                if let Some(d) = cmp.diff(pair[0].case, pair[1].case) {
                    println!(
                        "{} vs {}: {:+.2}% (paired diff {:.2} ± {:.2})",
                        d.candidate, d.baseline, d.improvement_pct, d.mean_diff, d.se_diff
                    );
                }
            }
            emit_outputs(&cfg, &cmp.batches, &cmp.diffs, &common.out_dir)?;
        }
        Command::ReplayExport {
            common,
            case,
            seed,
            trace,
        } => {
            let mut cfg = common.config()?;
            if let Some(case) = case {
                cfg.case = case;
            }
            let seed = seed.unwrap_or(cfg.base_seed);
            let ticks = save_trace(&cfg, seed, &trace)?;
            println!("wrote {} ticks to {}", ticks, trace.display());
        }
        Command::ShowConfig { common } => {
            let cfg = common.config()?;
            cfg.validate()?;
            print!("{}", cfg.to_toml_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(match e {
                PursuitError::InvalidConfig(_)
                | PursuitError::Parse { .. }
                | PursuitError::UnknownCase(_)
                | PursuitError::UnknownMethod(_)
                | PursuitError::MismatchedScenario(_) => 2,
                _ => 1,
            })
        }
    }
}
