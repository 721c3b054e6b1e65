use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use sidelink_cli::single::run_single;
use sidelink_cli::{emit_plotdata, load_config, run_experiment};
use sidelink_core::Mode;

#[derive(Parser)]
#[command(
    name = "sidelink",
    version,
    about = "NR sidelink mode-2 resource allocation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the base configuration once per mode and keep the event logs.
    Run {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to one mode (default: the modes of the experiment).
        #[arg(long)]
        mode: Option<Mode>,
        /// Output directory (default: the experiment's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every mode x sweep cell x seed; completed runs are skipped.
    Sweep {
        config: PathBuf,
        /// Number of seeds per cell and mode.
        #[arg(long)]
        seeds: Option<u64>,
        /// First seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel runs (default: experiment.workers, else all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write plot tables for a finished sweep.
    Plotdata { results_dir: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            mode,
            out,
        } => {
            let spec = load_config(&config)?;
            let modes = mode.map_or(spec.experiment.modes.clone(), |m| vec![m]);
            let out = out.unwrap_or(spec.experiment.output_dir.clone());
            for r in run_single(&spec.base(), &modes, seed, &out)? {
                let m = &r.metrics;
                let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{} seed {seed}: pdr {} median_cbr {} collision {} log {}",
                    r.mode,
                    show(m.pdr),
                    show(m.median_cbr()),
                    show(m.collision_probability),
                    r.log.display()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            seeds,
            seed,
            mode,
            out,
            workers,
        } => {
            let mut spec = load_config(&config)?;
            let e = &mut spec.experiment;
            if let Some(n) = seeds {
                e.seeds = n;
            }
            if let Some(s) = seed {
                e.first_seed = s;
            }
            if let Some(m) = mode {
                e.modes = vec![m];
            }
            if let Some(o) = out {
                e.output_dir = o;
            }
            if let Some(w) = workers {
                e.workers = Some(w);
            }
            spec.validate()?;
            let workers = spec
                .experiment
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let out = spec.experiment.output_dir.clone();
            let report = run_experiment(&spec, &out, workers)?;
            println!(
                "{} runs executed, {} already complete, {} failed; results in {}",
                report.executed,
                report.skipped,
                report.failed,
                out.display()
            );
            Ok(if report.failed > 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Plotdata { results_dir } => {
            let n = emit_plotdata(&results_dir)?;
            println!(
                "plot tables from {n} runs written to {}",
                results_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
