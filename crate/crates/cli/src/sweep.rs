//! Parallel execution of an experiment with a single result collector.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::Path;
use std::sync::mpsc;

use anyhow::{Context, Result};
use rayon::prelude::*;

use sidelink_core::engine::write_jsonl;
use sidelink_core::{metrics, run, Mode};

use crate::experiment::{config_hash, Cell, ExperimentSpec};
use crate::output::{
    self, log_path, read_runs, record_path, write_comparison, write_runs, write_summary, RunRecord,
    RunRow, COMPARISON_CSV, EXPERIMENT_JSON, LOGS_DIR, RUNS_CSV, RUNS_DIR, SUMMARY_CSV,
};

struct Job<'a> {
    cell: &'a Cell,
    mode: Mode,
    seed: u64,
    hash: String,
}

/// What a sweep did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepReport {
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs every (cell, mode, seed) of `spec` not already completed in `out`,
/// then rewrites `runs.csv`, `summary.csv` and `comparison.csv` from all
/// completed and failed runs. A failed run is recorded and retried by the
/// next invocation.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, workers: usize) -> Result<SweepReport> {
    let cells = spec.cells()?;
    fs::create_dir_all(out.join(RUNS_DIR))?;
    if spec.experiment.save_logs {
        fs::create_dir_all(out.join(LOGS_DIR))?;
    }
    fs::write(
        out.join(EXPERIMENT_JSON),
        serde_json::to_string_pretty(spec)?,
    )?;

    let runs_path = out.join(RUNS_CSV);
    let previous = if runs_path.exists() {
        read_runs(&runs_path)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<(String, u64)> = previous
        .iter()
        .filter(|r| r.is_ok() && record_path(out, &r.config_hash, r.seed).exists())
        .map(|r| (r.config_hash.clone(), r.seed))
        .collect();
    // completed rows carry over; failed ones are retried
    let mut rows: Vec<RunRow> = previous
        .into_iter()
        .filter(|r| done.contains(&(r.config_hash.clone(), r.seed)))
        .collect();

    let mut jobs = Vec::new();
    let mut skipped = 0;
    for cell in &cells {
        for &mode in &spec.experiment.modes {
            let hash = config_hash(&cell.config, mode);
            for seed in spec.seeds() {
                if done.contains(&(hash.clone(), seed)) {
                    skipped += 1;
                } else {
                    jobs.push(Job {
                        cell,
                        mode,
                        seed,
                        hash: hash.clone(),
                    });
                }
            }
        }
    }

    // rows already on disk stay there while new ones are appended, so an
    // interrupted sweep loses at most the runs in progress
    write_runs(&runs_path, &rows)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let (tx, rx) = mpsc::channel::<RunRow>();
    let total = jobs.len();
    let collector = std::thread::spawn({
        let runs_path = runs_path.clone();
        move || -> Result<Vec<RunRow>> {
            let file = OpenOptions::new().append(true).open(&runs_path)?;
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(file);
            let mut got = Vec::new();
            for row in rx {
                w.serialize(&row)?;
                w.flush()?;
                eprintln!(
                    "[{}/{total}] {} {} seed {}: {}",
                    got.len() + 1,
                    row.cell,
                    row.mode,
                    row.seed,
                    row.error.as_deref().unwrap_or(&row.status)
                );
                got.push(row);
            }
            Ok(got)
        }
    });
    let save_logs = spec.experiment.save_logs;
    pool.install(|| {
        jobs.par_iter().for_each_with(tx, |tx, job| {
            let row = execute(job, out, save_logs).unwrap_or_else(|e| {
                RunRow::failed(
                    job.hash.clone(),
                    job.cell.label.clone(),
                    job.mode,
                    job.seed,
                    format!("{e:#}"),
                )
            });
            tx.send(row).expect("collector alive");
        })
    });
    let fresh = collector.join().expect("collector thread")?;
    let failed = fresh.iter().filter(|r| !r.is_ok()).count();
    rows.extend(fresh);

    // deterministic order whatever the completion order was
    let order = |r: &RunRow| {
        let cell = cells
            .iter()
            .position(|c| c.label == r.cell)
            .unwrap_or(usize::MAX);
        (cell, r.mode, r.seed, r.config_hash.clone())
    };
    rows.sort_by_key(order);
    write_runs(&runs_path, &rows)?;
    write_summary(&out.join(SUMMARY_CSV), &rows)?;
    write_comparison(&out.join(COMPARISON_CSV), &rows)?;
    Ok(SweepReport {
        executed: total,
        skipped,
        failed,
    })
}

fn execute(job: &Job, out: &Path, save_logs: bool) -> Result<RunRow> {
    let cfg = &job.cell.config;
    let result = run(cfg, job.mode, job.seed)?;
    let m = metrics::compute(&result, cfg.grid.cbr_interval, cfg.grid.subchannels);
    if save_logs {
        let path = log_path(out, &job.hash, job.seed);
        write_jsonl(&result.events, BufWriter::new(File::create(&path)?))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let record = RunRecord {
        config_hash: job.hash.clone(),
        cell: job.cell.label.clone(),
        mode: job.mode,
        seed: job.seed,
        metrics: m,
    };
    let path = record_path(out, &job.hash, job.seed);
    fs::write(&path, serde_json::to_vec(&record)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(RunRow::ok(
        job.hash.clone(),
        job.cell.label.clone(),
        job.mode,
        job.seed,
        &record.metrics,
    ))
}

/// Loads the per-run records listed as completed in `runs.csv`.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let rows = output::read_runs(&dir.join(RUNS_CSV))?;
    rows.iter()
        .filter(|r| r.is_ok())
        .map(|r| {
            let path = record_path(dir, &r.config_hash, r.seed);
            let text = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_slice(&text).with_context(|| format!("parsing {}", path.display()))
        })
        .collect()
}
