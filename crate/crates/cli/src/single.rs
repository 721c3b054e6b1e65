//! One simulation per mode for a fixed seed, with its full event log.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use sidelink_core::engine::write_jsonl;
use sidelink_core::{metrics, run, MetricsRecord, Mode, SimConfig};

pub struct SingleRun {
    pub mode: Mode,
    pub metrics: MetricsRecord,
    pub log: PathBuf,
}

/// Runs `cfg` once per mode and writes `<mode>-<seed>.events.jsonl` and
/// `<mode>-<seed>.metrics.json` into `out`.
pub fn run_single(
    cfg: &SimConfig,
    modes: &[Mode],
    seed: u64,
    out: &Path,
) -> Result<Vec<SingleRun>> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    modes
        .iter()
        .map(|&mode| {
            let result = run(cfg, mode, seed)?;
            let m = metrics::compute(&result, cfg.grid.cbr_interval, cfg.grid.subchannels);
            let log = out.join(format!("{mode}-{seed}.events.jsonl"));
            write_jsonl(&result.events, BufWriter::new(File::create(&log)?))
                .with_context(|| format!("writing {}", log.display()))?;
            fs::write(
                out.join(format!("{mode}-{seed}.metrics.json")),
                serde_json::to_string_pretty(&m)?,
            )?;
            Ok(SingleRun {
                mode,
                metrics: m,
                log,
            })
        })
        .collect()
}
