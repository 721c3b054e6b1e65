//! Result files and their schemas.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use sidelink_core::{MetricsRecord, Mode};

pub const RUNS_CSV: &str = "runs.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const RUNS_DIR: &str = "runs";
pub const LOGS_DIR: &str = "logs";
pub const EXPERIMENT_JSON: &str = "experiment.json";

pub const RUNS_HEADER: &str =
    "config_hash,cell,mode,seed,status,pdr,mean_cbr,median_cbr,collision_probability,\
mean_interference_dbm,tb_generated,tb_delivered,tb_lost,data_tx,signaling_tx,fallbacks,error";
pub const SUMMARY_HEADER: &str =
    "cell,mode,runs,failed,pdr_mean,pdr_std,mean_cbr_mean,mean_cbr_std,\
median_cbr_mean,median_cbr_std,collision_mean,collision_std";
pub const COMPARISON_HEADER: &str = "cell,pairs,pdr_standard,pdr_coop3d,pdr_delta_pp,pdr_delta_pp_std,\
collision_standard,collision_coop3d,collision_ratio,median_cbr_standard,median_cbr_coop3d,median_cbr_change_pct";

/// One line of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub config_hash: String,
    pub cell: String,
    pub mode: Mode,
    pub seed: u64,
    /// `ok` or `error`.
    pub status: String,
    pub pdr: Option<f64>,
    pub mean_cbr: Option<f64>,
    pub median_cbr: Option<f64>,
    pub collision_probability: Option<f64>,
    pub mean_interference_dbm: Option<f64>,
    pub tb_generated: Option<usize>,
    pub tb_delivered: Option<usize>,
    pub tb_lost: Option<usize>,
    pub data_tx: Option<usize>,
    pub signaling_tx: Option<usize>,
    pub fallbacks: Option<usize>,
    pub error: Option<String>,
}

impl RunRow {
    pub fn ok(config_hash: String, cell: String, mode: Mode, seed: u64, m: &MetricsRecord) -> Self {
        Self {
            config_hash,
            cell,
            mode,
            seed,
            status: "ok".into(),
            pdr: m.pdr,
            mean_cbr: m.mean_cbr(),
            median_cbr: m.median_cbr(),
            collision_probability: m.collision_probability,
            mean_interference_dbm: m.mean_interference_dbm,
            tb_generated: Some(m.tb_generated),
            tb_delivered: Some(m.tb_delivered),
            tb_lost: Some(m.tb_lost),
            data_tx: Some(m.data_tx),
            signaling_tx: Some(m.signaling_tx),
            fallbacks: Some(m.fallbacks),
            error: None,
        }
    }

    pub fn failed(config_hash: String, cell: String, mode: Mode, seed: u64, error: String) -> Self {
        Self {
            config_hash,
            cell,
            mode,
            seed,
            status: "error".into(),
            pdr: None,
            mean_cbr: None,
            median_cbr: None,
            collision_probability: None,
            mean_interference_dbm: None,
            tb_generated: None,
            tb_delivered: None,
            tb_lost: None,
            data_tx: None,
            signaling_tx: None,
            fallbacks: None,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Per-run JSON file under `runs/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub cell: String,
    pub mode: Mode,
    pub seed: u64,
    pub metrics: MetricsRecord,
}

pub fn run_stem(config_hash: &str, seed: u64) -> String {
    format!("{config_hash}-{seed}")
}

pub fn record_path(dir: &Path, config_hash: &str, seed: u64) -> PathBuf {
    dir.join(RUNS_DIR)
        .join(format!("{}.json", run_stem(config_hash, seed)))
}

pub fn log_path(dir: &Path, config_hash: &str, seed: u64) -> PathBuf {
    dir.join(LOGS_DIR)
        .join(format!("{}.jsonl", run_stem(config_hash, seed)))
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRow>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<RunRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Writes rows with the `runs.csv` header; the header is written even for
/// an empty table.
pub fn write_runs(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(RUNS_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), s)
}

fn cell_fmt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

/// Mean and sample standard deviation per (cell, mode).
pub fn write_summary(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut groups: BTreeMap<(&str, Mode), Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.cell, r.mode)).or_default().push(r);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER.split(','))?;
    for ((cell, mode), rs) in groups {
        let ok: Vec<&&RunRow> = rs.iter().filter(|r| r.is_ok()).collect();
        let col = |f: fn(&RunRow) -> Option<f64>| {
            mean_std(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        let mut rec = vec![
            cell.to_string(),
            mode.to_string(),
            ok.len().to_string(),
            (rs.len() - ok.len()).to_string(),
        ];
        for (m, s) in [
            col(|r| r.pdr),
            col(|r| r.mean_cbr),
            col(|r| r.median_cbr),
            col(|r| r.collision_probability),
        ] {
            rec.push(cell_fmt(m));
            rec.push(cell_fmt(s));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Standard against cooperative per cell, over the seeds both modes
/// completed.
pub fn write_comparison(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut by_cell: BTreeMap<&str, BTreeMap<u64, [Option<&RunRow>; 2]>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let k = match r.mode {
            Mode::Standard => 0,
            Mode::Coop3d => 1,
        };
        by_cell
            .entry(&r.cell)
            .or_default()
            .entry(r.seed)
            .or_default()[k] = Some(r);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COMPARISON_HEADER.split(','))?;
    for (cell, seeds) in by_cell {
        let pairs: Vec<(&RunRow, &RunRow)> = seeds
            .values()
            .filter_map(|p| Some((p[0]?, p[1]?)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let avg = |f: &dyn Fn(&RunRow) -> Option<f64>, which: usize| {
            let xs: Vec<f64> = pairs
                .iter()
                .filter_map(|p| f(if which == 0 { p.0 } else { p.1 }))
                .collect();
            mean_std(&xs).0
        };
        let pdr = |r: &RunRow| r.pdr;
        let coll = |r: &RunRow| r.collision_probability;
        let cbr = |r: &RunRow| r.median_cbr;
        let deltas: Vec<f64> = pairs
            .iter()
            .filter_map(|(s, c)| Some(100.0 * (c.pdr? - s.pdr?)))
            .collect();
        let (d_mean, d_std) = mean_std(&deltas);
        let (cs, cc) = (avg(&coll, 0), avg(&coll, 1));
        let (bs, bc) = (avg(&cbr, 0), avg(&cbr, 1));
        let ratio = cs.zip(cc).and_then(|(s, c)| (s > 0.0).then(|| c / s));
        let change = bs
            .zip(bc)
            .and_then(|(s, c)| (s > 0.0).then(|| 100.0 * (c - s) / s));
        w.write_record([
            cell.to_string(),
            pairs.len().to_string(),
            cell_fmt(avg(&pdr, 0)),
            cell_fmt(avg(&pdr, 1)),
            cell_fmt(d_mean),
            cell_fmt(d_std),
            cell_fmt(cs),
            cell_fmt(cc),
            cell_fmt(ratio),
            cell_fmt(bs),
            cell_fmt(bc),
            cell_fmt(change),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cell: &str, mode: Mode, seed: u64, pdr: f64) -> RunRow {
        let mut r = RunRow::failed("h".into(), cell.into(), mode, seed, String::new());
        r.status = "ok".into();
        r.error = None;
        r.pdr = Some(pdr);
        r.collision_probability = Some(0.1 * pdr);
        r.median_cbr = Some(0.4);
        r
    }

    #[test]
    fn runs_round_trip_with_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(RUNS_CSV);
        let rows = vec![
            row("base", Mode::Standard, 0, 0.9),
            RunRow::failed(
                "h".into(),
                "base".into(),
                Mode::Coop3d,
                0,
                "boom, with comma".into(),
            ),
        ];
        write_runs(&p, &rows).unwrap();
        assert_eq!(read_runs(&p).unwrap(), rows);
        write_runs(&p, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().trim_end(), RUNS_HEADER);
    }

    #[test]
    fn summary_and_comparison() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row("base", Mode::Standard, 0, 0.8),
            row("base", Mode::Standard, 1, 0.6),
            row("base", Mode::Coop3d, 0, 0.9),
            row("base", Mode::Coop3d, 1, 0.9),
            row("base", Mode::Coop3d, 2, 0.1),
        ];
        let s = dir.path().join(SUMMARY_CSV);
        write_summary(&s, &rows).unwrap();
        let text = std::fs::read_to_string(&s).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert!(
            lines[1].starts_with("base,standard,2,0,0.7,"),
            "{}",
            lines[1]
        );
        let c = dir.path().join(COMPARISON_CSV);
        write_comparison(&c, &rows).unwrap();
        let text = std::fs::read_to_string(&c).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], COMPARISON_HEADER);
        // seed 2 has no standard partner and is left out
        let f: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(f[1], "2");
        assert!((f[4].parse::<f64>().unwrap() - 20.0).abs() < 1e-9);
    }
}
