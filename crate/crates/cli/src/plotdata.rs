//! Plot-ready tables from a results directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Result};

use sidelink_core::metrics::{ecdf, interference_bin};
use sidelink_core::Mode;

use crate::experiment::ExperimentSpec;
use crate::output::{RunRecord, EXPERIMENT_JSON};
use crate::sweep::load_records;

pub const PDR_CSV: &str = "pdr_vs_interference.csv";
pub const CBR_ECDF_CSV: &str = "cbr_ecdf.csv";
pub const COLLISION_ECDF_CSV: &str = "collision_ecdf.csv";

pub const PDR_HEADER: &str = "cell,mode,bin_lo_dbm,bin_hi_dbm,samples,mean_pdr";
pub const CBR_ECDF_HEADER: &str = "cell,mode,cbr,ecdf";
pub const COLLISION_ECDF_HEADER: &str = "cell,mode,collision_probability,ecdf";

/// One sample per link and run: the link's PDR against its mean data
/// interference. Links that never saw interference land in the `None` bin.
pub fn pdr_bins(records: &[&RunRecord], width: f64) -> BTreeMap<Option<i64>, Vec<f64>> {
    let mut bins: BTreeMap<Option<i64>, Vec<f64>> = BTreeMap::new();
    for r in records {
        for l in &r.metrics.links {
            let Some(pdr) = l.pdr else { continue };
            let bin = l
                .mean_interference_dbm
                .map(|d| (interference_bin(d, width) / width).round() as i64);
            bins.entry(bin).or_default().push(pdr);
        }
    }
    bins
}

fn bin_width(dir: &Path) -> Result<f64> {
    let path = dir.join(EXPERIMENT_JSON);
    if !path.exists() {
        return Ok(ExperimentSpec::default().experiment.interference_bin_db);
    }
    let spec: ExperimentSpec = serde_json::from_slice(&fs::read(path)?)?;
    Ok(spec.experiment.interference_bin_db)
}

/// Writes the three plot tables into `dir` and returns the records used.
pub fn emit_plotdata(dir: &Path) -> Result<usize> {
    let records = load_records(dir)?;
    if records.is_empty() {
        bail!("no completed runs in {}", dir.display());
    }
    let width = bin_width(dir)?;
    let mut groups: BTreeMap<(&str, Mode), Vec<&RunRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry((&r.cell, r.mode)).or_default().push(r);
    }

    let mut pdr = csv::Writer::from_path(dir.join(PDR_CSV))?;
    pdr.write_record(PDR_HEADER.split(','))?;
    let mut cbr = csv::Writer::from_path(dir.join(CBR_ECDF_CSV))?;
    cbr.write_record(CBR_ECDF_HEADER.split(','))?;
    let mut coll = csv::Writer::from_path(dir.join(COLLISION_ECDF_CSV))?;
    coll.write_record(COLLISION_ECDF_HEADER.split(','))?;

    for ((cell, mode), rs) in &groups {
        for (bin, xs) in pdr_bins(rs, width) {
            let (lo, hi) = bin.map_or((String::new(), String::new()), |b| {
                (
                    (b as f64 * width).to_string(),
                    ((b + 1) as f64 * width).to_string(),
                )
            });
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            pdr.write_record([
                cell.to_string(),
                mode.to_string(),
                lo,
                hi,
                xs.len().to_string(),
                mean.to_string(),
            ])?;
        }
        let series: Vec<f64> = rs
            .iter()
            .flat_map(|r| r.metrics.cbr_series.iter().copied())
            .collect();
        for (x, f) in ecdf(&series) {
            cbr.write_record([
                cell.to_string(),
                mode.to_string(),
                x.to_string(),
                f.to_string(),
            ])?;
        }
        let per_run: Vec<f64> = rs
            .iter()
            .filter_map(|r| r.metrics.collision_probability)
            .collect();
        for (x, f) in ecdf(&per_run) {
            coll.write_record([
                cell.to_string(),
                mode.to_string(),
                x.to_string(),
                f.to_string(),
            ])?;
        }
    }
    pdr.flush()?;
    cbr.flush()?;
    coll.flush()?;
    Ok(records.len())
}
