//! Experiment files: a base simulation config plus the sweep description.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sidelink_core::{
    CoopConfig, EngineConfig, GridConfig, Mode, RadioConfig, ScenarioConfig, SimConfig, SpsConfig,
};

/// The `[experiment]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub modes: Vec<Mode>,
    /// Seeds per (cell, mode): `first_seed .. first_seed + seeds`.
    pub seeds: u64,
    pub first_seed: u64,
    pub output_dir: PathBuf,
    /// Width of the interference bins of the PDR curve, dB.
    pub interference_bin_db: f64,
    /// Parallel runs; `None` uses every available core.
    pub workers: Option<usize>,
    /// Also keep the event log of every run.
    pub save_logs: bool,
    /// Dotted config path (e.g. `grid.selection_window`) to the values it
    /// takes. Cells are the cartesian product of all axes.
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            modes: Mode::ALL.to_vec(),
            seeds: 30,
            first_seed: 0,
            output_dir: PathBuf::from("results"),
            interference_bin_db: 2.0,
            workers: None,
            save_logs: false,
            sweep: BTreeMap::new(),
        }
    }
}

/// A whole experiment file. The simulation sections mirror [`SimConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentSection,
    pub grid: GridConfig,
    pub radio: RadioConfig,
    pub sps: SpsConfig,
    pub coop: CoopConfig,
    pub scenario: ScenarioConfig,
    pub engine: EngineConfig,
}

/// One point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// `axis=value` pairs joined by `;`, or `base` without axes.
    pub label: String,
    pub config: SimConfig,
}

impl ExperimentSpec {
    pub fn base(&self) -> SimConfig {
        SimConfig {
            grid: self.grid.clone(),
            radio: self.radio.clone(),
            sps: self.sps.clone(),
            coop: self.coop.clone(),
            scenario: self.scenario.clone(),
            engine: self.engine.clone(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks the experiment section and every cell of the sweep.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.modes.is_empty() {
            bail!("experiment.modes: must name at least one mode");
        }
        if e.seeds == 0 {
            bail!("experiment.seeds: must be >= 1");
        }
        if !(e.interference_bin_db > 0.0 && e.interference_bin_db.is_finite()) {
            bail!("experiment.interference_bin_db: must be > 0");
        }
        if e.workers == Some(0) {
            bail!("experiment.workers: must be >= 1");
        }
        for (axis, values) in &e.sweep {
            if values.is_empty() {
                bail!("experiment.sweep.{axis}: needs at least one value");
            }
        }
        self.cells().map(|_| ())
    }

    /// Every cell of the sweep, in a fixed order, each validated.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let base = toml::Value::try_from(self.base())?;
        let mut cells = vec![(Vec::<String>::new(), base)];
        for (axis, values) in &self.experiment.sweep {
            let mut next = Vec::new();
            for (labels, table) in &cells {
                for v in values {
                    let mut t = table.clone();
                    set_path(&mut t, axis, v.clone())?;
                    let mut l = labels.clone();
                    l.push(format!("{axis}={v}"));
                    next.push((l, t));
                }
            }
            cells = next;
        }
        cells
            .into_iter()
            .map(|(labels, table)| {
                let label = if labels.is_empty() {
                    "base".to_string()
                } else {
                    labels.join(";")
                };
                let config: SimConfig = table
                    .try_into()
                    .map_err(|e| anyhow!("sweep cell `{label}`: {e}"))?;
                config
                    .validate()
                    .with_context(|| format!("sweep cell `{label}`"))?;
                Ok(Cell { label, config })
            })
            .collect()
    }

    pub fn seeds(&self) -> std::ops::Range<u64> {
        self.experiment.first_seed..self.experiment.first_seed + self.experiment.seeds
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        bail!("experiment.sweep: `{path}` is not a `section.key` path");
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("experiment.sweep: `{path}` runs through a non-table value"))?;
        node = table
            .get_mut(*part)
            .ok_or_else(|| anyhow!("experiment.sweep: unknown section `{part}` in `{path}`"))?;
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| anyhow!("experiment.sweep: `{path}` runs through a non-table value"))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentSpec::from_toml(&text).with_context(|| format!("in {}", path.display()))
}

/// Stable identifier of one (config, mode) pair.
pub fn config_hash(config: &SimConfig, mode: Mode) -> String {
    let json = serde_json::to_string(&(config, mode)).expect("config serializes");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}
