//! Aggregate run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::GridConfig;
use crate::mobility::ScenarioConfig;
use crate::ra_coop3d::CoopConfig;
use crate::ra_standard::SpsConfig;
use crate::radio::RadioConfig;

/// Which allocation scheme the vehicles run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Standard,
    Coop3d,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Standard, Mode::Coop3d];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Coop3d => "coop3d",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Mode::Standard),
            "coop3d" => Ok(Mode::Coop3d),
            other => Err(SimError::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Total slots simulated, warm-up included.
    pub duration: u64,
    /// Slots before traffic starts; `None` means one sensing window.
    pub warmup: Option<u64>,
    /// Slots between mobility/geometry updates.
    pub mobility_step: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            duration: 20_796,
            warmup: None,
            mobility_step: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub radio: RadioConfig,
    pub sps: SpsConfig,
    pub coop: CoopConfig,
    pub scenario: ScenarioConfig,
    pub engine: EngineConfig,
}

impl SimConfig {
    pub fn warmup(&self) -> u64 {
        self.engine.warmup.unwrap_or(self.grid.sensing_window)
    }

    /// Checks every section and the constraints between them.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.radio.validate()?;
        self.sps.validate(&self.grid)?;
        self.coop.validate()?;
        self.scenario.validate()?;
        if self.warmup() < self.grid.sensing_window {
            return Err(SimError::config(
                "engine.warmup",
                "must cover the sensing window",
            ));
        }
        if self.engine.duration <= self.warmup() {
            return Err(SimError::config(
                "engine.duration",
                "must exceed the warm-up",
            ));
        }
        if self.engine.mobility_step < 1 {
            return Err(SimError::config("engine.mobility_step", "must be >= 1"));
        }
        if self.radio.codebook_depth > 32 {
            return Err(SimError::config("radio.codebook_depth", "must be <= 32"));
        }
        Ok(())
    }
}
