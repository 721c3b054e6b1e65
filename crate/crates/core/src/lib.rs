//! Slot-stepped simulator for NR sidelink mode-2 resource allocation, with
//! the standard semi-persistent scheme and a cooperative beam-aware scheme.

pub mod config;
pub mod engine;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod mobility;
pub mod ra_coop3d;
pub mod ra_standard;
pub mod radio;
pub mod rng;

pub use config::{EngineConfig, Mode, SimConfig};
pub use engine::{run, Event, RunOutput};
pub use error::{Result, SimError};
pub use grid::{GridConfig, ResourceIndex, SensingBitmap, Slot, WindowKind};
pub use metrics::{LinkPdr, MetricsRecord};
pub use mobility::{ScenarioConfig, ScenarioKind, VehicleKinematics};
pub use ra_coop3d::{BeamBitmapSet, CoopConfig, RaRequest, RaResponse};
pub use ra_standard::{Grant, SelectionOutcome, SpsConfig};
pub use radio::{Codebook, LinkGeometry, RadioConfig};
