//! Experiment files, parameter sweeps and plot tables for the sidelink
//! simulator.

pub mod experiment;
pub mod output;
pub mod plotdata;
pub mod single;
pub mod sweep;

pub use experiment::{config_hash, load_config, Cell, ExperimentSection, ExperimentSpec};
pub use plotdata::emit_plotdata;
pub use sweep::{run_experiment, SweepReport};
