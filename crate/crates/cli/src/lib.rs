//! Configuration-driven experiment runner for the CCDD sensing simulator.

pub mod config;
pub mod error;
pub mod plot;
pub mod presets;
pub mod run;

pub use config::{ExperimentConfig, Kind};
pub use error::CliError;
pub use run::{execute, run, verify};
