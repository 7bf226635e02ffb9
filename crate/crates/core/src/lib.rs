//! Simulation and analysis toolkit for spin sensing with continuous
//! concatenated dynamical decoupling (CCDD).

pub mod dsp;
pub mod dynamics;
pub mod error;
pub mod noise;
pub mod readout;
pub mod sequences;
pub mod units;
pub mod wavegen;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
