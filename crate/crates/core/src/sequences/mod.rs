//! Experiments built from dynamics, noise and readout: Rabi sweeps,
//! fixed-pulsewidth amplitude and phase sweeps, sensitivity estimates and
//! the heterodyne photon stream.
//!
//! Trajectories run in the frame rotating at ω₀ with the exact phase
//! modulation of the drive, so the Mollow sidebands and the residual
//! counter-rotating shifts of the doubly rotating frame are retained.

mod engine;
mod heterodyne;
mod rabi;
mod sensitivity;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::ReadoutConfig;
use crate::units::DriveConfig;

pub use engine::{Engine, TrajectoryParams};
pub use heterodyne::{
    beat_frequency, check_nyquist, clock_frequency, heterodyne_trace, phase_response_curve, run_heterodyne,
    HeterodyneSettings, PhaseResponse,
};
pub use rabi::{coherence_envelope, decay_time, ensemble_bloch, run_rabi, rabi_sz};
pub use sensitivity::{
    compute_phase_sensitivity, compute_phase_sensitivity_curve, compute_sensitivity, PhaseSensitivityCurve,
    SensitivityReport,
};
pub use sweep::{expected_sz, find_antinode, run_fixed_point_sweep, FixedPointSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceTiming {
    pub t_mw: f64,
    pub delta_t: f64,
    pub t_rep: f64,
}

impl Default for SequenceTiming {
    fn default() -> Self {
        SequenceTiming {
            t_mw: 950e-9,
            delta_t: 5e-9,
            t_rep: 5e-6,
        }
    }
}

impl SequenceTiming {
    /// Dead time left in each repetition after the pulse, its reference
    /// offset and the laser pulse.
    pub fn idle(&self, readout: &ReadoutConfig) -> f64 {
        self.t_rep - self.t_mw - self.delta_t - readout.laser_init
    }

    pub fn validate(&self, readout: &ReadoutConfig) -> Result<()> {
        if !(self.t_mw >= 0.0 && self.delta_t >= 0.0 && self.t_rep > 0.0)
            || !(self.t_mw + self.delta_t + self.t_rep).is_finite()
        {
            return Err(Error::Timing("durations must be finite and non-negative".into()));
        }
        if self.idle(readout) < -1e-15 {
            return Err(Error::Timing(format!(
                "T_MW + delta_T + laser_init = {:e} s exceeds T_rep = {:e} s",
                self.t_mw + self.delta_t + readout.laser_init,
                self.t_rep
            )));
        }
        Ok(())
    }

    /// True when ΔT is half a modulation period, `π/ω_m`.
    pub fn reference_matches(&self, drive: &DriveConfig) -> bool {
        (self.delta_t - 0.5 / drive.omega_m.value()).abs() < 1e-6 * self.delta_t.max(1e-15)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub realizations: usize,
    /// Longest integration step, seconds; `None` uses `1/(80 Ω)`.
    #[serde(default)]
    pub max_step: Option<f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            realizations: 128,
            max_step: None,
        }
    }
}

impl SimulationSettings {
    pub fn step(&self, drive: &DriveConfig) -> f64 {
        self.max_step.unwrap_or(1.0 / (80.0 * drive.omega.value()))
    }

    pub fn with_realizations(mut self, n: usize) -> Self {
        self.realizations = n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    PulseWidth,
    Amplitude,
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_repeats: usize,
    /// Shot-noise-free contrast per point.
    pub expected: Vec<f64>,
    /// Individual repeats per point (empty for Rabi sweeps).
    pub samples: Vec<Vec<f64>>,
    /// Measurement time behind one repeat of one point, seconds.
    pub t_m: f64,
}

impl SweepResult {
    pub fn empty(axis: SweepAxis) -> Self {
        SweepResult {
            axis,
            values: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
            n_repeats: 0,
            expected: Vec::new(),
            samples: Vec::new(),
            t_m: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
