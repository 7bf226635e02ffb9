use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("epsilon_m ({epsilon_m} Hz) must be smaller than Omega ({omega} Hz)")]
    EpsilonNotBelowOmega { epsilon_m: f64, omega: f64 },
    #[error("omega_m ({omega_m} Hz) must equal Omega ({omega} Hz) for the resonant CCDD condition")]
    ModulationMismatch { omega_m: f64, omega: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unsupported resonance branch `{0}`")]
    UnsupportedBranch(String),
    #[error("step too large at t = {t:e} s: rotation angle {angle:.4} rad exceeds {limit} rad")]
    StepTooLarge { t: f64, angle: f64, limit: f64 },
    #[error("spin projection {0} outside [-1, 1]")]
    SzOutOfRange(f64),
    #[error("contrast estimator undefined: reference population {0} is not positive")]
    EstimatorUndefined(f64),
    #[error("timing violation: {0}")]
    Timing(String),
    #[error("beat frequency {beat_hz} Hz exceeds the Nyquist limit {nyquist_hz} Hz of the readout train")]
    Nyquist { beat_hz: f64, nyquist_hz: f64 },
    #[error("frequencies off the {grid_hz} Hz grid: {offending:?}")]
    GridViolation { grid_hz: f64, offending: Vec<f64> },
    #[error("component at {freq_hz} Hz exceeds half the sample rate ({sample_rate_hz} Hz)")]
    AboveNyquist { freq_hz: f64, sample_rate_hz: f64 },
    #[error("time tags are not sorted (index {0})")]
    UnsortedTags(usize),
    #[error("no peak above 3x baseline std in the search band")]
    NotDetected,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
