//! Value types shared by every module.
//!
//! Configuration carries ordinary frequencies in Hz. Propagators work in
//! angular units, reached through [`Frequency::angular`].

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frequency(f64);

impl Frequency {
    pub const ZERO: Frequency = Frequency(0.0);

    pub const fn hz(v: f64) -> Self {
        Frequency(v)
    }
    pub fn khz(v: f64) -> Self {
        Frequency(v * 1e3)
    }
    pub fn mhz(v: f64) -> Self {
        Frequency(v * 1e6)
    }
    pub fn ghz(v: f64) -> Self {
        Frequency(v * 1e9)
    }
    pub fn from_angular(w: f64) -> Self {
        Frequency(w / TAU)
    }
    pub const fn value(self) -> f64 {
        self.0
    }
    /// Angular frequency in rad/s.
    pub fn angular(self) -> f64 {
        TAU * self.0
    }
    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.0)
    }
}

impl std::ops::Add for Frequency {
    type Output = Frequency;
    fn add(self, o: Frequency) -> Frequency {
        Frequency(self.0 + o.0)
    }
}

impl std::ops::Sub for Frequency {
    type Output = Frequency;
    fn sub(self, o: Frequency) -> Frequency {
        Frequency(self.0 - o.0)
    }
}

impl std::ops::Mul<f64> for Frequency {
    type Output = Frequency;
    fn mul(self, k: f64) -> Frequency {
        Frequency(self.0 * k)
    }
}

/// Parameters of the phase-modulated CCDD drive
/// `Ω cos(ω₀t − (2ε_m/Ω) sin(ω_m t − θ_m)) σx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Spin transition frequency ω₀.
    pub omega0: Frequency,
    /// First drive amplitude Ω.
    #[serde(alias = "Omega")]
    pub omega: Frequency,
    /// Second drive amplitude ε_m.
    pub epsilon_m: Frequency,
    /// Modulation frequency ω_m.
    pub omega_m: Frequency,
    pub theta_m: f64,
    /// Instrument phase offset, only added when synthesising AWG buffers.
    #[serde(default = "default_phase_offset")]
    pub phase_offset: f64,
}

fn default_phase_offset() -> f64 {
    0.07 * PI
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            omega0: Frequency::hz(2.32e9),
            omega: Frequency::hz(100e6),
            epsilon_m: Frequency::hz(10e6),
            omega_m: Frequency::hz(100e6),
            theta_m: PI / 2.0,
            phase_offset: default_phase_offset(),
        }
    }
}

impl DriveConfig {
    pub fn with_theta(mut self, theta_m: f64) -> Self {
        self.theta_m = theta_m;
        self
    }

    /// Modulation index β = 2ε_m/Ω.
    pub fn beta(&self) -> f64 {
        if self.omega.value() == 0.0 {
            0.0
        } else {
            2.0 * self.epsilon_m.value() / self.omega.value()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega0, self.omega, self.epsilon_m, self.omega_m]
            .iter()
            .all(|f| f.is_finite())
            && self.theta_m.is_finite()
            && self.phase_offset.is_finite();
        if !finite {
            return Err(Error::InvalidParameter {
                name: "drive",
                reason: "non-finite value".into(),
            });
        }
        for (name, f) in [("omega0", self.omega0), ("Omega", self.omega), ("omega_m", self.omega_m)] {
            if f.value() <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {f}"),
                });
            }
        }
        if self.epsilon_m.value() < 0.0 {
            return Err(Error::InvalidParameter {
                name: "epsilon_m",
                reason: "must be non-negative".into(),
            });
        }
        if self.epsilon_m.value() >= self.omega.value() {
            return Err(Error::EpsilonNotBelowOmega {
                epsilon_m: self.epsilon_m.value(),
                omega: self.omega.value(),
            });
        }
        if (self.omega_m.value() - self.omega.value()).abs() > 1e-9 * self.omega.value() {
            return Err(Error::ModulationMismatch {
                omega_m: self.omega_m.value(),
                omega: self.omega.value(),
            });
        }
        Ok(())
    }

    /// True when ε_m/Ω is large enough that the doubly rotating model is questionable.
    pub fn rwa_flagged(&self) -> bool {
        self.epsilon_m.value() / self.omega.value() > 0.3
    }
}

/// Signal `(g_x σx + g_y σy + g_z σz) cos(ω_s t + φ_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    /// Rabi amplitudes (g_x, g_y, g_z) in Hz.
    pub g: [f64; 3],
    pub omega_s: Frequency,
    pub phi_s: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            g: [0.0; 3],
            omega_s: Frequency::hz(2.31e9),
            phi_s: 0.0,
        }
    }
}

impl SignalConfig {
    pub fn new(g: [f64; 3], omega_s: Frequency, phi_s: f64) -> Self {
        SignalConfig {
            g,
            omega_s,
            phi_s: phi_s.rem_euclid(TAU),
        }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn x(g_x: f64, omega_s: Frequency, phi_s: f64) -> Self {
        Self::new([g_x, 0.0, 0.0], omega_s, phi_s)
    }

    pub fn with_phase(mut self, phi_s: f64) -> Self {
        self.phi_s = phi_s.rem_euclid(TAU);
        self
    }

    pub fn with_g(mut self, g: [f64; 3]) -> Self {
        self.g = g;
        self
    }

    pub fn amplitude(&self) -> f64 {
        let [a, b, c] = self.g;
        (a * a + b * b + c * c).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.g.iter().all(|&v| v == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: format!("components must be finite and non-negative, got {:?}", self.g),
            });
        }
        if !self.omega_s.is_finite() || self.omega_s.value() < 0.0 || !self.phi_s.is_finite() {
            return Err(Error::InvalidParameter {
                name: "signal",
                reason: "omega_s must be finite and non-negative, phi_s finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Lab,
    SingleRotating,
    DoubleRotating,
}

impl Frame {
    pub fn tag(self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::SingleRotating => "single_rotating",
            Frame::DoubleRotating => "double_rotating",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub frame: Frame,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64, frame: Frame) -> Self {
        BlochVector { x, y, z, frame }
    }

    /// Spin polarised along +z, the optically initialised state.
    pub fn up(frame: Frame) -> Self {
        Self::new(0.0, 0.0, 1.0, frame)
    }

    pub fn from_array(v: [f64; 3], frame: Frame) -> Self {
        Self::new(v[0], v[1], v[2], frame)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Tesla.
pub type Tesla = f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemConstants {
    /// Zero-field splitting.
    pub d: Frequency,
    /// Strain splitting.
    pub e: Frequency,
    /// Gyromagnetic ratio in Hz/T.
    pub gamma_e: f64,
    pub bz: Tesla,
}

impl Default for SpinSystemConstants {
    fn default() -> Self {
        SpinSystemConstants {
            d: Frequency::hz(3.5e9),
            e: Frequency::hz(59e6),
            gamma_e: 28.025e9,
            bz: 0.207,
        }
    }
}

impl SpinSystemConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_e > 0.0 && self.gamma_e.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma_e",
                reason: "must be positive".into(),
            });
        }
        if self.d.value() <= self.e.value() {
            return Err(Error::InvalidParameter {
                name: "D",
                reason: "zero-field splitting must exceed strain splitting".into(),
            });
        }
        Ok(())
    }
}

/// m_s = 0 ↔ −1 gap, |D − E − γ_e·Bz|.
pub fn transition_frequency(consts: &SpinSystemConstants) -> Frequency {
    Frequency::hz((consts.d.value() - consts.e.value() - consts.gamma_e * consts.bz).abs())
}

pub fn field_to_rabi(b: Tesla, consts: &SpinSystemConstants) -> Frequency {
    Frequency::hz(consts.gamma_e * b)
}

pub fn rabi_to_field(g: Frequency, consts: &SpinSystemConstants) -> Tesla {
    g.value() / consts.gamma_e
}
