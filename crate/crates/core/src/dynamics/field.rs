use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::units::{DriveConfig, Frame, SignalConfig};

/// Instantaneous field `h` of `H = ½ h·σ`, angular units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    pub t: f64,
}

impl FieldVector {
    pub fn from_vec(h: Vector3<f64>, t: f64) -> Self {
        FieldVector {
            hx: h.x,
            hy: h.y,
            hz: h.z,
            t,
        }
    }

    pub fn to_vec(self) -> Vector3<f64> {
        Vector3::new(self.hx, self.hy, self.hz)
    }
}

/// Anything that yields a field at time `t`.
pub trait FieldSource: Sync {
    fn field(&self, t: f64) -> Vector3<f64>;
    fn frame(&self) -> Frame;
}

/// Wraps a closure as a [`FieldSource`].
pub struct FieldFn<F> {
    pub f: F,
    pub frame: Frame,
}

impl<F> FieldFn<F>
where
    F: Fn(f64) -> Vector3<f64> + Sync,
{
    pub fn new(frame: Frame, f: F) -> Self {
        FieldFn { f, frame }
    }
}

impl<F> FieldSource for FieldFn<F>
where
    F: Fn(f64) -> Vector3<f64> + Sync,
{
    fn field(&self, t: f64) -> Vector3<f64> {
        (self.f)(t)
    }
    fn frame(&self) -> Frame {
        self.frame
    }
}

/// Sensor resonance kept by the doubly rotating model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResonanceBranch {
    X,
    Y,
    Z,
}

impl FromStr for ResonanceBranch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(ResonanceBranch::X),
            "y" => Ok(ResonanceBranch::Y),
            "z" => Ok(ResonanceBranch::Z),
            other => Err(Error::UnsupportedBranch(other.to_string())),
        }
    }
}

/// Lab-frame field of the drive plus signal.
///
/// `H = ½ω₀σz + Ω cos(ω₀t − β sin(ω_m t − θ_m))σx + (g·σ) cos(ω_s t + φ_s)`,
/// so the σx coefficient Ω maps to `h_x = 2Ω`.
pub fn lab_field(drive: &DriveConfig, signal: &SignalConfig, t: f64) -> FieldVector {
    FieldVector::from_vec(LabField::new(drive, signal).field(t), t)
}

#[derive(Debug, Clone, Copy)]
pub struct LabField {
    w0: f64,
    rabi: f64,
    wm: f64,
    beta: f64,
    theta: f64,
    g: Vector3<f64>,
    ws: f64,
    phi: f64,
}

impl LabField {
    pub fn new(drive: &DriveConfig, signal: &SignalConfig) -> Self {
        LabField {
            w0: drive.omega0.angular(),
            rabi: drive.omega.angular(),
            wm: drive.omega_m.angular(),
            beta: drive.beta(),
            theta: drive.theta_m,
            g: Vector3::from(signal.g) * std::f64::consts::TAU,
            ws: signal.omega_s.angular(),
            phi: signal.phi_s,
        }
    }
}

impl FieldSource for LabField {
    fn field(&self, t: f64) -> Vector3<f64> {
        let carrier = (self.w0 * t - self.beta * (self.wm * t - self.theta).sin()).cos();
        let s = 2.0 * (self.ws * t + self.phi).cos();
        Vector3::new(
            2.0 * self.rabi * carrier + self.g.x * s,
            self.g.y * s,
            self.w0 + self.g.z * s,
        )
    }
    fn frame(&self) -> Frame {
        Frame::Lab
    }
}

/// Doubly rotating frame field in the rotating wave approximation.
///
/// The static part is `ε_m (0, sin θ_m, cos θ_m)`, i.e. a σ'' coefficient of
/// ε_m/2; the spin precesses about it at ε_m.
pub fn double_rot_field(
    drive: &DriveConfig,
    signal: &SignalConfig,
    t: f64,
    branch: ResonanceBranch,
) -> FieldVector {
    FieldVector::from_vec(DoubleRotatingField::new(drive, signal, branch).field(t), t)
}

#[derive(Debug, Clone, Copy)]
pub struct DoubleRotatingField {
    stat: Vector3<f64>,
    g: Vector3<f64>,
    detuning: f64,
    z_detuning: f64,
    phi: f64,
    branch: ResonanceBranch,
}

impl DoubleRotatingField {
    pub fn new(drive: &DriveConfig, signal: &SignalConfig, branch: ResonanceBranch) -> Self {
        let eps = drive.epsilon_m.angular();
        DoubleRotatingField {
            stat: Vector3::new(0.0, eps * drive.theta_m.sin(), eps * drive.theta_m.cos()),
            g: Vector3::from(signal.g) * std::f64::consts::TAU,
            detuning: signal.omega_s.angular() - drive.omega0.angular(),
            z_detuning: signal.omega_s.angular() - drive.omega_m.angular(),
            phi: signal.phi_s,
            branch,
        }
    }
}

impl FieldSource for DoubleRotatingField {
    fn field(&self, t: f64) -> Vector3<f64> {
        let mut h = self.stat;
        match self.branch {
            ResonanceBranch::X => h.x += self.g.x * (self.detuning * t + self.phi).cos(),
            ResonanceBranch::Y => h.y -= self.g.y * (self.detuning * t + self.phi).sin(),
            ResonanceBranch::Z => {
                let (s, c) = (self.z_detuning * t + self.phi).sin_cos();
                h.z += self.g.z * (c - s);
            }
        }
        h
    }
    fn frame(&self) -> Frame {
        Frame::DoubleRotating
    }
}

/// Field in the frame rotating at ω₀ about z, keeping only co-rotating terms
/// of the transverse fields. The phase modulation is kept exactly.
///
/// `detuning_hz` is a static z offset and `drive_scale` multiplies the whole
/// drive amplitude, as produced by a disorder realization.
#[derive(Debug, Clone, Copy)]
pub struct SingleRotatingField {
    rabi: f64,
    wm: f64,
    beta: f64,
    theta: f64,
    g: Vector3<f64>,
    detuning: f64,
    ws: f64,
    phi: f64,
    offset: f64,
}

impl SingleRotatingField {
    pub fn new(drive: &DriveConfig, signal: &SignalConfig, detuning_hz: f64, drive_scale: f64) -> Self {
        SingleRotatingField {
            rabi: drive.omega.angular() * drive_scale,
            wm: drive.omega_m.angular(),
            beta: drive.beta(),
            theta: drive.theta_m,
            g: Vector3::from(signal.g) * std::f64::consts::TAU,
            detuning: signal.omega_s.angular() - drive.omega0.angular(),
            ws: signal.omega_s.angular(),
            phi: signal.phi_s,
            offset: std::f64::consts::TAU * detuning_hz,
        }
    }
}

impl FieldSource for SingleRotatingField {
    fn field(&self, t: f64) -> Vector3<f64> {
        let (sp, cp) = (self.beta * (self.wm * t - self.theta).sin()).sin_cos();
        let (sd, cd) = (self.detuning * t + self.phi).sin_cos();
        let zs = 2.0 * (self.ws * t + self.phi).cos();
        Vector3::new(
            self.rabi * cp + self.g.x * cd - self.g.y * sd,
            -self.rabi * sp + self.g.x * sd + self.g.y * cd,
            self.offset + self.g.z * zs,
        )
    }
    fn frame(&self) -> Frame {
        Frame::SingleRotating
    }
}
