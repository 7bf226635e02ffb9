use nalgebra::Vector3;

use super::field::{DoubleRotatingField, LabField, ResonanceBranch};
use super::propagate::{propagate_magnus4, propagate_rotation, TimeGrid, MAX_STEP_ANGLE};
use crate::units::{BlochVector, DriveConfig, Frame, SignalConfig};

/// Components of `v` in a frame rotated by `angle` about z.
#[inline]
pub fn rotate_z_inv(v: Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    Vector3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
}

/// Components of `v` in a frame rotated by `angle` about x.
#[inline]
pub fn rotate_x_inv(v: Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    Vector3::new(v.x, c * v.y + s * v.z, -s * v.y + c * v.z)
}

pub fn lab_to_single(v: &BlochVector, t: f64, drive: &DriveConfig) -> BlochVector {
    let r = rotate_z_inv(Vector3::new(v.x, v.y, v.z), drive.omega0.angular() * t);
    BlochVector::new(r.x, r.y, r.z, Frame::SingleRotating)
}

pub fn single_to_double(v: &BlochVector, t: f64, drive: &DriveConfig) -> BlochVector {
    let r = rotate_x_inv(Vector3::new(v.x, v.y, v.z), drive.omega_m.angular() * t);
    BlochVector::new(r.x, r.y, r.z, Frame::DoubleRotating)
}

pub fn lab_to_double(v: &BlochVector, t: f64, drive: &DriveConfig) -> BlochVector {
    single_to_double(&lab_to_single(v, t, drive), t, drive)
}

/// Lab-frame step: 80 steps per carrier period, shortened further if the
/// field magnitude would push a step past [`MAX_STEP_ANGLE`].
pub fn lab_step(drive: &DriveConfig, signal: &SignalConfig) -> f64 {
    let tau = std::f64::consts::TAU;
    let g = signal.g;
    let hmax = ((2.0 * (drive.omega.value() + g[0])).powi(2)
        + (2.0 * g[1]).powi(2)
        + (drive.omega0.value() + 2.0 * g[2]).powi(2))
    .sqrt()
        * tau;
    let base = 1.0 / (80.0 * drive.omega0.value().max(1.0));
    base.min(0.9 * MAX_STEP_ANGLE / hmax.max(1e-300))
}

/// Doubly rotating model step, `1/(200 Ω)` capped by the step-angle limit.
pub fn rotating_step(drive: &DriveConfig, signal: &SignalConfig) -> f64 {
    let tau = std::f64::consts::TAU;
    let scale = drive.omega.value().max(drive.epsilon_m.value()).max(1.0);
    let hmax = tau * (drive.epsilon_m.value() + 2.0 * signal.amplitude()).max(1.0);
    (1.0 / (200.0 * scale)).min(0.9 * MAX_STEP_ANGLE / hmax)
}

/// Propagates the exact lab-frame field, maps the result into the doubly
/// rotating frame and returns the largest distance to the doubly rotating
/// model (x-branch) over `[0, t_end]`, sampled every nanosecond.
pub fn lab_vs_rotating_check(drive: &DriveConfig, signal: &SignalConfig, t_end: f64) -> f64 {
    let sample = (t_end / 1000.0).min(1e-9);
    let lab_grid = TimeGrid::covering(t_end, lab_step(drive, signal), sample);
    let rot_grid = TimeGrid::covering(t_end, rotating_step(drive, signal), sample);
    let lab = propagate_magnus4(&LabField::new(drive, signal), BlochVector::up(Frame::Lab), lab_grid)
        .expect("lab step chosen below the rotation limit");
    let rot = propagate_rotation(
        &DoubleRotatingField::new(drive, signal, ResonanceBranch::X),
        BlochVector::up(Frame::DoubleRotating),
        rot_grid,
    )
    .expect("rotating step chosen below the rotation limit");
    lab.times
        .iter()
        .zip(&lab.vectors)
        .zip(&rot.vectors)
        .map(|((&t, l), r)| lab_to_double(l, t, drive).distance(r))
        .fold(0.0, f64::max)
}
