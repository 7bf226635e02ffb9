use std::io::{self, Write};

use nalgebra::{Complex, Matrix2, Vector3};

use super::field::FieldSource;
use crate::error::{Error, Result};
use crate::units::{BlochVector, Frame};

/// Largest rotation a single step may apply.
pub const MAX_STEP_ANGLE: f64 = 0.1;

/// Uniform time grid `t0 + k·dt`, `k = 0..=n_steps`, recording every
/// `record_every`-th point (the final point is always recorded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Self {
        TimeGrid {
            t0,
            dt,
            n_steps,
            record_every: 1,
        }
    }

    /// Grid covering `[0, t_end]` with steps no longer than `max_dt`, recording
    /// at multiples of `sample` (rounded to whole steps).
    pub fn covering(t_end: f64, max_dt: f64, sample: f64) -> Self {
        let per_sample = (sample / max_dt).ceil().max(1.0) as usize;
        let n_samples = (t_end / sample).round().max(1.0) as usize;
        TimeGrid {
            t0: 0.0,
            dt: sample / per_sample as f64,
            n_steps: n_samples * per_sample,
            record_every: per_sample,
        }
    }

    pub fn recording(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    fn records(&self, k: usize) -> bool {
        k % self.record_every == 0 || k == self.n_steps
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("dt must be positive and finite, got {}", self.dt),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub vectors: Vec<BlochVector>,
    pub frame: Frame,
}

impl BlochTrajectory {
    pub fn with_capacity(frame: Frame, n: usize) -> Self {
        BlochTrajectory {
            times: Vec::with_capacity(n),
            vectors: Vec::with_capacity(n),
            frame,
        }
    }

    pub fn push(&mut self, t: f64, v: [f64; 3]) {
        self.times.push(t);
        self.vectors.push(BlochVector::from_array(v, self.frame));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&BlochVector> {
        self.vectors.last()
    }

    pub fn z(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v.z).collect()
    }

    /// Largest pointwise distance to another trajectory sampled on the same times.
    pub fn max_deviation(&self, other: &BlochTrajectory) -> f64 {
        self.vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_s,x,y,z,frame")?;
        for (t, v) in self.times.iter().zip(&self.vectors) {
            writeln!(w, "{:e},{},{},{},{}", t, v.x, v.y, v.z, v.frame.tag())?;
        }
        Ok(())
    }
}

/// Rotates `v` about `axis` by the angle `‖axis‖` (right-handed).
#[inline]
pub fn rotate(v: Vector3<f64>, axis: Vector3<f64>) -> Vector3<f64> {
    let angle = axis.norm();
    if angle == 0.0 {
        return v;
    }
    let k = axis / angle;
    let (s, c) = angle.sin_cos();
    v * c + k.cross(&v) * s + k * (k.dot(&v) * (1.0 - c))
}

fn check_angle(angle: f64, t: f64) -> Result<()> {
    if angle < MAX_STEP_ANGLE {
        Ok(())
    } else {
        Err(Error::StepTooLarge {
            t,
            angle,
            limit: MAX_STEP_ANGLE,
        })
    }
}

fn start(sigma0: &BlochVector, grid: &TimeGrid, frame: Frame) -> Result<(Vector3<f64>, BlochTrajectory)> {
    grid.validate()?;
    let mut traj = BlochTrajectory::with_capacity(frame, grid.n_steps / grid.record_every + 2);
    let v = Vector3::new(sigma0.x, sigma0.y, sigma0.z);
    traj.push(grid.t0, [v.x, v.y, v.z]);
    Ok((v, traj))
}

/// Midpoint rotation integrator for `σ̇ = h × σ`.
pub fn propagate_rotation<F: FieldSource + ?Sized>(
    field: &F,
    sigma0: BlochVector,
    grid: TimeGrid,
) -> Result<BlochTrajectory> {
    let (mut v, mut traj) = start(&sigma0, &grid, field.frame())?;
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let h = field.field(t + 0.5 * grid.dt);
        let axis = h * grid.dt;
        check_angle(axis.norm(), t)?;
        v = rotate(v, axis);
        if grid.records(k + 1) {
            traj.push(grid.time(k + 1), [v.x, v.y, v.z]);
        }
    }
    Ok(traj)
}

const GAUSS_OFFSET: f64 = 0.211_324_865_405_187_1; // 1/2 - √3/6
const MAGNUS_COMMUTATOR: f64 = 0.144_337_567_297_406_43; // √3/12

/// Rotation vector of one fourth-order Magnus step from the two Gauss-point fields.
#[inline]
pub fn magnus4_axis(h1: Vector3<f64>, h2: Vector3<f64>, dt: f64) -> Vector3<f64> {
    (h1 + h2) * (0.5 * dt) + h2.cross(&h1) * (MAGNUS_COMMUTATOR * dt * dt)
}

/// Fourth-order Magnus rotation integrator. Same interface and step limit as
/// [`propagate_rotation`], but with two field evaluations per step and an
/// error that falls as `dt⁴`.
pub fn propagate_magnus4<F: FieldSource + ?Sized>(
    field: &F,
    sigma0: BlochVector,
    grid: TimeGrid,
) -> Result<BlochTrajectory> {
    let (mut v, mut traj) = start(&sigma0, &grid, field.frame())?;
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let h1 = field.field(t + GAUSS_OFFSET * grid.dt);
        let h2 = field.field(t + (1.0 - GAUSS_OFFSET) * grid.dt);
        check_angle(h1.norm().max(h2.norm()) * grid.dt, t)?;
        v = rotate(v, magnus4_axis(h1, h2, grid.dt));
        if grid.records(k + 1) {
            traj.push(grid.time(k + 1), [v.x, v.y, v.z]);
        }
    }
    Ok(traj)
}

type C = Complex<f64>;

fn step_unitary(h: Vector3<f64>, dt: f64) -> Matrix2<C> {
    let n = h.norm();
    if n == 0.0 {
        return Matrix2::identity();
    }
    let (s, c) = (0.5 * n * dt).sin_cos();
    let (nx, ny, nz) = (h.x / n, h.y / n, h.z / n);
    // exp(-i θ/2 n·σ) = cos(θ/2) I - i sin(θ/2) n·σ
    Matrix2::new(
        C::new(c, -s * nz),
        C::new(-s * ny, -s * nx),
        C::new(s * ny, -s * nx),
        C::new(c, s * nz),
    )
}

fn density(v: Vector3<f64>) -> Matrix2<C> {
    Matrix2::new(
        C::new(0.5 * (1.0 + v.z), 0.0),
        C::new(0.5 * v.x, -0.5 * v.y),
        C::new(0.5 * v.x, 0.5 * v.y),
        C::new(0.5 * (1.0 - v.z), 0.0),
    )
}

fn bloch(rho: &Matrix2<C>) -> [f64; 3] {
    let r01 = rho[(0, 1)];
    [2.0 * r01.re, -2.0 * r01.im, (rho[(0, 0)] - rho[(1, 1)]).re]
}

/// Reference propagator: exact 2×2 exponentiation of `½h·σ` per step with the
/// field frozen at the step midpoint, acting on the density matrix.
pub fn propagate_unitary_oracle<F: FieldSource + ?Sized>(
    field: &F,
    sigma0: BlochVector,
    grid: TimeGrid,
) -> Result<BlochTrajectory> {
    let (v, mut traj) = start(&sigma0, &grid, field.frame())?;
    let mut rho = density(v);
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let h = field.field(t + 0.5 * grid.dt);
        check_angle(h.norm() * grid.dt, t)?;
        let u = step_unitary(h, grid.dt);
        rho = u * rho * u.adjoint();
        if grid.records(k + 1) {
            traj.push(grid.time(k + 1), bloch(&rho));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::field::FieldFn;
    use std::f64::consts::{PI, TAU};

    fn up() -> BlochVector {
        BlochVector::up(Frame::DoubleRotating)
    }

    #[test]
    fn zero_field_is_identity() {
        let f = FieldFn::new(Frame::DoubleRotating, |_| Vector3::zeros());
        let grid = TimeGrid::new(0.0, 1e-9, 100);
        for traj in [
            propagate_rotation(&f, up(), grid).unwrap(),
            propagate_unitary_oracle(&f, up(), grid).unwrap(),
        ] {
            assert!(traj.vectors.iter().all(|v| v.x == 0.0 && v.y == 0.0 && (v.z - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn static_field_matches_closed_form() {
        let eps = 10e6;
        let h = Vector3::new(0.0, PI * eps, 0.0);
        let f = FieldFn::new(Frame::DoubleRotating, move |_| h);
        let grid = TimeGrid::new(0.0, 1.0 / (200.0 * 100e6), 40_000);
        let traj = propagate_rotation(&f, up(), grid).unwrap();
        for (t, v) in traj.times.iter().zip(&traj.vectors) {
            assert!((v.z - (PI * eps * t).cos()).abs() < 1e-6);
            assert!((v.x - (PI * eps * t).sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_pi_pulse_flips_spin() {
        let n = 1000;
        let t = 1e-6;
        let hx = PI / t;
        let f = FieldFn::new(Frame::Lab, move |_| Vector3::new(hx, 0.0, 0.0));
        let traj = propagate_unitary_oracle(&f, BlochVector::up(Frame::Lab), TimeGrid::new(0.0, t / n as f64, n)).unwrap();
        let v = traj.last().unwrap();
        assert!((v.z + 1.0).abs() < 1e-9 && v.x.abs() < 1e-9 && v.y.abs() < 1e-9);
    }

    #[test]
    fn step_limit_is_enforced() {
        let f = FieldFn::new(Frame::Lab, |_| Vector3::new(0.0, 0.0, TAU * 2.32e9));
        let r = propagate_rotation(&f, up(), TimeGrid::new(0.0, 1e-11, 10));
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
        assert!(propagate_unitary_oracle(&f, up(), TimeGrid::new(0.0, 1e-11, 10)).is_err());
        assert!(propagate_magnus4(&f, up(), TimeGrid::new(0.0, 1e-11, 10)).is_err());
        assert!(propagate_rotation(&f, up(), TimeGrid::new(0.0, 5e-12, 10)).is_ok());
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        let fwd = FieldFn::new(Frame::Lab, |t: f64| Vector3::new((3e8 * t).cos() * 6e7, 4e7, (1e8 * t).sin() * 5e7));
        let grid = TimeGrid::new(0.0, 1e-10, 5000);
        let s0 = BlochVector::new(0.6, 0.0, 0.8, Frame::Lab);
        let a = propagate_rotation(&fwd, s0, grid).unwrap();
        let end = grid.t_end();
        let back = FieldFn::new(Frame::Lab, move |t: f64| {
            let tt = end - t;
            -Vector3::new((3e8 * tt).cos() * 6e7, 4e7, (1e8 * tt).sin() * 5e7)
        });
        let b = propagate_rotation(&back, *a.last().unwrap(), grid).unwrap();
        assert!(b.last().unwrap().distance(&s0) < 1e-9);
    }

    #[test]
    fn magnus_converges_to_fine_reference() {
        let f = FieldFn::new(Frame::SingleRotating, |t: f64| {
            Vector3::new(TAU * 1e8 * (0.2 * (TAU * 1e8 * t).sin()).cos(), -TAU * 1e8 * (0.2 * (TAU * 1e8 * t).sin()).sin(), TAU * 3e6)
        });
        let reference = propagate_unitary_oracle(&f, up(), TimeGrid::new(0.0, 1e-12, 1_000_000)).unwrap();
        let coarse = propagate_magnus4(&f, up(), TimeGrid::new(0.0, 1e-10, 10_000)).unwrap();
        let mid = propagate_rotation(&f, up(), TimeGrid::new(0.0, 1e-10, 10_000)).unwrap();
        let r = reference.last().unwrap();
        let e4 = coarse.last().unwrap().distance(r);
        let e2 = mid.last().unwrap().distance(r);
        assert!(e4 < 1e-5, "magnus error {e4}");
        assert!(e4 < e2 / 10.0, "magnus {e4} vs midpoint {e2}");
    }

    #[test]
    fn recording_keeps_final_point() {
        let f = FieldFn::new(Frame::Lab, |_| Vector3::new(1e6, 0.0, 0.0));
        let traj = propagate_rotation(&f, up(), TimeGrid::new(0.0, 1e-9, 10).recording(3)).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert!((traj.times[4] - 1e-8).abs() < 1e-20);
        let g = TimeGrid::covering(4e-6, 5e-11, 1e-9);
        assert_eq!(g.n_steps, 80_000);
        assert_eq!(g.record_every, 20);
    }
}
