//! Ensemble trajectory engine in the frame rotating at ω₀.
//!
//! The nominal drive and the signal carriers depend only on time, so they are
//! tabulated once at the Gauss points of a uniform grid and shared by every
//! realization, phase and amplitude.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::dynamics::{magnus4_axis, rotate, FieldSource, SingleRotatingField, MAX_STEP_ANGLE};
use crate::error::{Error, Result};
use crate::noise::DisorderRealization;
use crate::units::{DriveConfig, Frequency, SignalConfig};

const C1: f64 = 0.211_324_865_405_187_1;
const C2: f64 = 1.0 - C1;

/// Per-trajectory parameters on top of the tabulated drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryParams {
    pub disorder: DisorderRealization,
    /// Signal amplitudes in Hz.
    pub g: [f64; 3],
    pub phi_s: f64,
}

impl TrajectoryParams {
    pub fn new(disorder: DisorderRealization, signal: &SignalConfig) -> Self {
        TrajectoryParams {
            disorder,
            g: signal.g,
            phi_s: signal.phi_s,
        }
    }
}

pub struct Engine {
    drive: DriveConfig,
    omega_s: Frequency,
    dt: f64,
    n_steps: usize,
    rabi: f64,
    // cos Φ, −sin Φ at both Gauss points
    drive_tab: Vec<[f64; 4]>,
    // cos δt, sin δt at both Gauss points
    beat_tab: Vec<[f64; 4]>,
    // cos ω_s t, sin ω_s t at both Gauss points
    z_tab: Vec<[f64; 4]>,
}

impl Engine {
    /// Tabulates `n_steps` steps of length `dt` starting at t = 0.
    pub fn new(drive: &DriveConfig, omega_s: Frequency, dt: f64, n_steps: usize) -> Self {
        let wm = drive.omega_m.angular();
        let beta = drive.beta();
        let delta = omega_s.angular() - drive.omega0.angular();
        let ws = omega_s.angular();
        let mut drive_tab = Vec::with_capacity(n_steps);
        let mut beat_tab = Vec::with_capacity(n_steps);
        let mut z_tab = Vec::with_capacity(n_steps);
        for k in 0..n_steps {
            let t0 = k as f64 * dt;
            let (t1, t2) = (t0 + C1 * dt, t0 + C2 * dt);
            let (s1, c1) = (beta * (wm * t1 - drive.theta_m).sin()).sin_cos();
            let (s2, c2) = (beta * (wm * t2 - drive.theta_m).sin()).sin_cos();
            drive_tab.push([c1, -s1, c2, -s2]);
            let (b1s, b1c) = (delta * t1).sin_cos();
            let (b2s, b2c) = (delta * t2).sin_cos();
            beat_tab.push([b1c, b1s, b2c, b2s]);
            let (z1s, z1c) = (ws * t1).sin_cos();
            let (z2s, z2c) = (ws * t2).sin_cos();
            z_tab.push([z1c, z1s, z2c, z2s]);
        }
        Engine {
            drive: *drive,
            omega_s,
            dt,
            n_steps,
            rabi: drive.omega.angular(),
            drive_tab,
            beat_tab,
            z_tab,
        }
    }

    /// Engine whose grid steps are at most `max_dt` and reach `t_end`.
    pub fn covering(drive: &DriveConfig, omega_s: Frequency, t_end: f64, max_dt: f64) -> Self {
        let n = (t_end / max_dt).ceil().max(1.0) as usize;
        Self::new(drive, omega_s, max_dt, n)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    fn check(&self, p: &TrajectoryParams) -> Result<()> {
        let g: f64 = p.g.iter().map(|v| v.abs()).sum();
        let bound = (self.rabi * p.disorder.drive_scale + TAU * (2.0 * g + p.disorder.detuning.abs())) * self.dt;
        if bound < MAX_STEP_ANGLE {
            Ok(())
        } else {
            Err(Error::StepTooLarge {
                t: 0.0,
                angle: bound,
                limit: MAX_STEP_ANGLE,
            })
        }
    }

    /// Spin state at each of `times` (sorted, within the tabulated range),
    /// starting from +z at t = 0.
    pub fn evolve(&self, p: &TrajectoryParams, times: &[f64]) -> Result<Vec<Vector3<f64>>> {
        self.check(p)?;
        if let Some(&last) = times.last() {
            if last > self.t_end() * (1.0 + 1e-12) + 1e-18 {
                return Err(Error::Timing(format!(
                    "sample time {last:e} s beyond tabulated range {:e} s",
                    self.t_end()
                )));
            }
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::Timing("sample times must be sorted and non-negative".into()));
        }
        let amp = self.rabi * p.disorder.drive_scale;
        let off = TAU * p.disorder.detuning;
        let [gx, gy, gz] = [TAU * p.g[0], TAU * p.g[1], TAU * p.g[2]];
        let (sp, cp) = p.phi_s.sin_cos();
        let field = |d: (f64, f64), b: (f64, f64), z: (f64, f64)| -> Vector3<f64> {
            let c = b.0 * cp - b.1 * sp;
            let s = b.1 * cp + b.0 * sp;
            Vector3::new(
                amp * d.0 + gx * c - gy * s,
                amp * d.1 + gx * s + gy * c,
                off + 2.0 * gz * (z.0 * cp - z.1 * sp),
            )
        };
        let remainder_field = SingleRotatingField::new(
            &self.drive,
            &SignalConfig {
                g: p.g,
                omega_s: self.omega_s,
                phi_s: p.phi_s,
            },
            p.disorder.detuning,
            p.disorder.drive_scale,
        );

        let mut out = Vec::with_capacity(times.len());
        let mut v = Vector3::new(0.0, 0.0, 1.0);
        let mut k = 0usize;
        for &t in times {
            let whole = ((t / self.dt) * (1.0 + 1e-12)).floor() as usize;
            let whole = whole.min(self.n_steps);
            while k < whole {
                let d = &self.drive_tab[k];
                let b = &self.beat_tab[k];
                let z = &self.z_tab[k];
                let h1 = field((d[0], d[1]), (b[0], b[1]), (z[0], z[1]));
                let h2 = field((d[2], d[3]), (b[2], b[3]), (z[2], z[3]));
                v = rotate(v, magnus4_axis(h1, h2, self.dt));
                k += 1;
            }
            let rem = t - k as f64 * self.dt;
            if rem > 1e-9 * self.dt {
                let t0 = k as f64 * self.dt;
                let h1 = remainder_field.field(t0 + C1 * rem);
                let h2 = remainder_field.field(t0 + C2 * rem);
                out.push(rotate(v, magnus4_axis(h1, h2, rem)));
            } else {
                out.push(v);
            }
        }
        Ok(out)
    }
}
