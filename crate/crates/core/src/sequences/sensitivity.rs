use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::sweep::{run_fixed_point_sweep, FixedPointSettings};
use super::{SequenceTiming, SimulationSettings, SweepAxis, SweepResult};
use crate::dsp::linear_fit;
use crate::error::{Error, Result};
use crate::noise::NoiseConfig;
use crate::readout::ReadoutConfig;
use crate::units::{rabi_to_field, DriveConfig, Frequency, SignalConfig, SpinSystemConstants};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    /// Amplitude sensitivity, T/√Hz.
    pub eta: Option<f64>,
    /// Phase sensitivity, rad/√Hz.
    pub eta_phi: Option<f64>,
    /// |∂ΔC₀/∂g| per Hz of Rabi amplitude, or |∂C₀/∂φ| per radian.
    pub slope: f64,
    /// Standard deviation of one contrast measurement of duration `t_m`.
    pub s: f64,
    pub t_m: f64,
    /// Sweep values spanned by the linear fit.
    pub fit_range: (f64, f64),
}

fn curve(sweep: &SweepResult) -> &[f64] {
    if sweep.expected.len() == sweep.values.len() {
        &sweep.expected
    } else {
        &sweep.mean
    }
}

/// Index of the first interior extremum of `y` (measured from `y[0] = 0`)
/// that reaches a tenth of the largest excursion, or the last index if
/// there is none. Smaller wiggles near zero amplitude are not extrema of
/// the response.
fn first_extremum(y: &[f64]) -> usize {
    let big = y.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    (1..y.len().saturating_sub(1))
        .find(|&i| (y[i] - y[i - 1]) * (y[i + 1] - y[i]) < 0.0 && y[i].abs() >= 0.1 * big)
        .unwrap_or(y.len() - 1)
}

/// Amplitude sensitivity `η = S/|∂ΔC₀/∂g| · √t_m`, converted to tesla.
///
/// `ΔC₀` is taken relative to the first sweep point, which must be the
/// zero-amplitude reference. The slope is a least-squares line over the
/// points up to the first extremum of the (shot-noise-free when available)
/// response. `S` is the mean over the fitted non-zero amplitudes of the
/// standard deviation of `ΔC₀`: computed from paired repeats when the sweep
/// carries them, otherwise taken from `sweep.std`.
pub fn compute_sensitivity(sweep: &SweepResult, consts: &SpinSystemConstants) -> Result<SensitivityReport> {
    if sweep.axis != SweepAxis::Amplitude {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "amplitude sensitivity needs an amplitude sweep".into(),
        });
    }
    if sweep.len() < 3 || sweep.std.len() != sweep.len() {
        return Err(Error::DegenerateFit("need at least 3 points with a std each".into()));
    }
    if sweep.values[0] != 0.0 {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "the first amplitude must be the zero-signal reference".into(),
        });
    }
    let y = curve(sweep);
    let dy: Vec<f64> = y.iter().map(|v| v - y[0]).collect();
    let end = first_extremum(&dy);
    if end < 2 {
        return Err(Error::DegenerateFit("fewer than 3 points before the first extremum".into()));
    }
    let (slope, _) = linear_fit(&sweep.values[..=end], &dy[..=end]);
    if !(slope.abs() > 0.0) || !slope.is_finite() {
        return Err(Error::DegenerateFit("zero slope: signal not measurable".into()));
    }
    let paired = sweep.samples.len() == sweep.len() && sweep.samples.iter().all(|s| s.len() >= 2);
    let stds: Vec<f64> = (1..=end)
        .filter(|&i| sweep.values[i] > 0.0)
        .map(|i| {
            if paired {
                let d: Vec<f64> = sweep.samples[i].iter().zip(&sweep.samples[0]).map(|(a, b)| a - b).collect();
                let m = d.iter().sum::<f64>() / d.len() as f64;
                (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt()
            } else {
                sweep.std[i]
            }
        })
        .collect();
    let s = stds.iter().sum::<f64>() / stds.len() as f64;
    let eta_hz = s / slope.abs() * sweep.t_m.sqrt();
    Ok(SensitivityReport {
        eta: Some(rabi_to_field(Frequency::hz(eta_hz), consts)),
        eta_phi: None,
        slope: slope.abs(),
        s,
        t_m: sweep.t_m,
        fit_range: (sweep.values[0], sweep.values[end]),
    })
}

/// Largest |dR/dφ| of a least-squares Fourier series (up to 4 harmonics)
/// through the phase response.
fn max_phase_slope(phases: &[f64], y: &[f64]) -> Result<f64> {
    let n = phases.len();
    let k = 4.min((n - 1) / 2);
    if k == 0 {
        return Err(Error::DegenerateFit("need at least 3 phases".into()));
    }
    let cols = 1 + 2 * k;
    let a = DMatrix::from_fn(n, cols, |i, j| {
        if j == 0 {
            1.0
        } else {
            let h = ((j + 1) / 2) as f64;
            if j % 2 == 1 {
                (h * phases[i]).cos()
            } else {
                (h * phases[i]).sin()
            }
        }
    });
    let b = DVector::from_column_slice(y);
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let grid = 1440;
    let best = (0..grid)
        .map(|g| {
            let p = TAU * g as f64 / grid as f64;
            (1..=k)
                .map(|h| {
                    let hf = h as f64;
                    hf * (coef[2 * h] * (hf * p).cos() - coef[2 * h - 1] * (hf * p).sin())
                })
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max);
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    if !(best > 1e-12 * scale) {
        return Err(Error::DegenerateFit("flat phase response".into()));
    }
    Ok(best)
}

/// Phase sensitivity `η_φ = S/max|∂C₀/∂φ| · √t_m` from a phase sweep.
pub fn compute_phase_sensitivity(sweep: &SweepResult) -> Result<SensitivityReport> {
    if sweep.axis != SweepAxis::Phase {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "phase sensitivity needs a phase sweep".into(),
        });
    }
    if sweep.len() < 3 || sweep.std.len() != sweep.len() {
        return Err(Error::DegenerateFit("need at least 3 points with a std each".into()));
    }
    let slope = max_phase_slope(&sweep.values, curve(sweep))?;
    let s = sweep.std.iter().sum::<f64>() / sweep.len() as f64;
    Ok(SensitivityReport {
        eta: None,
        eta_phi: Some(s / slope * sweep.t_m.sqrt()),
        slope,
        s,
        t_m: sweep.t_m,
        fit_range: (sweep.values[0], *sweep.values.last().unwrap()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSensitivityCurve {
    /// Signal amplitudes, Hz.
    pub amplitudes: Vec<f64>,
    /// η_φ per amplitude, rad/√Hz; infinite where the response is flat.
    pub eta_phi: Vec<f64>,
    pub best_amplitude: f64,
    pub best_eta_phi: f64,
    pub t_m: f64,
}

/// η_φ as a function of signal amplitude, each from a phase sweep over
/// `n_phases` points in `[0, 2π)`.
#[allow(clippy::too_many_arguments)]
pub fn compute_phase_sensitivity_curve(
    drive: &DriveConfig,
    template: &SignalConfig,
    noise: &NoiseConfig,
    readout: &ReadoutConfig,
    timing: &SequenceTiming,
    amplitudes: &[f64],
    n_phases: usize,
    fps: &FixedPointSettings,
    settings: &SimulationSettings,
) -> Result<PhaseSensitivityCurve> {
    let phases: Vec<f64> = (0..n_phases).map(|k| TAU * k as f64 / n_phases as f64).collect();
    let a = template.amplitude();
    let dir = if a > 0.0 { template.g.map(|v| v / a) } else { [1.0, 0.0, 0.0] };
    let mut eta_phi = Vec::with_capacity(amplitudes.len());
    for &g in amplitudes {
        let sig = template.with_g(dir.map(|d| d * g));
        let sweep = run_fixed_point_sweep(drive, &sig, noise, readout, timing, SweepAxis::Phase, &phases, fps, settings)?;
        eta_phi.push(match compute_phase_sensitivity(&sweep) {
            Ok(r) => r.eta_phi.unwrap(),
            Err(Error::DegenerateFit(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        });
    }
    let (bi, best) = eta_phi
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .ok_or_else(|| Error::DegenerateFit("no amplitudes".into()))?;
    Ok(PhaseSensitivityCurve {
        amplitudes: amplitudes.to_vec(),
        eta_phi,
        best_amplitude: amplitudes[bi],
        best_eta_phi: best,
        t_m: fps.t_m(timing),
    })
}
