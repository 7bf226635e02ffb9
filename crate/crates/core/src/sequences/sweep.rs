use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{Engine, TrajectoryParams};
use super::{SequenceTiming, SimulationSettings, SweepAxis, SweepResult};
use crate::error::{Error, Result};
use crate::noise::{ensemble_average, NoiseConfig};
use crate::readout::{contrast_zero, population, sample_photon_sum, ReadoutConfig};
use crate::units::{DriveConfig, SignalConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSettings {
    /// Independent repeats per sweep point.
    pub n_repeats: usize,
    /// Readout pairs (P_T and P_0) per repeat.
    pub measurements: u64,
    pub seed: u64,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        FixedPointSettings {
            n_repeats: 10,
            measurements: 100_000,
            seed: 0,
        }
    }
}

impl FixedPointSettings {
    /// Sequence time behind one repeat: two readouts per measurement.
    pub fn t_m(&self, timing: &SequenceTiming) -> f64 {
        2.0 * self.measurements as f64 * timing.t_rep
    }
}

/// Ensemble-averaged sz at `t` for each signal. All signals must share ω_s;
/// realizations are common to every signal.
pub fn expected_sz(
    drive: &DriveConfig,
    signals: &[SignalConfig],
    noise: &NoiseConfig,
    t: f64,
    settings: &SimulationSettings,
) -> Result<Vec<f64>> {
    let Some(first) = signals.first() else {
        return Ok(Vec::new());
    };
    if signals.iter().any(|s| s.omega_s != first.omega_s) {
        return Err(Error::InvalidParameter {
            name: "signals",
            reason: "all signals of one sweep must share omega_s".into(),
        });
    }
    let engine = Engine::covering(drive, first.omega_s, t, settings.step(drive));
    let failure = std::sync::Mutex::new(None);
    let tr = ensemble_average(
        |dis| {
            signals
                .iter()
                .map(|s| match engine.evolve(&TrajectoryParams::new(*dis, s), &[t]) {
                    Ok(v) => v[0].z,
                    Err(e) => {
                        *failure.lock().unwrap() = Some(e);
                        0.0
                    }
                })
                .collect()
        },
        noise,
        settings.realizations,
    )?;
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(tr.mean),
    }
}

fn sweep_signals(template: &SignalConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SignalConfig>> {
    match axis {
        SweepAxis::Amplitude => {
            let a = template.amplitude();
            let dir = if a > 0.0 { template.g.map(|v| v / a) } else { [1.0, 0.0, 0.0] };
            values
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.is_finite() {
                        Ok(template.with_g(dir.map(|d| d * v)))
                    } else {
                        Err(Error::InvalidParameter {
                            name: "amplitude",
                            reason: format!("must be finite and non-negative, got {v}"),
                        })
                    }
                })
                .collect()
        }
        SweepAxis::Phase => Ok(values.iter().map(|&v| template.with_phase(v)).collect()),
        SweepAxis::PulseWidth => Err(Error::InvalidParameter {
            name: "axis",
            reason: "fixed-point sweeps run over amplitude or phase".into(),
        }),
    }
}

/// `C₀` at the fixed pulse width `timing.t_mw` for each sweep value.
///
/// The expected populations come from the ensemble-averaged sz; each repeat
/// then draws `measurements` readouts of the pulsed sequence and of the
/// drive-off reference (spin left in +z), both decayed over `t_mw`.
#[allow(clippy::too_many_arguments)]
pub fn run_fixed_point_sweep(
    drive: &DriveConfig,
    template: &SignalConfig,
    noise: &NoiseConfig,
    readout: &ReadoutConfig,
    timing: &SequenceTiming,
    axis: SweepAxis,
    values: &[f64],
    fps: &FixedPointSettings,
    settings: &SimulationSettings,
) -> Result<SweepResult> {
    timing.validate(readout)?;
    if fps.n_repeats == 0 || fps.measurements == 0 {
        return Err(Error::InvalidParameter {
            name: "fixed_point",
            reason: "n_repeats and measurements must be positive".into(),
        });
    }
    let signals = sweep_signals(template, axis, values)?;
    let sz = expected_sz(drive, &signals, noise, timing.t_mw, settings)?;
    let p0 = population(1.0, timing.t_mw, readout, noise)?;
    let n = fps.measurements;
    let mut result = SweepResult {
        axis,
        values: values.to_vec(),
        mean: Vec::with_capacity(values.len()),
        std: Vec::with_capacity(values.len()),
        n_repeats: fps.n_repeats,
        expected: Vec::with_capacity(values.len()),
        samples: Vec::with_capacity(values.len()),
        t_m: fps.t_m(timing),
    };
    for (i, &s) in sz.iter().enumerate() {
        let pt = population(s.clamp(-1.0, 1.0), timing.t_mw, readout, noise)?;
        result.expected.push(contrast_zero(pt, p0)?);
        let mut rng = ChaCha8Rng::seed_from_u64(fps.seed);
        rng.set_stream(i as u64);
        let reps = (0..fps.n_repeats)
            .map(|_| {
                let a = sample_photon_sum(pt, n, &mut rng) as f64 / n as f64;
                let b = sample_photon_sum(p0, n, &mut rng) as f64 / n as f64;
                contrast_zero(a, b)
            })
            .collect::<Result<Vec<f64>>>()?;
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        let sd = if reps.len() > 1 {
            (reps.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        result.mean.push(m);
        result.std.push(sd);
        result.samples.push(reps);
    }
    Ok(result)
}

/// Pulse width within `±half_window` of `target` where the ensemble Rabi
/// trace without signal has its largest excursion, sampled every 0.25 ns.
pub fn find_antinode(
    drive: &DriveConfig,
    noise: &NoiseConfig,
    target: f64,
    half_window: f64,
    settings: &SimulationSettings,
) -> Result<f64> {
    let res = 0.25e-9;
    let lo = (target - half_window).max(0.0);
    let n = ((2.0 * half_window) / res).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| lo + k as f64 * res).collect();
    let tr = super::rabi::rabi_sz(drive, &SignalConfig::none(), noise, &times, settings)?;
    let best = tr
        .mean
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| times[i])
        .ok_or_else(|| Error::Timing("empty antinode window".into()))?;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Frequency;

    fn quick() -> SimulationSettings {
        SimulationSettings::default().with_realizations(8)
    }

    #[test]
    fn zero_amplitude_gives_no_contrast_change() {
        let sig = SignalConfig::x(0.0, Frequency::hz(2.31e9), 0.0);
        let r = run_fixed_point_sweep(
            &DriveConfig::default(),
            &sig,
            &NoiseConfig::default(),
            &ReadoutConfig::default(),
            &SequenceTiming::default(),
            SweepAxis::Phase,
            &[0.0, 1.0, 2.0],
            &FixedPointSettings::default(),
            &quick(),
        )
        .unwrap();
        assert_eq!(r.expected[0], r.expected[1]);
        assert_eq!(r.expected[1], r.expected[2]);
        for i in 0..3 {
            assert!((r.mean[i] - r.expected[i]).abs() < 4.0 * r.std[i] / (r.n_repeats as f64).sqrt() + 1e-12);
        }
        assert!((r.t_m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeats_are_reproducible() {
        let sig = SignalConfig::x(1e6, Frequency::hz(2.31e9), 0.0);
        let run = || {
            run_fixed_point_sweep(
                &DriveConfig::default(),
                &sig,
                &NoiseConfig::default(),
                &ReadoutConfig::default(),
                &SequenceTiming::default(),
                SweepAxis::Amplitude,
                &[0.0, 5e5, 1e6],
                &FixedPointSettings::default(),
                &quick(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn negative_amplitude_rejected() {
        assert!(sweep_signals(&SignalConfig::none(), SweepAxis::Amplitude, &[-1.0]).is_err());
        assert!(sweep_signals(&SignalConfig::none(), SweepAxis::PulseWidth, &[1.0]).is_err());
    }
}
