use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::expected_sz;
use super::{SequenceTiming, SimulationSettings};
use crate::dsp::PhotonTrace;
use crate::error::{Error, Result};
use crate::noise::NoiseConfig;
use crate::readout::{population, sample_photons, ReadoutConfig};
use crate::units::{DriveConfig, Frequency, SignalConfig};
use crate::wavegen::{validate_grid, WaveformSpec};

const BLOCK: usize = 1 << 16;

/// The double-dressed resonance `ω₀ − ε_m` that serves as the clock.
pub fn clock_frequency(drive: &DriveConfig) -> Frequency {
    drive.omega0 - drive.epsilon_m
}

/// Signal detuning from the clock, `δ = ω_s − (ω₀ − ε_m)`.
pub fn beat_frequency(drive: &DriveConfig, signal: &SignalConfig) -> Frequency {
    signal.omega_s - clock_frequency(drive)
}

/// Ensemble-averaged sensor response to a clock-resonant signal as a
/// function of its phase, on a uniform grid over `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseResponse {
    pub phases: Vec<f64>,
    pub sz: Vec<f64>,
    /// Expected photons per readout.
    pub rate: Vec<f64>,
    /// `C₀(φ)` against the drive-off reference.
    pub contrast: Vec<f64>,
}

impl PhaseResponse {
    fn interp(&self, v: &[f64], phi: f64) -> f64 {
        let n = v.len();
        let x = phi.rem_euclid(TAU) / TAU * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let f = x - i as f64;
        v[i] * (1.0 - f) + v[(i + 1) % n] * f
    }

    pub fn sz_at(&self, phi: f64) -> f64 {
        self.interp(&self.sz, phi)
    }

    pub fn rate_at(&self, phi: f64) -> f64 {
        self.interp(&self.rate, phi)
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .contrast
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
        hi - lo
    }
}

/// Response at `n_phases ≥ 64` phases for the amplitude and direction of
/// `signal`, with the signal placed on the clock resonance.
pub fn phase_response_curve(
    drive: &DriveConfig,
    signal: &SignalConfig,
    noise: &NoiseConfig,
    readout: &ReadoutConfig,
    t_mw: f64,
    n_phases: usize,
    settings: &SimulationSettings,
) -> Result<PhaseResponse> {
    if n_phases < 64 {
        return Err(Error::InvalidParameter {
            name: "n_phases",
            reason: format!("need at least 64 grid points, got {n_phases}"),
        });
    }
    let template = SignalConfig {
        omega_s: clock_frequency(drive),
        ..*signal
    };
    let phases: Vec<f64> = (0..n_phases).map(|k| TAU * k as f64 / n_phases as f64).collect();
    let signals: Vec<SignalConfig> = phases.iter().map(|&p| template.with_phase(p)).collect();
    let sz = expected_sz(drive, &signals, noise, t_mw, settings)?;
    let p0 = population(1.0, t_mw, readout, noise)?;
    let rate = sz
        .iter()
        .map(|&s| population(s.clamp(-1.0, 1.0), t_mw, readout, noise))
        .collect::<Result<Vec<f64>>>()?;
    let contrast = rate.iter().map(|r| (r - p0) / p0).collect();
    Ok(PhaseResponse {
        phases,
        sz,
        rate,
        contrast,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeterodyneSettings {
    /// Signal phase at the first readout.
    #[serde(default)]
    pub phi0: f64,
    /// Total measurement time, a whole number of repetitions.
    pub t_m: f64,
    #[serde(default)]
    pub seed: u64,
    /// Reject frequencies off this waveform grid when set.
    #[serde(default)]
    pub grid: Option<WaveformSpec>,
    #[serde(default = "default_phase_points")]
    pub phase_points: usize,
}

fn default_phase_points() -> usize {
    256
}

impl Default for HeterodyneSettings {
    fn default() -> Self {
        HeterodyneSettings {
            phi0: 0.0,
            t_m: 10.0,
            seed: 0,
            grid: None,
            phase_points: default_phase_points(),
        }
    }
}

/// Readouts in `t_m`, or a timing error when `t_m` is not a whole number of
/// repetitions.
fn readout_count(t_m: f64, t_rep: f64) -> Result<usize> {
    let n = t_m / t_rep;
    let r = n.round();
    if !(r >= 1.0) || (n - r).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::Timing(format!("t_m = {t_m} s is not a whole number of T_rep = {t_rep} s")));
    }
    Ok(r as usize)
}

/// Checks the beat against the Nyquist limit of the photon trace. The
/// response cycles twice per signal period, so the tone sits at `2|δ|`
/// and must stay below `1/(2·T_rep)`.
pub fn check_nyquist(beat: Frequency, t_rep: f64) -> Result<()> {
    let nyquist = 0.5 / t_rep;
    let tone = 2.0 * beat.value().abs();
    if !(tone < nyquist) {
        return Err(Error::Nyquist {
            beat_hz: tone,
            nyquist_hz: nyquist,
        });
    }
    Ok(())
}

/// Photon stream for a signal detuned by `beat` from the clock, read out
/// from a precomputed phase response. Readout `n` sees the phase
/// `φ₀ + 2π·δ·n·T_rep`.
pub fn heterodyne_trace(
    response: &PhaseResponse,
    beat: Frequency,
    timing: &SequenceTiming,
    hs: &HeterodyneSettings,
) -> Result<PhotonTrace> {
    check_nyquist(beat, timing.t_rep)?;
    let n = readout_count(hs.t_m, timing.t_rep)?;
    let step = beat.value() * timing.t_rep;
    let mut counts = vec![0u32; n];
    counts.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(hs.seed);
        rng.set_stream(b as u64);
        let start = b * BLOCK;
        for (k, c) in chunk.iter_mut().enumerate() {
            let cycles = (step * (start + k) as f64).fract();
            *c = sample_photons(response.rate_at(hs.phi0 + TAU * cycles), &mut rng) as u32;
        }
    });
    Ok(PhotonTrace {
        counts,
        dt: timing.t_rep,
        t0: 0.0,
    })
}

/// Full heterodyne run: validates timing, Nyquist and (optionally) the
/// waveform grid, builds the phase response, then samples the photon
/// stream.
pub fn run_heterodyne(
    drive: &DriveConfig,
    signal: &SignalConfig,
    noise: &NoiseConfig,
    readout: &ReadoutConfig,
    timing: &SequenceTiming,
    hs: &HeterodyneSettings,
    settings: &SimulationSettings,
) -> Result<(PhotonTrace, PhaseResponse)> {
    timing.validate(readout)?;
    let beat = beat_frequency(drive, signal);
    check_nyquist(beat, timing.t_rep)?;
    readout_count(hs.t_m, timing.t_rep)?;
    if let Some(spec) = &hs.grid {
        validate_grid(
            &[
                drive.omega0.value(),
                drive.omega.value(),
                drive.epsilon_m.value(),
                drive.omega_m.value(),
                signal.omega_s.value(),
            ],
            spec,
        )?;
    }
    let response = phase_response_curve(drive, signal, noise, readout, timing.t_mw, hs.phase_points, settings)?;
    let trace = heterodyne_trace(&response, beat, timing, hs)?;
    Ok((trace, response))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_response(n: usize) -> PhaseResponse {
        let phases: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        let sz: Vec<f64> = phases.iter().map(|p| 0.5 * (2.0 * p).cos()).collect();
        let rate: Vec<f64> = sz.iter().map(|s| 1.8 * (1.0 + 0.02 * s)).collect();
        let contrast = sz.iter().map(|s| 0.02 * (s - 1.0) / 1.02).collect();
        PhaseResponse {
            phases,
            sz,
            rate,
            contrast,
        }
    }

    #[test]
    fn clock_and_beat() {
        let d = DriveConfig::default();
        assert_eq!(clock_frequency(&d).value(), 2.31e9);
        let s = SignalConfig::x(2e6, Frequency::hz(2_310_008_000.0), 0.0);
        assert!((beat_frequency(&d, &s).value() - 8e3).abs() < 1e-3);
    }

    #[test]
    fn interpolation_is_periodic_and_exact_at_nodes() {
        let r = synthetic_response(64);
        assert_eq!(r.sz_at(r.phases[5]), r.sz[5]);
        assert!((r.sz_at(TAU + 0.3) - r.sz_at(0.3)).abs() < 1e-12);
        assert!((r.sz_at(-0.01) - r.sz_at(TAU - 0.01)).abs() < 1e-12);
    }

    #[test]
    fn nyquist_and_timing_errors() {
        let t = SequenceTiming {
            t_rep: 2.5e-6,
            ..Default::default()
        };
        let r = synthetic_response(64);
        let hs = HeterodyneSettings {
            t_m: 1e-3,
            ..Default::default()
        };
        assert!(heterodyne_trace(&r, Frequency::khz(50.0), &t, &hs).is_ok());
        assert!(matches!(
            heterodyne_trace(&r, Frequency::khz(100.0), &t, &hs),
            Err(Error::Nyquist { .. })
        ));
        let bad = HeterodyneSettings { t_m: 1.0001e-3 + 1e-7, ..hs };
        assert!(matches!(heterodyne_trace(&r, Frequency::khz(8.0), &t, &bad), Err(Error::Timing(_))));
    }

    #[test]
    fn trace_is_deterministic_and_zero_beat_is_flat() {
        let t = SequenceTiming {
            t_rep: 2.5e-6,
            ..Default::default()
        };
        let r = synthetic_response(64);
        let hs = HeterodyneSettings {
            t_m: 0.5,
            seed: 4,
            ..Default::default()
        };
        let a = heterodyne_trace(&r, Frequency::khz(8.0), &t, &hs).unwrap();
        let b = heterodyne_trace(&r, Frequency::khz(8.0), &t, &hs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200_000);
        let z = heterodyne_trace(&r, Frequency::ZERO, &t, &hs).unwrap();
        let mean = z.total() as f64 / z.len() as f64;
        assert!((mean - r.rate[0]).abs() < 5.0 * (r.rate[0] / z.len() as f64).sqrt());
    }
}
