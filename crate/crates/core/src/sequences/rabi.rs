use super::engine::{Engine, TrajectoryParams};
use super::{SequenceTiming, SimulationSettings, SweepAxis, SweepResult};
use crate::error::{Error, Result};
use crate::noise::{ensemble_average, EnsembleTrace, NoiseConfig};
use crate::readout::{contrast_delta_t, population, ReadoutConfig};
use crate::units::{DriveConfig, SignalConfig};

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::Timing("pulse widths must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Timing("pulse widths must be sorted".into()));
    }
    Ok(())
}

fn ensemble_states(
    drive: &DriveConfig,
    signal: &SignalConfig,
    noise: &NoiseConfig,
    times: &[f64],
    settings: &SimulationSettings,
    components: &[usize],
) -> Result<EnsembleTrace> {
    let t_end = times.last().copied().unwrap_or(0.0);
    let engine = Engine::covering(drive, signal.omega_s, t_end, settings.step(drive));
    let failure = std::sync::Mutex::new(None);
    let trace = ensemble_average(
        |dis| match engine.evolve(&TrajectoryParams::new(*dis, signal), times) {
            Ok(states) => states
                .iter()
                .flat_map(|v| components.iter().map(move |&c| v[c]))
                .collect(),
            Err(e) => {
                *failure.lock().unwrap() = Some(e);
                vec![0.0; times.len() * components.len()]
            }
        },
        noise,
        settings.realizations,
    )?;
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Ensemble-averaged sz at each time (sorted, seconds) after starting in +z.
pub fn rabi_sz(
    drive: &DriveConfig,
    signal: &SignalConfig,
    noise: &NoiseConfig,
    times: &[f64],
    settings: &SimulationSettings,
) -> Result<EnsembleTrace> {
    check_times(times)?;
    ensemble_states(drive, signal, noise, times, settings, &[2])
}

/// Ensemble-mean Bloch vector in the frame rotating at ω₀.
pub fn ensemble_bloch(
    drive: &DriveConfig,
    signal: &SignalConfig,
    noise: &NoiseConfig,
    times: &[f64],
    settings: &SimulationSettings,
) -> Result<Vec<[f64; 3]>> {
    check_times(times)?;
    let tr = ensemble_states(drive, signal, noise, times, settings, &[0, 1, 2])?;
    Ok(tr.mean.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Length of the ensemble-mean Bloch vector, the coherence envelope of the
/// driven ensemble.
pub fn coherence_envelope(
    drive: &DriveConfig,
    signal: &SignalConfig,
    noise: &NoiseConfig,
    times: &[f64],
    settings: &SimulationSettings,
) -> Result<Vec<f64>> {
    Ok(ensemble_bloch(drive, signal, noise, times, settings)?
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .collect())
}

/// First time the envelope falls below 1/e, linearly interpolated.
pub fn decay_time(times: &[f64], envelope: &[f64]) -> Option<f64> {
    let level = (-1.0f64).exp();
    let i = envelope.iter().position(|&e| e < level)?;
    if i == 0 {
        return Some(times[0]);
    }
    let (t0, t1, e0, e1) = (times[i - 1], times[i], envelope[i - 1], envelope[i]);
    Some(t0 + (e0 - level) / (e0 - e1) * (t1 - t0))
}

/// Contrast `C_ΔT(T)` for each pulse width `T`, from ensemble-averaged sz at
/// `T` and `T + ΔT`. `std` is the ensemble standard error propagated through
/// the estimator and `n_repeats` the number of realizations.
pub fn run_rabi(
    drive: &DriveConfig,
    signal: &SignalConfig,
    noise: &NoiseConfig,
    readout: &ReadoutConfig,
    timing: &SequenceTiming,
    pulsewidths: &[f64],
    settings: &SimulationSettings,
) -> Result<SweepResult> {
    check_times(pulsewidths)?;
    if pulsewidths.is_empty() {
        return Ok(SweepResult::empty(SweepAxis::PulseWidth));
    }
    let longest = pulsewidths.last().unwrap() + timing.delta_t;
    if longest + readout.laser_init > timing.t_rep {
        return Err(Error::Timing(format!(
            "pulse of {longest:e} s plus laser {:e} s does not fit in T_rep = {:e} s",
            readout.laser_init, timing.t_rep
        )));
    }
    let mut times: Vec<(f64, usize)> = pulsewidths
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| [(t, 2 * i), (t + timing.delta_t, 2 * i + 1)])
        .collect();
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = times.iter().map(|p| p.0).collect();
    let tr = rabi_sz(drive, signal, noise, &sorted, settings)?;
    let mut sz = vec![0.0; sorted.len()];
    let mut se = vec![0.0; sorted.len()];
    for (j, &(_, slot)) in times.iter().enumerate() {
        sz[slot] = tr.mean[j];
        se[slot] = tr.std_err[j];
    }
    let k = readout.contrast_kappa * readout.mean_photons;
    let mut mean = Vec::with_capacity(pulsewidths.len());
    let mut std = Vec::with_capacity(pulsewidths.len());
    for (i, &t) in pulsewidths.iter().enumerate() {
        let td = t + timing.delta_t;
        let p1 = population(sz[2 * i].clamp(-1.0, 1.0), t, readout, noise)?;
        let p2 = population(sz[2 * i + 1].clamp(-1.0, 1.0), td, readout, noise)?;
        mean.push(contrast_delta_t(p1, p2)?);
        let d1 = k * (-t / noise.t1).exp() / p2;
        let d2 = p1 * k * (-td / noise.t1).exp() / (p2 * p2);
        std.push(((d1 * se[2 * i]).powi(2) + (d2 * se[2 * i + 1]).powi(2)).sqrt());
    }
    Ok(SweepResult {
        axis: SweepAxis::PulseWidth,
        values: pulsewidths.to_vec(),
        expected: mean.clone(),
        mean,
        std,
        n_repeats: tr.n,
        samples: Vec::new(),
        t_m: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    #[test]
    fn empty_sweep() {
        let r = run_rabi(
            &DriveConfig::default(),
            &SignalConfig::none(),
            &NoiseConfig::noiseless(),
            &ReadoutConfig::default(),
            &SequenceTiming::default(),
            &[],
            &SimulationSettings::default(),
        )
        .unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn rejects_unsorted_and_oversized() {
        let args = (
            DriveConfig::default(),
            SignalConfig::none(),
            NoiseConfig::noiseless(),
            ReadoutConfig::default(),
            SequenceTiming::default(),
        );
        let s = SimulationSettings::default().with_realizations(1);
        assert!(run_rabi(&args.0, &args.1, &args.2, &args.3, &args.4, &[2e-9, 1e-9], &s).is_err());
        assert!(matches!(
            run_rabi(&args.0, &args.1, &args.2, &args.3, &args.4, &[4e-6], &s),
            Err(Error::Timing(_))
        ));
    }

    #[test]
    fn noiseless_protected_state_stays_put() {
        // θ_m = 0 with no signal: +z is close to an eigenstate in the doubly
        // rotating frame, so sz only carries the fast Rabi oscillation.
        let drive = DriveConfig::default().with_theta(0.0);
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 2.5e-9).collect();
        let env = coherence_envelope(
            &drive,
            &SignalConfig::none(),
            &NoiseConfig::noiseless(),
            &times,
            &SimulationSettings::default().with_realizations(1),
        )
        .unwrap();
        assert!(env.iter().all(|e| (e - 1.0).abs() < 1e-9));
    }

    #[test]
    fn decay_time_interpolates() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 1e-9).collect();
        let e: Vec<f64> = t.iter().map(|t| (-t / 30e-9).exp()).collect();
        assert!((decay_time(&t, &e).unwrap() - 30e-9).abs() < 0.2e-9);
        assert_eq!(decay_time(&t, &vec![1.0; 100]), None);
    }
}
