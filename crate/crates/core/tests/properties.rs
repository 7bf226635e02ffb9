use std::f64::consts::TAU;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ccdd_core::dsp::{autocorrelate, spectrum};
use ccdd_core::dynamics::{
    propagate_magnus4, propagate_rotation, propagate_unitary_oracle, rotate, DoubleRotatingField, FieldFn,
    ResonanceBranch, TimeGrid,
};
use ccdd_core::noise::{ensemble_average, sample_realization, NoiseConfig};
use ccdd_core::readout::{contrast_delta_t, population, ReadoutConfig};
use ccdd_core::sequences::{compute_sensitivity, heterodyne_trace, HeterodyneSettings, PhaseResponse, SequenceTiming, SweepAxis, SweepResult};
use ccdd_core::units::{
    field_to_rabi, rabi_to_field, BlochVector, DriveConfig, Frame, Frequency, SignalConfig, SpinSystemConstants,
};
use ccdd_core::wavegen::{
    compile_ccdd, compile_signal, full_scale, is_periodic, normalize, validate_grid, WaveformSpec,
};
use ccdd_core::Error;

fn up() -> BlochVector {
    BlochVector::up(Frame::SingleRotating)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angular_and_ordinary_differ_by_two_pi(f in -1e10f64..1e10) {
        let q = Frequency::hz(f);
        prop_assert_eq!(q.angular(), TAU * f);
        prop_assert!((Frequency::from_angular(q.angular()).value() - f).abs() <= 1e-15 * f.abs().max(1.0));
    }

    #[test]
    fn field_conversion_round_trips(log_b in -9.0f64..0.0) {
        let consts = SpinSystemConstants::default();
        let b = 10f64.powf(log_b);
        let back = rabi_to_field(field_to_rabi(b, &consts), &consts);
        prop_assert!(((back - b) / b).abs() < 1e-12);
    }

    #[test]
    fn drive_validation_is_typed(omega in 1e6f64..1e9, frac in 1.0f64..3.0, skew in 1.001f64..2.0) {
        let base = DriveConfig {
            omega: Frequency::hz(omega),
            omega_m: Frequency::hz(omega),
            epsilon_m: Frequency::hz(0.1 * omega),
            ..Default::default()
        };
        prop_assert!(base.validate().is_ok());
        let eps = DriveConfig { epsilon_m: Frequency::hz(frac * omega), ..base };
        let is_eps = matches!(eps.validate(), Err(Error::EpsilonNotBelowOmega { .. }));
        prop_assert!(is_eps);
        let wm = DriveConfig { omega_m: Frequency::hz(skew * omega), ..base };
        let is_wm = matches!(wm.validate(), Err(Error::ModulationMismatch { .. }));
        prop_assert!(is_wm);
    }

    #[test]
    fn realizations_are_pure_functions_of_seed_and_index(seed in any::<u64>(), index in any::<u64>()) {
        let cfg = NoiseConfig::default().with_seed(seed);
        prop_assert_eq!(sample_realization(&cfg, index), sample_realization(&cfg, index));
        prop_assert!(sample_realization(&cfg, index).drive_scale > 0.0);
    }

    #[test]
    fn spectrum_is_linear(a in 0.01f64..100.0, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
        let s = spectrum(&x, 1e-3);
        let sa = spectrum(&ax, 1e-3);
        for (m, ma) in s.magnitude.iter().zip(&sa.magnitude) {
            prop_assert!((ma - a * m).abs() <= 1e-9 * (a * m).max(1e-12));
        }
    }

    #[test]
    fn on_grid_tone_lands_in_its_bin(k in 1usize..2048, n_log in 12u32..15) {
        let n = 1usize << n_log;
        let dt = 2.5e-6;
        let x: Vec<f64> = (0..n).map(|i| (TAU * k as f64 * i as f64 / n as f64).cos()).collect();
        let s = spectrum(&x, dt);
        let top = s.argmax_in(0.0, 0.5 / dt).unwrap();
        prop_assert_eq!(top, k);
        prop_assert!((s.freqs[top] - k as f64 / (n as f64 * dt)).abs() < 1e-6);
    }

    #[test]
    fn on_grid_frequencies_loop_exactly(ks in prop::collection::vec(1u64..5_000_000, 1..6)) {
        let spec = WaveformSpec::default();
        let f: Vec<f64> = ks.iter().map(|&k| k as f64 * 1e3).collect();
        prop_assert!(validate_grid(&f, &spec).is_ok());
        prop_assert!(is_periodic(&f, &spec));
    }

    #[test]
    fn off_grid_frequencies_are_reported(k in 1u64..5_000_000, off in 1u64..999) {
        let spec = WaveformSpec::default();
        let f = k as f64 * 1e3 + off as f64;
        match validate_grid(&[2.32e9, f], &spec) {
            Err(Error::GridViolation { offending, .. }) => prop_assert_eq!(offending, vec![f]),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn minimum_detectable_field_falls_as_root_t_m(t_m in 0.1f64..100.0, a in 1e-9f64..1e-7) {
        // S follows shot noise, S ∝ 1/√t_m.
        let consts = SpinSystemConstants::default();
        let sweep = |t: f64| {
            let values: Vec<f64> = (0..6).map(|k| k as f64 * 1e5).collect();
            SweepResult {
                axis: SweepAxis::Amplitude,
                mean: values.iter().map(|g| a * g).collect(),
                std: vec![1e-3 / t.sqrt(); 6],
                values,
                n_repeats: 10,
                expected: Vec::new(),
                samples: Vec::new(),
                t_m: t,
            }
        };
        let r1 = compute_sensitivity(&sweep(t_m), &consts).unwrap();
        let r4 = compute_sensitivity(&sweep(4.0 * t_m), &consts).unwrap();
        prop_assert!((r1.eta.unwrap() / r4.eta.unwrap() - 1.0).abs() < 1e-9);
        prop_assert!(((r1.s / r1.slope) / (r4.s / r4.slope) - 2.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn norm_is_conserved(a in 1e6f64..1e8, b in 1e6f64..1e8, w in 1e6f64..1e8, c in -1e7f64..1e7) {
        let f = FieldFn::new(Frame::SingleRotating, move |t: f64| {
            Vector3::new(TAU * a * (TAU * w * t).cos(), TAU * b * (TAU * w * t).sin(), TAU * c)
        });
        let grid = TimeGrid::new(0.0, 1e-10, 100_000).recording(10_000);
        for traj in [
            propagate_rotation(&f, up(), grid).unwrap(),
            propagate_magnus4(&f, up(), grid).unwrap(),
        ] {
            for v in &traj.vectors {
                prop_assert!((v.norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rotation_and_unitary_propagators_agree(
        eps in 1e6f64..2e7,
        theta in 0.0f64..TAU,
        gx in 0.0f64..3e6,
        phi in 0.0f64..TAU,
        branch in 0usize..3,
    ) {
        let drive = DriveConfig { epsilon_m: Frequency::hz(eps), theta_m: theta, ..Default::default() };
        let signal = SignalConfig::new([gx, 0.5 * gx, 0.2 * gx], drive.omega0 - drive.epsilon_m, phi);
        let branch = [ResonanceBranch::X, ResonanceBranch::Y, ResonanceBranch::Z][branch];
        let field = DoubleRotatingField::new(&drive, &signal, branch);
        let grid = TimeGrid::new(0.0, 0.5e-10, 20_000).recording(500);
        let a = propagate_rotation(&field, BlochVector::up(Frame::DoubleRotating), grid).unwrap();
        let b = propagate_unitary_oracle(&field, BlochVector::up(Frame::DoubleRotating), grid).unwrap();
        prop_assert!(a.max_deviation(&b) < 1e-4);
    }

    #[test]
    fn rotation_by_h_then_minus_h_is_identity(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, k in 0.0f64..3.0) {
        let v = Vector3::new(0.3, -0.4, 0.866);
        let axis = Vector3::new(x, y, z) * k;
        let back = rotate(rotate(v, axis), -axis);
        prop_assert!((back - v).norm() < 1e-9);
    }

    #[test]
    fn noise_off_ensemble_equals_single_trajectory(n in 1usize..40) {
        let cfg = NoiseConfig::noiseless();
        let trace = |d: &ccdd_core::noise::DisorderRealization| vec![d.detuning + 0.25, d.drive_scale.sqrt()];
        let e = ensemble_average(trace, &cfg, n).unwrap();
        prop_assert_eq!(e.mean, vec![0.25, 1.0]);
    }

    #[test]
    fn delta_t_reference_cancels_t1(sz_t in -1.0f64..1.0, sz_r in -1.0f64..1.0, t in 0.0f64..2e-6) {
        let readout = ReadoutConfig::default();
        let c = |t1: f64| {
            let noise = NoiseConfig { t1, ..NoiseConfig::default() };
            let p = population(sz_t, t, &readout, &noise).unwrap();
            let pd = population(sz_r, t + 5e-9, &readout, &noise).unwrap();
            contrast_delta_t(p, pd).unwrap()
        };
        let cs: Vec<f64> = [5e-6, 10e-6, 20e-6].iter().map(|&t1| c(t1)).collect();
        prop_assert!((cs[0] - cs[2]).abs() < 1e-3);
        prop_assert!((cs[1] - cs[2]).abs() < 1e-3);
    }

    #[test]
    fn heterodyne_traces_repeat_bit_for_bit(seed in any::<u64>(), beat in -40e3f64..40e3) {
        let phases: Vec<f64> = (0..64).map(|k| TAU * k as f64 / 64.0).collect();
        let rate: Vec<f64> = phases.iter().map(|p| 1.8 + 0.02 * (2.0 * p).cos()).collect();
        let r = PhaseResponse { sz: vec![0.0; 64], contrast: vec![0.0; 64], phases, rate };
        let timing = SequenceTiming { t_rep: 2.5e-6, ..Default::default() };
        let hs = HeterodyneSettings { t_m: 0.05, seed, ..Default::default() };
        let a = heterodyne_trace(&r, Frequency::hz(beat), &timing, &hs).unwrap();
        let b = heterodyne_trace(&r, Frequency::hz(beat), &timing, &hs).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn normalized_buffers_stay_in_range(g in 0.0f64..5e6, phi in 0.0f64..TAU) {
        let spec = WaveformSpec { memory_length: 2e-6, ..Default::default() };
        let drive = DriveConfig::default();
        let timing = SequenceTiming { t_rep: 1e-6, t_mw: 0.5e-6, delta_t: 5e-9 };
        let signal = SignalConfig::x(g, Frequency::hz(2310.008e6), phi);
        let mut bufs = vec![
            compile_ccdd(&drive, &timing, &spec).unwrap(),
            compile_signal(&signal, &spec).unwrap(),
        ];
        let raw_ratio = bufs[1].peak() / bufs[0].peak();
        normalize(&mut bufs, full_scale(&drive, &signal));
        for i in 0..bufs[0].len() {
            prop_assert!((bufs[0].samples[i] + bufs[1].samples[i]).abs() <= 1.0 + 1e-12);
        }
        prop_assert!((bufs[1].peak() / bufs[0].peak() - raw_ratio).abs() <= 1e-12 * raw_ratio.max(1.0));
    }
}

#[test]
fn acf_matches_ensemble_acf_of_ar1_process() {
    use rand_distr::{Distribution, StandardNormal};
    // x_n = ρ x_{n−1} + e_n has ACF ρ^k / (1 − ρ²) for unit innovations.
    let rho: f64 = 0.6;
    let n = 4096;
    let seeds = 100;
    let mut acc = [0.0f64; 4];
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut prev: f64 = StandardNormal.sample(&mut rng);
        prev /= (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            prev = rho * prev + e;
            x.push(prev);
        }
        let a = autocorrelate(&x);
        for k in 0..4 {
            acc[k] += a[k];
        }
    }
    for (k, v) in acc.iter().enumerate() {
        let mean = v / seeds as f64;
        let want = rho.powi(k as i32) / (1.0 - rho * rho);
        assert!((mean - want).abs() < 0.03 * (1.0 / (1.0 - rho * rho)), "lag {k}: {mean} vs {want}");
    }
}

#[test]
fn nyquist_guard_rejects_fast_components() {
    let spec = WaveformSpec {
        sample_rate: 4e9,
        memory_length: 1e-6,
        ..Default::default()
    };
    assert!(matches!(
        compile_ccdd(&DriveConfig::default(), &SequenceTiming { t_rep: 1e-6, t_mw: 0.5e-6, delta_t: 5e-9 }, &spec),
        Err(Error::AboveNyquist { .. })
    ));
    assert!(matches!(
        compile_signal(&SignalConfig::x(1e6, Frequency::ghz(2.31), 0.0), &spec),
        Err(Error::AboveNyquist { .. })
    ));
}
