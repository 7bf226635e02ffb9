//! Sweeps the fractional drive-amplitude noise and prints the ensemble
//! coherence decay times of the bare Rabi drive, the unprotected CCDD drive
//! and the CCDD drive with a resonant 2 MHz signal.
//!
//! cargo run --release -p ccdd-core --example calibrate_drive_noise -- [sigma ...]

use std::f64::consts::FRAC_PI_2;

use ccdd_core::noise::NoiseConfig;
use ccdd_core::sequences::{clock_frequency, coherence_envelope, decay_time, SimulationSettings};
use ccdd_core::units::{DriveConfig, Frequency, SignalConfig};

fn decay(drive: &DriveConfig, signal: &SignalConfig, noise: &NoiseConfig, t_end: f64, dt: f64) -> Option<f64> {
    let times: Vec<f64> = (1..=(t_end / dt).round() as usize).map(|k| k as f64 * dt).collect();
    let settings = SimulationSettings::default().with_realizations(256);
    let env = coherence_envelope(drive, signal, noise, &times, &settings).expect("valid configuration");
    decay_time(&times, &env)
}

fn fmt(t: Option<f64>) -> String {
    t.map_or("> window".into(), |t| format!("{:.1} ns", t * 1e9))
}

fn main() {
    let sigmas: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("sigma must be a number"))
        .collect();
    let sigmas = if sigmas.is_empty() {
        vec![0.0, 0.001, 0.002, 0.003, 0.005, 0.01, 0.02]
    } else {
        sigmas
    };
    let ccdd = DriveConfig::default().with_theta(FRAC_PI_2);
    let bare = DriveConfig {
        epsilon_m: Frequency::ZERO,
        ..ccdd
    };
    let signal = SignalConfig::x(2e6, clock_frequency(&ccdd), 0.0);
    println!("sigma,bare_rabi,ccdd,ccdd_with_signal");
    for s in sigmas {
        let noise = NoiseConfig {
            drive_frac_sigma: s,
            ..NoiseConfig::default()
        };
        println!(
            "{s},{},{},{}",
            fmt(decay(&bare, &SignalConfig::none(), &noise, 2e-6, 0.5e-9)),
            fmt(decay(&ccdd, &SignalConfig::none(), &noise, 4e-6, 1e-9)),
            fmt(decay(&ccdd, &signal, &noise, 4e-6, 1e-9)),
        );
    }
}
