//! Ready-made configurations for the published measurements.

use std::f64::consts::FRAC_PI_2;

use ccdd_core::dynamics::ResonanceBranch;
use ccdd_core::noise::NoiseConfig;
use ccdd_core::readout::ReadoutConfig;
use ccdd_core::sequences::{FixedPointSettings, HeterodyneSettings, SequenceTiming, SimulationSettings};
use ccdd_core::units::{DriveConfig, Frequency, SignalConfig};
use ccdd_core::wavegen::WaveformSpec;

use crate::config::{
    AmplitudeUnit, BlochParams, ExperimentConfig, HeterodyneParams, Kind, PulseWidths, RabiParams, SnrParams,
    SweepParams, Values,
};

pub const NAMES: [&str; 8] = ["fig2a", "fig2e", "fig3a", "fig3d", "fig4c", "fig4d", "si-fig3", "si-fig6"];

const CLOCK_HZ: f64 = 2310e6;

fn base(kind: Kind, name: &str, theta_m: f64, g_x: f64, omega_s: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.output_dir = Some(format!("out/{name}"));
    cfg.drive = Some(DriveConfig::default().with_theta(theta_m));
    cfg.signal = Some(SignalConfig::x(g_x, Frequency::hz(omega_s), 0.0));
    cfg.noise = Some(NoiseConfig::default());
    cfg.readout = Some(ReadoutConfig::default());
    cfg.timing = Some(SequenceTiming::default());
    cfg.simulation = Some(SimulationSettings::default());
    cfg
}

fn rabi(name: &str, theta_m: f64, omega_s: f64, stop: f64, step: f64, timing: SequenceTiming) -> ExperimentConfig {
    let mut cfg = base(Kind::Rabi, name, theta_m, 2e6, omega_s);
    cfg.timing = Some(timing);
    cfg.rabi = Some(RabiParams {
        pulse_widths: PulseWidths { start: 0.0, stop, step },
        phases: vec![0.0, FRAC_PI_2],
        reference_without_signal: true,
    });
    cfg
}

fn long_rabi_timing() -> SequenceTiming {
    // A 4 μs record plus the 2 μs laser needs a longer repetition.
    SequenceTiming {
        t_rep: 10e-6,
        ..SequenceTiming::default()
    }
}

fn heterodyne_base(kind: Kind, name: &str) -> ExperimentConfig {
    let mut cfg = base(kind, name, FRAC_PI_2, 0.98e6, 2310.008e6);
    cfg.timing = Some(SequenceTiming {
        t_rep: 2.5e-6,
        ..SequenceTiming::default()
    });
    cfg.readout = Some(ReadoutConfig {
        laser_init: 1.5e-6,
        ..ReadoutConfig::default()
    });
    cfg.wavegen = Some(WaveformSpec::default());
    cfg.heterodyne = Some(HeterodyneParams {
        settings: HeterodyneSettings {
            t_m: 10.0,
            grid: Some(WaveformSpec::default()),
            ..HeterodyneSettings::default()
        },
        clock_hz: Some(CLOCK_HZ),
        band_hz: 500.0,
        write_trace: false,
        antinode: true,
    });
    cfg
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "fig2a" => rabi(name, FRAC_PI_2, CLOCK_HZ, 4e-6, 1e-9, long_rabi_timing()),
        "fig2e" => rabi(name, 0.0, CLOCK_HZ, 4e-6, 1e-9, long_rabi_timing()),
        "fig3a" => {
            let mut cfg = base(Kind::AmpSweep, name, FRAC_PI_2, 0.0, CLOCK_HZ);
            cfg.sweep = Some(SweepParams {
                values: Values::Range {
                    start: 0.0,
                    stop: 4e6,
                    points: 21,
                },
                unit: AmplitudeUnit::Hz,
                fixed_point: FixedPointSettings::default(),
                antinode: true,
                phase_points: 32,
            });
            cfg
        }
        "fig3d" => {
            let mut cfg = base(Kind::PhaseSensitivity, name, FRAC_PI_2, 1e6, CLOCK_HZ);
            cfg.sweep = Some(SweepParams {
                values: Values::List(vec![15e-6, 20e-6, 25e-6, 30e-6, 35e-6, 40e-6, 50e-6, 60e-6]),
                unit: AmplitudeUnit::Tesla,
                fixed_point: FixedPointSettings::default(),
                antinode: true,
                phase_points: 32,
            });
            cfg
        }
        "fig4c" => heterodyne_base(Kind::Heterodyne, name),
        "fig4d" => {
            let mut cfg = heterodyne_base(Kind::SnrScaling, name);
            if let Some(h) = cfg.heterodyne.as_mut() {
                h.band_hz = 200.0;
            }
            cfg.snr = Some(SnrParams {
                t_m: vec![0.5, 1.0, 2.0, 5.0, 10.0],
                runs: 3,
            });
            cfg
        }
        "si-fig3" => rabi(name, FRAC_PI_2, 2230e6, 4e-6, 1e-9, long_rabi_timing()),
        "si-fig6" => rabi(
            name,
            FRAC_PI_2,
            CLOCK_HZ,
            1e-6,
            0.5e-9,
            // T_MW ≈ 1/(ε_m − g_x) with a shortened repetition.
            SequenceTiming {
                t_mw: 125e-9,
                delta_t: 5e-9,
                t_rep: 3.2e-6,
            },
        ),
        _ => return None,
    };
    Some(cfg)
}

pub fn presets() -> Vec<(&'static str, ExperimentConfig)> {
    NAMES.iter().map(|&n| (n, preset(n).expect("known preset"))).collect()
}

/// A short noiseless Bloch run; not one of the published figures.
pub fn bloch_example() -> ExperimentConfig {
    let mut cfg = base(Kind::Bloch, "bloch", FRAC_PI_2, 2.5e6, CLOCK_HZ);
    cfg.noise = None;
    cfg.readout = None;
    cfg.timing = None;
    cfg.simulation = None;
    cfg.bloch = Some(BlochParams {
        t_end: 2e-6,
        samples: 2000,
        branch: ResonanceBranch::X,
        phases: vec![0.0, FRAC_PI_2],
    });
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_the_schema() {
        for (name, cfg) in presets() {
            let back = ExperimentConfig::parse(&cfg.to_json(), &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(back, cfg, "{name}");
        }
        assert!(preset("fig9").is_none());
    }

    #[test]
    fn heterodyne_preset_matches_the_measurement() {
        let cfg = preset("fig4c").unwrap();
        assert_eq!(cfg.signal.unwrap().omega_s.value(), 2310.008e6);
        let h = cfg.heterodyne.unwrap();
        assert_eq!(h.clock_hz, Some(2310e6));
        assert_eq!(h.settings.t_m, 10.0);
        let d = cfg.drive.unwrap();
        assert_eq!(d.omega0.value() - d.epsilon_m.value(), 2310e6);
    }

    #[test]
    fn phase_sensitivity_preset_brackets_35_microtesla() {
        let s = preset("fig3d").unwrap().sweep.unwrap();
        assert_eq!(s.unit, AmplitudeUnit::Tesla);
        let v = s.values.resolve();
        assert!(v.contains(&35e-6));
        assert!(v[0] < 35e-6 && *v.last().unwrap() > 35e-6);
    }
}
