//! Executes a configuration. Every artifact is built in memory first and
//! written only after the whole run succeeded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use ccdd_core::dsp::{acf_spectrum, direct_spectrum, fit_peak, snr_scaling_fit, spectrum, PeakFit, SpectrumResult};
use ccdd_core::dynamics::{propagate_rotation, resonance_map, rotating_step, DoubleRotatingField, TimeGrid};
use ccdd_core::readout::{contrast_zero, population};
use ccdd_core::sequences::{
    beat_frequency, clock_frequency, compute_phase_sensitivity, compute_phase_sensitivity_curve, compute_sensitivity,
    expected_sz, find_antinode, heterodyne_trace, phase_response_curve, run_fixed_point_sweep, run_heterodyne,
    run_rabi, SequenceTiming, SweepAxis, SweepResult,
};
use ccdd_core::units::{field_to_rabi, rabi_to_field, BlochVector, Frame, Frequency, SignalConfig, SpinSystemConstants};
use ccdd_core::wavegen::validate_grid;

use crate::config::{AmplitudeUnit, ExperimentConfig, Kind};
use crate::error::CliError;
use crate::plot::{render, Panel, Series};

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub results: Value,
}

struct Out<'a> {
    hash: &'a str,
    plots: bool,
    artifacts: Vec<Artifact>,
}

impl Out<'_> {
    fn csv(&mut self, name: &str, header: &str, rows: Vec<String>) {
        let mut s = format!("# config_hash={}\n{header}\n", self.hash);
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        self.push(name, s.into_bytes());
    }

    fn json(&mut self, name: &str, value: &Value) {
        let mut v = value.clone();
        if let Value::Object(m) = &mut v {
            m.insert("config_hash".into(), Value::String(self.hash.to_string()));
        }
        let mut bytes = serde_json::to_vec_pretty(&v).expect("json serializes");
        bytes.push(b'\n');
        self.push(name, bytes);
    }

    fn svg(&mut self, name: &str, panels: &[Panel], cols: usize) {
        if self.plots {
            let doc = render(panels, cols, &format!("config_hash={}", self.hash));
            self.push(name, doc.into_bytes());
        }
    }

    fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes,
        });
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("value serializes")
}

/// Checks everything that can be checked without simulating.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_schema()?;
    let drive = cfg.drive()?;
    drive.validate()?;
    let signal = cfg.signal()?;
    signal.validate()?;
    if let Some(n) = cfg.noise {
        n.validate()?;
    }
    if let Some(r) = cfg.readout {
        r.validate()?;
        if let Some(t) = cfg.timing {
            t.validate(&r)?;
        }
    }
    if let Some(spec) = &cfg.wavegen {
        spec.validate()?;
        validate_grid(&[drive.omega0.value(), drive.omega_m.value(), signal.omega_s.value()], spec)?;
    }
    if let Some(h) = &cfg.heterodyne {
        if let Some(clock) = h.clock_hz {
            let model = clock_frequency(&drive).value();
            if (clock - model).abs() > 1e-3 {
                return Err(CliError::Physics(ccdd_core::Error::InvalidParameter {
                    name: "heterodyne.clock_hz",
                    reason: format!("drive sets the clock to {model} Hz, config expects {clock} Hz"),
                }));
            }
        }
        let t_rep = cfg.timing()?.t_rep;
        ccdd_core::sequences::check_nyquist(beat_frequency(&drive, &signal), t_rep)?;
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, plots: bool) -> Result<RunOutput, CliError> {
    validate(cfg)?;
    let hash = cfg.hash();
    let mut out = Out {
        hash: &hash,
        plots,
        artifacts: Vec::new(),
    };
    let results = match cfg.kind {
        Kind::Rabi => rabi(cfg, &mut out)?,
        Kind::AmpSweep | Kind::PhaseSweep | Kind::Sensitivity => sweep(cfg, &mut out)?,
        Kind::PhaseSensitivity => phase_sensitivity(cfg, &mut out)?,
        Kind::Heterodyne => heterodyne(cfg, &mut out)?,
        Kind::SnrScaling => snr_scaling(cfg, &mut out)?,
        Kind::Resonances => resonances(cfg, &mut out)?,
        Kind::Bloch => bloch(cfg, &mut out)?,
    };
    let mut config_json = cfg.to_json().into_bytes();
    config_json.push(b'\n');
    out.artifacts.insert(
        0,
        Artifact {
            name: "config.json".into(),
            bytes: config_json,
        },
    );
    Ok(RunOutput {
        artifacts: out.artifacts,
        results,
    })
}

fn phase_label(p: f64) -> String {
    format!("phi_{:.4}", p)
}

fn rabi(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, CliError> {
    let (drive, signal, noise, readout, timing, settings) = (
        cfg.drive()?,
        cfg.signal()?,
        cfg.noise()?,
        cfg.readout()?,
        cfg.timing()?,
        cfg.simulation()?,
    );
    let params = cfg.rabi.as_ref().expect("checked by schema");
    let pw = params.pulse_widths.resolve();
    let phases = if params.phases.is_empty() {
        vec![signal.phi_s]
    } else {
        params.phases.clone()
    };
    let mut columns: Vec<(String, SweepResult)> = Vec::new();
    if params.reference_without_signal {
        let sw = run_rabi(&drive, &signal.with_g([0.0; 3]), &noise, &readout, &timing, &pw, &settings)?;
        columns.push(("no_signal".into(), sw));
    }
    for &p in &phases {
        let sw = run_rabi(&drive, &signal.with_phase(p), &noise, &readout, &timing, &pw, &settings)?;
        columns.push((phase_label(p), sw));
    }

    let header = std::iter::once("pulse_width_s".to_string())
        .chain(columns.iter().flat_map(|(l, _)| [format!("c_{l}"), format!("std_{l}")]))
        .collect::<Vec<_>>()
        .join(",");
    let rows = (0..pw.len())
        .map(|i| {
            let mut r = format!("{}", pw[i]);
            for (_, sw) in &columns {
                let _ = write!(r, ",{},{}", sw.mean[i], sw.std[i]);
            }
            r
        })
        .collect();
    out.csv("rabi.csv", &header, rows);

    let step = params.pulse_widths.step;
    let spectra: Vec<SpectrumResult> = columns
        .iter()
        .map(|(_, sw)| {
            let m = sw.mean.iter().sum::<f64>() / sw.len() as f64;
            spectrum(&sw.mean.iter().map(|v| v - m).collect::<Vec<_>>(), step)
        })
        .collect();
    let header = std::iter::once("f_hz".to_string())
        .chain(columns.iter().map(|(l, _)| format!("mag_{l}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = (0..spectra[0].freqs.len())
        .map(|k| {
            let mut r = format!("{}", spectra[0].freqs[k]);
            for s in &spectra {
                let _ = write!(r, ",{}", s.magnitude[k]);
            }
            r
        })
        .collect();
    out.csv("rabi_fft.csv", &header, rows);

    let f_max = 2.0 * (drive.omega.value() + drive.epsilon_m.value());
    let peaks: Vec<Value> = columns
        .iter()
        .zip(&spectra)
        .map(|((l, _), s)| {
            let k = s.argmax_in(s.resolution(), f_max).unwrap_or(0);
            json!({"series": l, "dominant_hz": s.freqs[k], "magnitude": s.magnitude[k]})
        })
        .collect();
    let results = json!({
        "pulse_widths": pw.len(),
        "fft_resolution_hz": spectra[0].resolution(),
        "dominant_components": peaks,
    });
    out.json("rabi_summary.json", &results);

    let mut trace = Panel::new("CCDD Rabi", "pulse width (ns)", "C_ΔT");
    let mut fft = Panel::new("Rabi FFT", "frequency (MHz)", "|FFT|");
    for ((l, sw), s) in columns.iter().zip(&spectra) {
        trace = trace.with(Series::line(l, pw.iter().map(|t| t * 1e9).collect(), sw.mean.clone()));
        let keep: Vec<usize> = (0..s.freqs.len()).filter(|&k| s.freqs[k] <= f_max).collect();
        fft = fft.with(Series::line(
            l,
            keep.iter().map(|&k| s.freqs[k] / 1e6).collect(),
            keep.iter().map(|&k| s.magnitude[k]).collect(),
        ));
    }
    out.svg("rabi.svg", &[trace, fft], 2);
    Ok(results)
}

fn fixed_pulse(cfg: &ExperimentConfig, use_antinode: bool) -> Result<SequenceTiming, CliError> {
    let mut timing = cfg.timing()?;
    if use_antinode {
        timing.t_mw = find_antinode(&cfg.drive()?, &cfg.noise()?, timing.t_mw, 50e-9, &cfg.simulation()?)?;
        timing.validate(&cfg.readout()?)?;
    }
    Ok(timing)
}

fn amplitudes_hz(values: &[f64], unit: AmplitudeUnit, consts: &SpinSystemConstants) -> Vec<f64> {
    match unit {
        AmplitudeUnit::Hz => values.to_vec(),
        AmplitudeUnit::Tesla => values.iter().map(|&b| field_to_rabi(b, consts).value()).collect(),
    }
}

fn sweep(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, CliError> {
    let consts = SpinSystemConstants::default();
    let params = cfg.sweep.as_ref().expect("checked by schema");
    let timing = fixed_pulse(cfg, params.antinode)?;
    let mut fps = params.fixed_point;
    fps.seed = cfg.sub_seed(1);
    let raw = params.values.resolve();
    let (axis, values) = match cfg.kind {
        Kind::PhaseSweep => (SweepAxis::Phase, raw.clone()),
        _ => (SweepAxis::Amplitude, amplitudes_hz(&raw, params.unit, &consts)),
    };
    let sw = run_fixed_point_sweep(
        &cfg.drive()?,
        &cfg.signal()?,
        &cfg.noise()?,
        &cfg.readout()?,
        &timing,
        axis,
        &values,
        &fps,
        &cfg.simulation()?,
    )?;
    let is_amp = axis == SweepAxis::Amplitude;
    let header = if is_amp {
        "g_hz,field_t,mean_c0,std_c0,expected_c0"
    } else {
        "phi_rad,mean_c0,std_c0,expected_c0"
    };
    let rows = (0..sw.len())
        .map(|i| {
            if is_amp {
                let b = rabi_to_field(Frequency::hz(sw.values[i]), &consts);
                format!("{},{},{},{},{}", sw.values[i], b, sw.mean[i], sw.std[i], sw.expected[i])
            } else {
                format!("{},{},{},{}", sw.values[i], sw.mean[i], sw.std[i], sw.expected[i])
            }
        })
        .collect();
    out.csv("sweep.csv", header, rows);

    let mut results = json!({
        "t_mw_s": timing.t_mw,
        "t_m_s": sw.t_m,
        "points": sw.len(),
    });
    match cfg.kind {
        Kind::Sensitivity => {
            let r = compute_sensitivity(&sw, &consts)?;
            results["eta"] = to_value(&r.eta);
            results["eta_phi"] = to_value(&r.eta_phi);
            results["slope"] = to_value(&r.slope);
            results["S"] = to_value(&r.s);
            results["t_m"] = to_value(&r.t_m);
            results["fit_range_hz"] = to_value(&r.fit_range);
            out.json("sensitivity.json", &results);
        }
        Kind::PhaseSweep => {
            let eta_phi = compute_phase_sensitivity(&sw).ok().and_then(|r| r.eta_phi);
            results["eta_phi_rad_per_sqrt_hz"] = to_value(&eta_phi);
            out.json("sweep_summary.json", &results);
        }
        _ => out.json("sweep_summary.json", &results),
    }

    let (xs, label) = if is_amp {
        (
            sw.values.iter().map(|&g| rabi_to_field(Frequency::hz(g), &consts) * 1e6).collect::<Vec<_>>(),
            "signal amplitude (μT)",
        )
    } else {
        (sw.values.clone(), "signal phase (rad)")
    };
    let panel = Panel::new("fixed-point sweep", label, "C₀")
        .with(Series::scatter("measured", xs.clone(), sw.mean.clone()))
        .with(Series::line("expected", xs, sw.expected.clone()));
    out.svg("sweep.svg", &[panel], 1);
    Ok(results)
}

fn phase_sensitivity(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, CliError> {
    let consts = SpinSystemConstants::default();
    let params = cfg.sweep.as_ref().expect("checked by schema");
    let timing = fixed_pulse(cfg, params.antinode)?;
    let mut fps = params.fixed_point;
    fps.seed = cfg.sub_seed(1);
    let amps = amplitudes_hz(&params.values.resolve(), params.unit, &consts);
    let c = compute_phase_sensitivity_curve(
        &cfg.drive()?,
        &cfg.signal()?,
        &cfg.noise()?,
        &cfg.readout()?,
        &timing,
        &amps,
        params.phase_points,
        &fps,
        &cfg.simulation()?,
    )?;
    let field = |g: f64| rabi_to_field(Frequency::hz(g), &consts);
    let rows = c
        .amplitudes
        .iter()
        .zip(&c.eta_phi)
        .map(|(g, e)| format!("{},{},{}", g, field(*g), e))
        .collect();
    out.csv("phase_sensitivity.csv", "g_hz,field_t,eta_phi_rad_per_sqrt_hz", rows);
    let results = json!({
        "t_mw_s": timing.t_mw,
        "t_m_s": c.t_m,
        "best_amplitude_hz": c.best_amplitude,
        "best_field_t": field(c.best_amplitude),
        "best_eta_phi_rad_per_sqrt_hz": c.best_eta_phi,
    });
    out.json("phase_sensitivity.json", &results);
    let finite: Vec<usize> = (0..c.eta_phi.len()).filter(|&i| c.eta_phi[i].is_finite()).collect();
    let mut panel = Panel::new("phase sensitivity", "signal amplitude (μT)", "η_φ (rad/√Hz)").with(Series::scatter(
        "η_φ",
        finite.iter().map(|&i| field(c.amplitudes[i]) * 1e6).collect(),
        finite.iter().map(|&i| c.eta_phi[i]).collect(),
    ));
    panel.log_y = true;
    out.svg("phase_sensitivity.svg", &[panel], 1);
    Ok(results)
}

fn band(beat: Frequency, half: f64) -> (f64, f64) {
    let tone = 2.0 * beat.value().abs();
    ((tone - half).max(0.0), tone + half)
}

fn peak_report(p: &Option<PeakFit>, method: &str) -> Value {
    match p {
        Some(p) => json!({
            "f0_hz": p.f0,
            "fwhm_hz": p.fwhm,
            "snr": p.snr,
            "baseline_std": p.baseline_std,
            "height": p.height,
            "method": method,
        }),
        None => json!({"f0_hz": null, "fwhm_hz": null, "snr": null, "baseline_std": null, "method": method}),
    }
}

fn spectrum_rows(s: &SpectrumResult, (lo, hi): (f64, f64)) -> Vec<String> {
    s.freqs
        .iter()
        .zip(&s.magnitude)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(f, m)| format!("{f},{m}"))
        .collect()
}

fn heterodyne(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, CliError> {
    let params = cfg.heterodyne.as_ref().expect("checked by schema");
    let timing = fixed_pulse(cfg, params.antinode)?;
    let (drive, signal) = (cfg.drive()?, cfg.signal()?);
    let mut hs = params.settings;
    hs.seed = cfg.sub_seed(2);
    let (trace, response) = run_heterodyne(
        &drive,
        &signal,
        &cfg.noise()?,
        &cfg.readout()?,
        &timing,
        &hs,
        &cfg.simulation()?,
    )?;
    let beat = beat_frequency(&drive, &signal);
    let s = acf_spectrum(&trace);
    let b = band(beat, params.band_hz);
    let peak = fit_peak(&s, b).ok();

    let rows = (0..response.phases.len())
        .map(|i| {
            format!(
                "{},{},{},{}",
                response.phases[i], response.sz[i], response.rate[i], response.contrast[i]
            )
        })
        .collect();
    out.csv("phase_response.csv", "phi_rad,sz,rate,contrast", rows);
    out.csv("spectrum.csv", "f_hz,magnitude", spectrum_rows(&s, b));
    if params.write_trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        let text = String::from_utf8(buf).expect("ascii csv");
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().to_string();
        out.csv("trace.csv", &header, lines.map(str::to_string).collect());
    }
    let mut results = peak_report(&peak, "autocorrelation");
    let extra = json!({
        "clock_hz": clock_frequency(&drive).value(),
        "beat_hz": beat.value(),
        "expected_tone_hz": 2.0 * beat.value().abs(),
        "readouts": trace.len(),
        "photons": trace.total(),
        "t_mw_s": timing.t_mw,
        "t_m_s": hs.t_m,
        "fft_resolution_hz": s.resolution(),
        "detected": peak.is_some(),
    });
    if let (Value::Object(r), Value::Object(e)) = (&mut results, extra) {
        r.extend(e);
    }
    out.json("peak.json", &results);

    let idx: Vec<usize> = (0..s.freqs.len()).filter(|&k| s.freqs[k] >= b.0 && s.freqs[k] <= b.1).collect();
    let mut sp = Panel::new("autocorrelation spectrum", "frequency (Hz)", "magnitude").with(Series::line(
        "ACF FFT",
        idx.iter().map(|&k| s.freqs[k]).collect(),
        idx.iter().map(|&k| s.magnitude[k]).collect(),
    ));
    if let Some(p) = &peak {
        sp.markers.push((p.f0, format!("{:.3} Hz", p.f0)));
    }
    let rp = Panel::new("phase response", "signal phase (rad)", "photons per readout").with(Series::line(
        "R(φ)",
        response.phases.clone(),
        response.rate.clone(),
    ));
    out.svg("heterodyne.svg", &[sp, rp], 2);
    Ok(results)
}

fn snr_scaling(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, CliError> {
    let params = cfg.heterodyne.as_ref().expect("checked by schema");
    let snr = cfg.snr.as_ref().expect("checked by schema");
    let timing = fixed_pulse(cfg, params.antinode)?;
    let (drive, signal) = (cfg.drive()?, cfg.signal()?);
    let beat = beat_frequency(&drive, &signal);
    let response = phase_response_curve(
        &drive,
        &signal,
        &cfg.noise()?,
        &cfg.readout()?,
        timing.t_mw,
        params.settings.phase_points,
        &cfg.simulation()?,
    )?;
    let b = band(beat, params.band_hz);
    let mut with_acf = Vec::new();
    let mut without = Vec::new();
    let mut rows = Vec::new();
    for &t_m in &snr.t_m {
        let (mut a, mut d) = (0.0, 0.0);
        for r in 0..snr.runs {
            let hs = ccdd_core::sequences::HeterodyneSettings {
                t_m,
                seed: cfg.sub_seed(2 + r as u64),
                ..params.settings
            };
            let trace = heterodyne_trace(&response, beat, &timing, &hs)?;
            a += fit_peak(&acf_spectrum(&trace), b).map(|p| p.snr).unwrap_or(0.0);
            d += fit_peak(&direct_spectrum(&trace), b).map(|p| p.snr).unwrap_or(0.0);
        }
        let n = snr.runs as f64;
        rows.push(format!("{},{},{}", t_m, a / n, d / n));
        with_acf.push((t_m, a / n));
        without.push((t_m, d / n));
    }
    out.csv("snr.csv", "t_m_s,snr_acf,snr_direct", rows);
    let results = json!({
        "beat_hz": beat.value(),
        "runs_per_point": snr.runs,
        "exponent_acf": snr_scaling_fit(&with_acf).ok(),
        "exponent_direct": snr_scaling_fit(&without).ok(),
    });
    out.json("snr.json", &results);
    let split = |v: &[(f64, f64)]| (v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.1).collect());
    let (xa, ya) = split(&with_acf);
    let (xd, yd) = split(&without);
    let mut panel = Panel::new("SNR scaling", "t_m (s)", "SNR")
        .with(Series::scatter("autocorrelation", xa, ya))
        .with(Series::scatter("direct", xd, yd));
    panel.log_x = true;
    panel.log_y = true;
    out.svg("snr.svg", &[panel], 1);
    Ok(results)
}

fn resonances(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, CliError> {
    let (drive, signal, noise, readout, timing, settings) = (
        cfg.drive()?,
        cfg.signal()?,
        cfg.noise()?,
        cfg.readout()?,
        cfg.timing()?,
        cfg.simulation()?,
    );
    let freqs = cfg.resonances.as_ref().expect("checked by schema").frequencies.resolve();
    let p0 = population(1.0, timing.t_mw, &readout, &noise)?;
    let mut rows = Vec::new();
    let mut c0 = Vec::new();
    for &f in &freqs {
        let s = SignalConfig {
            omega_s: Frequency::hz(f),
            ..signal
        };
        let sz = expected_sz(&drive, &[s], &noise, timing.t_mw, &settings)?[0];
        let c = contrast_zero(population(sz.clamp(-1.0, 1.0), timing.t_mw, &readout, &noise)?, p0)?;
        rows.push(format!("{f},{sz},{c}"));
        c0.push(c);
    }
    out.csv("resonances.csv", "omega_s_hz,sz,c0", rows);
    let map = resonance_map(&drive);
    let results = json!({
        "t_mw_s": timing.t_mw,
        "xy_resonances_hz": map.xy_resonances,
        "z_resonances_hz": map.z_resonances,
    });
    out.json("resonances.json", &results);
    let lo = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut panel = Panel::new("sensor resonances", "signal frequency (MHz)", "C₀")
        .with(Series::line("C₀", freqs.iter().map(|f| f / 1e6).collect(), c0));
    for r in map.xy_resonances.iter().map(|r| r.value()).filter(|r| (lo..=hi).contains(r)) {
        panel.markers.push((r / 1e6, format!("{:.0}", r / 1e6)));
    }
    out.svg("resonances.svg", &[panel], 1);
    Ok(results)
}

fn bloch(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, CliError> {
    let (drive, signal) = (cfg.drive()?, cfg.signal()?);
    let params = cfg.bloch.as_ref().expect("checked by schema");
    let phases = if params.phases.is_empty() {
        vec![signal.phi_s]
    } else {
        params.phases.clone()
    };
    let sample = params.t_end / params.samples as f64;
    let mut trajectories = Vec::new();
    for &p in &phases {
        let s = signal.with_phase(p);
        let field = DoubleRotatingField::new(&drive, &s, params.branch);
        let grid = TimeGrid::covering(params.t_end, rotating_step(&drive, &s), sample);
        let tr = propagate_rotation(&field, BlochVector::up(Frame::DoubleRotating), grid)?;
        let mut buf = Vec::new();
        tr.write_csv(&mut buf)?;
        let text = String::from_utf8(buf).expect("ascii csv");
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().to_string();
        out.csv(&format!("bloch_{}.csv", phase_label(p)), &header, lines.map(str::to_string).collect());
        trajectories.push((phase_label(p), tr));
    }
    let finals: Vec<Value> = trajectories
        .iter()
        .map(|(l, tr)| {
            let v = tr.last().expect("non-empty trajectory");
            json!({"series": l, "final": [v.x, v.y, v.z]})
        })
        .collect();
    let results = json!({"frame": "double_rotating", "trajectories": finals});
    out.json("bloch_summary.json", &results);

    let proj = |title: &str, a: usize, b: usize, la: &str, lb: &str| {
        let mut p = Panel::new(title, la, lb);
        for (l, tr) in &trajectories {
            let c = |v: &BlochVector, k: usize| [v.x, v.y, v.z][k];
            p = p.with(Series::line(
                l,
                tr.vectors.iter().map(|v| c(v, a)).collect(),
                tr.vectors.iter().map(|v| c(v, b)).collect(),
            ));
        }
        p
    };
    let mut zt = Panel::new("z(t)", "t (ns)", "z");
    for (l, tr) in &trajectories {
        zt = zt.with(Series::line(l, tr.times.iter().map(|t| t * 1e9).collect(), tr.z()));
    }
    out.svg(
        "bloch.svg",
        &[proj("x–y", 0, 1, "x", "y"), proj("x–z", 0, 2, "x", "z"), proj("y–z", 1, 2, "y", "z"), zt],
        2,
    );
    Ok(results)
}

/// Output directory: `CCDD_SENSE_OUT`, then the config, then `out/<kind>`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(d) = std::env::var_os("CCDD_SENSE_OUT").filter(|d| !d.is_empty()) {
        return PathBuf::from(d);
    }
    cfg.output_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("out/{}", cfg.kind)))
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    for a in artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

/// Runs and writes, returning the manifest echoed to stdout.
pub fn execute(cfg: &ExperimentConfig, plots: bool) -> Result<Value, CliError> {
    let start = Instant::now();
    let result = run(cfg, plots)?;
    let dir = output_dir(cfg);
    write_artifacts(&dir, &result.artifacts)?;
    Ok(json!({
        "config_hash": cfg.hash(),
        "kind": cfg.kind.name(),
        "seed": cfg.seed,
        "versions": {"ccdd-core": ccdd_core::VERSION, "ccdd-cli": env!("CARGO_PKG_VERSION")},
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "output_dir": dir.display().to_string(),
        "files": result.artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "results": result.results,
    }))
}

fn embedded_hash(name: &str, text: &str) -> Option<String> {
    if name.ends_with(".csv") {
        text.lines().next()?.strip_prefix("# config_hash=").map(str::to_string)
    } else if name.ends_with(".json") {
        let v: Value = serde_json::from_str(text).ok()?;
        v.get("config_hash")?.as_str().map(str::to_string)
    } else if name.ends_with(".svg") {
        let i = text.find("config_hash=")? + "config_hash=".len();
        Some(text[i..].chars().take_while(|c| c.is_ascii_hexdigit()).collect())
    } else {
        None
    }
}

/// Recomputes the hash of `config.json` in `dir` and checks every output
/// file against it. Returns the files checked.
pub fn verify(dir: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(dir.join("config.json"))?;
    let hash = ExperimentConfig::parse(&text, &[])?.hash();
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "config.json")
        .collect();
    names.sort();
    let mut checked = Vec::new();
    for n in names {
        let Ok(text) = fs::read_to_string(dir.join(&n)) else {
            continue;
        };
        let Some(found) = embedded_hash(&n, &text) else {
            continue;
        };
        if found != hash {
            return Err(CliError::Runtime(format!(
                "{n}: config hash {found} does not match config.json ({hash})"
            )));
        }
        checked.push(n);
    }
    Ok(checked)
}
