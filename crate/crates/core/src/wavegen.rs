//! Arbitrary waveform generator emulation: the gated phase-modulated CCDD
//! carrier and the continuous signal tone, sampled on a looping memory
//! window whose frequencies must sit on a fixed grid.

use std::f64::consts::TAU;
use std::io::{self, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::SequenceTiming;
use crate::units::{DriveConfig, SignalConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformSpec {
    pub sample_rate: f64,
    pub memory_length: f64,
    pub freq_grid: f64,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        WaveformSpec {
            sample_rate: 25e9,
            memory_length: 1e-3,
            freq_grid: 1e3,
        }
    }
}

impl WaveformSpec {
    /// Samples in one memory window.
    pub fn len(&self) -> usize {
        (self.memory_length * self.sample_rate).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sample_rate", self.sample_rate),
            ("memory_length", self.memory_length),
            ("freq_grid", self.freq_grid),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        let n = self.memory_length * self.sample_rate;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::InvalidParameter {
                name: "memory_length",
                reason: format!("memory_length·sample_rate = {n} is not an integer"),
            });
        }
        Ok(())
    }
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

/// Checks that every frequency is a positive integer multiple of the grid,
/// using exact rational arithmetic on the binary values.
pub fn validate_grid(frequencies: &[f64], spec: &WaveformSpec) -> Result<()> {
    spec.validate()?;
    let grid = rational(spec.freq_grid);
    let offending: Vec<f64> = frequencies
        .iter()
        .copied()
        .filter(|&f| !(f > 0.0 && f.is_finite()) || !(rational(f) / &grid).is_integer())
        .collect();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::GridViolation {
            grid_hz: spec.freq_grid,
            offending,
        })
    }
}

fn nyquist_guard(frequencies: &[f64], spec: &WaveformSpec) -> Result<()> {
    match frequencies.iter().find(|&&f| f > 0.5 * spec.sample_rate) {
        Some(&f) => Err(Error::AboveNyquist {
            freq_hz: f,
            sample_rate_hz: spec.sample_rate,
        }),
        None => Ok(()),
    }
}

/// Fractional cycles of a tone at `f` Hz after `i` samples at `rate`.
/// Integer frequencies and rates are reduced exactly so that phases repeat
/// bit for bit across loops.
fn cycles(f: f64, i: u64, rate: f64) -> f64 {
    if f.fract() == 0.0 && rate.fract() == 0.0 && f.abs() < 1e18 && rate < 1e18 {
        let r = rate as i128;
        ((f as i128 * i as i128).rem_euclid(r)) as f64 / rate
    } else {
        (f * i as f64 / rate).fract()
    }
}

/// One channel of a memory window. Amplitudes are in Hz of the lab-frame
/// `hx` component until [`normalize`] rescales them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    pub samples: Vec<f64>,
    pub channel: String,
    pub sample_rate: f64,
}

#[derive(Serialize)]
struct BinaryHeader<'a> {
    sample_rate_hz: f64,
    length: usize,
    channel: &'a str,
}

impl SampleBuffer {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// JSON header line followed by little-endian `f32` samples.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = BinaryHeader {
            sample_rate_hz: self.sample_rate,
            length: self.samples.len(),
            channel: &self.channel,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut bytes = Vec::with_capacity(4 * self.samples.len());
        for s in &self.samples {
            bytes.extend_from_slice(&(*s as f32).to_le_bytes());
        }
        w.write_all(&bytes)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,t_s,sample")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(w, "{},{:e},{:e}", i, i as f64 / self.sample_rate, s)?;
        }
        Ok(())
    }
}

/// Full-scale amplitude for a drive and signal sharing one output:
/// `2(Ω + |g_x|)`.
pub fn full_scale(drive: &DriveConfig, signal: &SignalConfig) -> f64 {
    2.0 * (drive.omega.value() + signal.g[0].abs())
}

/// Divides every buffer by `scale`, preserving relative amplitudes.
pub fn normalize(buffers: &mut [SampleBuffer], scale: f64) {
    if scale > 0.0 {
        for b in buffers {
            b.samples.iter_mut().for_each(|s| *s /= scale);
        }
    }
}

/// The CCDD channel at sample `i`: the phase-modulated carrier while the
/// drive is on (`[0, T_MW)` of each repetition) and zero otherwise. The
/// device phase offset is added to θ_m here and nowhere else.
pub fn ccdd_sample(drive: &DriveConfig, timing: &SequenceTiming, spec: &WaveformSpec, i: u64) -> f64 {
    let fs = spec.sample_rate;
    let per_rep = ((timing.t_rep * fs).round() as u64).max(1);
    if i % per_rep >= (timing.t_mw * fs).round() as u64 {
        return 0.0;
    }
    let carrier = TAU * cycles(drive.omega0.value(), i, fs);
    let modulation = TAU * cycles(drive.omega_m.value(), i, fs) - (drive.theta_m + drive.phase_offset);
    2.0 * drive.omega.value() * (carrier - drive.beta() * modulation.sin()).cos()
}

/// The signal channel at sample `i`: `2g_x cos(ω_s t + φ_s)`.
pub fn signal_sample(signal: &SignalConfig, spec: &WaveformSpec, i: u64) -> f64 {
    let phase = TAU * cycles(signal.omega_s.value(), i, spec.sample_rate) + signal.phi_s;
    2.0 * signal.g[0] * phase.cos()
}

fn fill(spec: &WaveformSpec, channel: &str, f: impl Fn(u64) -> f64 + Sync) -> SampleBuffer {
    let mut samples = vec![0.0; spec.len()];
    samples
        .par_chunks_mut(1 << 16)
        .enumerate()
        .for_each(|(c, chunk)| {
            let base = (c << 16) as u64;
            for (k, s) in chunk.iter_mut().enumerate() {
                *s = f(base + k as u64);
            }
        });
    SampleBuffer {
        samples,
        channel: channel.into(),
        sample_rate: spec.sample_rate,
    }
}

/// Compiles one memory window of the gated CCDD drive.
pub fn compile_ccdd(drive: &DriveConfig, timing: &SequenceTiming, spec: &WaveformSpec) -> Result<SampleBuffer> {
    drive.validate()?;
    validate_grid(&[drive.omega0.value(), drive.omega_m.value()], spec)?;
    nyquist_guard(&[drive.omega0.value() + drive.omega_m.value()], spec)?;
    let reps = rational(spec.memory_length) / rational(timing.t_rep);
    let approx = spec.memory_length / timing.t_rep;
    if !reps.is_integer() && (approx - approx.round()).abs() > 1e-9 * approx.max(1.0) {
        return Err(Error::Timing(format!(
            "memory window {} s holds {approx} repetitions of {} s, not a whole number",
            spec.memory_length, timing.t_rep
        )));
    }
    Ok(fill(spec, "ccdd", |i| ccdd_sample(drive, timing, spec, i)))
}

/// Compiles one memory window of the continuous signal tone.
pub fn compile_signal(signal: &SignalConfig, spec: &WaveformSpec) -> Result<SampleBuffer> {
    if signal.g[0] == 0.0 {
        spec.validate()?;
        return Ok(SampleBuffer {
            samples: vec![0.0; spec.len()],
            channel: "signal".into(),
            sample_rate: spec.sample_rate,
        });
    }
    validate_grid(&[signal.omega_s.value()], spec)?;
    nyquist_guard(&[signal.omega_s.value()], spec)?;
    Ok(fill(spec, "signal", |i| signal_sample(signal, spec, i)))
}

/// Largest jump across the loop point of a buffer, `|s(T⁻) − s(T⁺)|`
/// measured against the continuation `next` (the sample one past the end).
pub fn loop_discontinuity(buffer: &SampleBuffer, next: f64) -> f64 {
    (buffer.samples.first().copied().unwrap_or(0.0) - next).abs()
}

/// Exact check that all `frequencies` complete whole cycles in the window.
pub fn is_periodic(frequencies: &[f64], spec: &WaveformSpec) -> bool {
    let t = rational(spec.memory_length);
    frequencies.iter().all(|&f| {
        let c = rational(f) * &t;
        c.is_integer() || (c.clone() - c.round()).abs() < BigRational::new(BigInt::from(1), BigInt::from(1_000_000_000))
    }) && !t.is_zero()
}
