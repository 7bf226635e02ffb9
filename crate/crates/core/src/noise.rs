//! Quasi-static ensemble disorder and longitudinal decay.
//!
//! Each realization carries a static detuning (inhomogeneous broadening from
//! the nuclear bath) and a multiplicative error on the drive amplitude. Both
//! are drawn from a counter-based stream keyed by `(seed, index)` so that any
//! realization can be regenerated independently of scheduling.

use std::f64::consts::{SQRT_2, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional drive-amplitude spread reproducing a ~1 μs decay of the
/// unprotected CCDD Rabi envelope (see `examples/calibrate_drive_noise.rs`).
pub const CALIBRATED_DRIVE_SIGMA: f64 = 0.037;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Inhomogeneous dephasing time; `null`/infinite disables detuning noise.
    #[serde(with = "infinite_as_null")]
    pub t2_star: f64,
    pub drive_frac_sigma: f64,
    #[serde(with = "infinite_as_null")]
    pub t1: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            t2_star: 60e-9,
            drive_frac_sigma: CALIBRATED_DRIVE_SIGMA,
            t1: 10e-6,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            t2_star: f64::INFINITY,
            drive_frac_sigma: 0.0,
            t1: f64::INFINITY,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Standard deviation of the detuning in Hz, `√2/(2π T₂*)`.
    pub fn detuning_sigma(&self) -> f64 {
        if self.t2_star.is_infinite() {
            0.0
        } else {
            SQRT_2 / (TAU * self.t2_star)
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.detuning_sigma() == 0.0 && self.drive_frac_sigma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t2_star", self.t2_star), ("t1", self.t1)] {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(0.0..0.1).contains(&self.drive_frac_sigma) {
            return Err(Error::InvalidParameter {
                name: "drive_frac_sigma",
                reason: format!("must lie in [0, 0.1), got {}", self.drive_frac_sigma),
            });
        }
        Ok(())
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderRealization {
    /// Static z offset in Hz.
    pub detuning: f64,
    /// Multiplier on the drive amplitude.
    pub drive_scale: f64,
}

impl DisorderRealization {
    pub const IDEAL: DisorderRealization = DisorderRealization {
        detuning: 0.0,
        drive_scale: 1.0,
    };
}

pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws realization `index`. Both normals are always drawn, so changing one
/// noise amplitude leaves the other coordinate of every realization unchanged.
pub fn sample_realization(cfg: &NoiseConfig, index: u64) -> DisorderRealization {
    let mut rng = realization_rng(cfg.seed, index);
    let z1: f64 = StandardNormal.sample(&mut rng);
    let z2: f64 = StandardNormal.sample(&mut rng);
    let sd = cfg.detuning_sigma();
    DisorderRealization {
        detuning: if sd == 0.0 { 0.0 } else { sd * z1 },
        drive_scale: if cfg.drive_frac_sigma == 0.0 {
            1.0
        } else {
            (1.0 + cfg.drive_frac_sigma * z2).max(1e-6)
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrace {
    pub mean: Vec<f64>,
    /// Standard error of the mean per sample (zero for a single realization).
    pub std_err: Vec<f64>,
    pub n: usize,
}

const CHUNK: usize = 32;

/// Averages `trace_fn` over realizations `0..n`. Traces are evaluated in
/// parallel and folded in index order with Welford updates, so the result is
/// independent of the thread count, and identical traces average to
/// themselves exactly.
pub fn ensemble_average<F>(trace_fn: F, cfg: &NoiseConfig, n: usize) -> Result<EnsembleTrace>
where
    F: Fn(&DisorderRealization) -> Vec<f64> + Sync,
{
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n_realizations",
            reason: "must be at least 1".into(),
        });
    }
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let traces: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| trace_fn(&sample_realization(cfg, i as u64)))
            .collect();
        for tr in traces {
            if count == 0 {
                mean = tr.clone();
                m2 = vec![0.0; tr.len()];
            } else if tr.len() != mean.len() {
                return Err(Error::InvalidParameter {
                    name: "trace_fn",
                    reason: "traces differ in length".into(),
                });
            }
            count += 1;
            if count > 1 {
                let k = count as f64;
                for ((m, s), x) in mean.iter_mut().zip(m2.iter_mut()).zip(&tr) {
                    let d = x - *m;
                    *m += d / k;
                    *s += d * (x - *m);
                }
            }
        }
    }
    let std_err = if count > 1 {
        let k = count as f64;
        m2.iter().map(|s| (s / (k - 1.0)).max(0.0).sqrt() / k.sqrt()).collect()
    } else {
        vec![0.0; mean.len()]
    };
    Ok(EnsembleTrace { mean, std_err, n: count })
}

pub fn apply_t1_decay(value: f64, elapsed: f64, cfg: &NoiseConfig) -> f64 {
    value * (-elapsed / cfg.t1).exp()
}

/// Closed-form ensemble free-induction envelope, `exp(−(t/T₂*)²)`.
pub fn free_induction_envelope(t: f64, cfg: &NoiseConfig) -> f64 {
    let s = TAU * cfg.detuning_sigma() * t;
    (-0.5 * s * s).exp()
}
