//! Optical readout: spin projection to photon rate, shot noise, and the two
//! contrast estimators.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{apply_t1_decay, NoiseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    /// Expected photons per gated readout at sz = 0.
    pub mean_photons: f64,
    /// Fractional PL modulation per unit sz.
    pub contrast_kappa: f64,
    pub gate: f64,
    pub laser_init: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig {
            mean_photons: 1.8,
            contrast_kappa: 0.02,
            gate: 350e-9,
            laser_init: 2e-6,
        }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photons > 0.0 && self.mean_photons.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mean_photons",
                reason: format!("must be positive, got {}", self.mean_photons),
            });
        }
        if !(self.contrast_kappa > 0.0 && self.contrast_kappa < 1.0) {
            return Err(Error::InvalidParameter {
                name: "contrast_kappa",
                reason: format!("must lie in (0, 1), got {}", self.contrast_kappa),
            });
        }
        if !(self.gate > 0.0 && self.gate <= self.laser_init) {
            return Err(Error::InvalidParameter {
                name: "gate",
                reason: format!("need 0 < gate <= laser_init, got {} and {}", self.gate, self.laser_init),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutOutcome {
    pub photons: u64,
    pub timestamp: f64,
}

/// Expected photons of one gated readout, `m·(1 + κ·sz)`, clamped at zero.
pub fn pl_rate(sz: f64, cfg: &ReadoutConfig) -> Result<f64> {
    if !(sz.abs() <= 1.0 + 1e-6) {
        return Err(Error::SzOutOfRange(sz));
    }
    Ok((cfg.mean_photons * (1.0 + cfg.contrast_kappa * sz)).max(0.0))
}

/// Expected photons of a readout taken `elapsed` after initialisation.
pub fn population(sz: f64, elapsed: f64, readout: &ReadoutConfig, noise: &NoiseConfig) -> Result<f64> {
    Ok(apply_t1_decay(pl_rate(sz, readout)?, elapsed, noise))
}

pub fn sample_photons<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive finite rate").sample(rng) as u64
}

/// Total photons of `n` independent readouts at rate `lambda`.
pub fn sample_photon_sum<R: Rng + ?Sized>(lambda: f64, n: u64, rng: &mut R) -> u64 {
    sample_photons(lambda * n as f64, rng)
}

fn ratio_minus_one(p: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(Error::EstimatorUndefined(reference));
    }
    Ok((p - reference) / reference)
}

/// `(P_T − P_{T+ΔT}) / P_{T+ΔT}`.
pub fn contrast_delta_t(p_t: f64, p_tdt: f64) -> Result<f64> {
    ratio_minus_one(p_t, p_tdt)
}

/// `(P_T − P_0) / P_0`, with `P_0` taken with drive and signal off.
pub fn contrast_zero(p_t: f64, p_0: f64) -> Result<f64> {
    ratio_minus_one(p_t, p_0)
}

/// Synthetic time tags for per-repetition photon counts: photon `k` of
/// repetition `n` lands uniformly inside the gate of that repetition, and
/// `background` extra photons per repetition (Poisson mean) land outside it.
pub fn time_tags<R: Rng + ?Sized>(
    counts: &[u64],
    period: f64,
    gate: f64,
    background: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut tags = Vec::new();
    let outside = period - gate;
    for (n, &c) in counts.iter().enumerate() {
        let base = n as f64 * period;
        let mut rep: Vec<f64> = (0..c)
            .map(|_| base + gate * rng.random_range(0.02..0.98))
            .collect();
        let extra = sample_photons(background, rng);
        rep.extend((0..extra).map(|_| base + gate + outside * rng.random_range(0.02..0.98)));
        rep.sort_by(f64::total_cmp);
        tags.extend(rep);
    }
    tags
}
