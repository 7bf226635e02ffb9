//! Experiment configuration: a versioned JSON document with one section per
//! core module plus the parameters of the chosen experiment kind.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use ccdd_core::dynamics::ResonanceBranch;
use ccdd_core::noise::NoiseConfig;
use ccdd_core::readout::ReadoutConfig;
use ccdd_core::sequences::{FixedPointSettings, HeterodyneSettings, SequenceTiming, SimulationSettings};
use ccdd_core::units::{DriveConfig, SignalConfig};
use ccdd_core::wavegen::WaveformSpec;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Rabi,
    AmpSweep,
    PhaseSweep,
    Sensitivity,
    PhaseSensitivity,
    Heterodyne,
    Resonances,
    Bloch,
    SnrScaling,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Rabi,
        Kind::AmpSweep,
        Kind::PhaseSweep,
        Kind::Sensitivity,
        Kind::PhaseSensitivity,
        Kind::Heterodyne,
        Kind::Resonances,
        Kind::Bloch,
        Kind::SnrScaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Rabi => "rabi",
            Kind::AmpSweep => "amp-sweep",
            Kind::PhaseSweep => "phase-sweep",
            Kind::Sensitivity => "sensitivity",
            Kind::PhaseSensitivity => "phase-sensitivity",
            Kind::Heterodyne => "heterodyne",
            Kind::Resonances => "resonances",
            Kind::Bloch => "bloch",
            Kind::SnrScaling => "snr-scaling",
        }
    }

    /// Sections that must be present for this kind.
    pub fn required_sections(self) -> &'static [&'static str] {
        match self {
            Kind::Rabi => &["drive", "signal", "noise", "readout", "timing", "simulation", "rabi"],
            Kind::AmpSweep | Kind::PhaseSweep | Kind::Sensitivity | Kind::PhaseSensitivity => {
                &["drive", "signal", "noise", "readout", "timing", "simulation", "sweep"]
            }
            Kind::Heterodyne => &["drive", "signal", "noise", "readout", "timing", "simulation", "heterodyne"],
            Kind::SnrScaling => &[
                "drive",
                "signal",
                "noise",
                "readout",
                "timing",
                "simulation",
                "heterodyne",
                "snr",
            ],
            Kind::Resonances => &["drive", "signal", "noise", "readout", "timing", "simulation", "resonances"],
            Kind::Bloch => &["drive", "signal", "bloch"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Schema(format!("unknown experiment kind `{s}`")))
    }
}

/// Evenly spaced values or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Values {
    pub fn resolve(&self) -> Vec<f64> {
        match self {
            Values::List(v) => v.clone(),
            Values::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeUnit {
    /// Rabi frequency in Hz.
    #[default]
    Hz,
    Tesla,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseWidths {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl PulseWidths {
    pub fn resolve(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiParams {
    pub pulse_widths: PulseWidths,
    /// Signal phases to run; empty uses the signal section's phase.
    #[serde(default)]
    pub phases: Vec<f64>,
    /// Adds a run with the signal switched off.
    #[serde(default)]
    pub reference_without_signal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Amplitudes for amplitude sweeps and phase-sensitivity curves, phases
    /// (rad) for phase sweeps.
    pub values: Values,
    #[serde(default)]
    pub unit: AmplitudeUnit,
    pub fixed_point: FixedPointSettings,
    /// Replace `timing.t_mw` with the nearest antinode of the no-signal
    /// Rabi trace within ±50 ns.
    #[serde(default)]
    pub antinode: bool,
    /// Phase grid of each phase-sensitivity point.
    #[serde(default = "default_phase_points")]
    pub phase_points: usize,
}

fn default_phase_points() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeterodyneParams {
    pub settings: HeterodyneSettings,
    /// Expected clock, checked against `ω₀ − ε_m` when given.
    #[serde(default)]
    pub clock_hz: Option<f64>,
    /// Half width of the exported spectrum around `2|δ|`.
    #[serde(default = "default_band")]
    pub band_hz: f64,
    #[serde(default)]
    pub write_trace: bool,
    #[serde(default)]
    pub antinode: bool,
}

fn default_band() -> f64 {
    500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrParams {
    pub t_m: Vec<f64>,
    /// Runs averaged per measurement time.
    #[serde(default = "default_runs")]
    pub runs: usize,
}

fn default_runs() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceParams {
    /// Signal frequencies in Hz.
    pub frequencies: Values,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochParams {
    pub t_end: f64,
    pub samples: usize,
    pub branch: ResonanceBranch,
    /// Signal phases; empty uses the signal section's phase.
    #[serde(default)]
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<SequenceTiming>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavegen: Option<WaveformSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<RabiParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heterodyne: Option<HeterodyneParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<SnrParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonances: Option<ResonanceParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bloch: Option<BlochParams>,
}

fn missing(name: &str) -> CliError {
    CliError::Schema(format!("missing section `{name}`"))
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            kind,
            seed: 0,
            output_dir: None,
            drive: None,
            signal: None,
            noise: None,
            readout: None,
            timing: None,
            wavegen: None,
            simulation: None,
            rabi: None,
            sweep: None,
            heterodyne: None,
            snr: None,
            resonances: None,
            bloch: None,
        }
    }

    /// Parses a config, applying `key.path=value` overrides to the JSON
    /// tree before deserializing.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut tree: Value =
            serde_json::from_str(text).map_err(|e| CliError::Schema(format!("malformed config: {e}")))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(tree).map_err(|e| CliError::Schema(format!("config does not match schema: {e}")))?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    pub fn check_schema(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for s in self.kind.required_sections() {
            let present = match *s {
                "drive" => self.drive.is_some(),
                "signal" => self.signal.is_some(),
                "noise" => self.noise.is_some(),
                "readout" => self.readout.is_some(),
                "timing" => self.timing.is_some(),
                "simulation" => self.simulation.is_some(),
                "rabi" => self.rabi.is_some(),
                "sweep" => self.sweep.is_some(),
                "heterodyne" => self.heterodyne.is_some(),
                "snr" => self.snr.is_some(),
                "resonances" => self.resonances.is_some(),
                "bloch" => self.bloch.is_some(),
                _ => unreachable!(),
            };
            if !present {
                return Err(missing(s));
            }
        }
        if let Some(r) = &self.rabi {
            let p = r.pulse_widths;
            if !(p.step > 0.0 && p.start >= 0.0 && p.stop >= p.start) {
                return Err(CliError::Schema("rabi.pulse_widths needs 0 <= start <= stop and step > 0".into()));
            }
        }
        if let Some(s) = &self.sweep {
            if let Values::Range { points, .. } = s.values {
                if points < 2 {
                    return Err(CliError::Schema("sweep.values needs at least 2 points".into()));
                }
            }
        }
        if let Some(s) = &self.snr {
            if s.t_m.len() < 2 || s.runs == 0 {
                return Err(CliError::Schema("snr needs at least two t_m values and one run".into()));
            }
        }
        if let Some(b) = &self.bloch {
            if b.samples < 2 || !(b.t_end > 0.0) {
                return Err(CliError::Schema("bloch needs t_end > 0 and at least 2 samples".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical (compact) JSON of the effective config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn drive(&self) -> Result<DriveConfig, CliError> {
        self.drive.ok_or_else(|| missing("drive"))
    }

    pub fn signal(&self) -> Result<SignalConfig, CliError> {
        self.signal.ok_or_else(|| missing("signal"))
    }

    pub fn noise(&self) -> Result<NoiseConfig, CliError> {
        let mut n = self.noise.ok_or_else(|| missing("noise"))?;
        n.seed = self.sub_seed(0);
        Ok(n)
    }

    pub fn readout(&self) -> Result<ReadoutConfig, CliError> {
        self.readout.ok_or_else(|| missing("readout"))
    }

    pub fn timing(&self) -> Result<SequenceTiming, CliError> {
        self.timing.ok_or_else(|| missing("timing"))
    }

    pub fn simulation(&self) -> Result<SimulationSettings, CliError> {
        self.simulation.ok_or_else(|| missing("simulation"))
    }

    /// Independent seed for each random consumer, derived from the
    /// top-level seed: 0 disorder, 1 shot noise, 2+ photon streams.
    pub fn sub_seed(&self, k: u64) -> u64 {
        if k == 0 {
            return self.seed;
        }
        let digest = Sha256::digest(format!("{}:{}", self.seed, k).as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

fn apply_override(tree: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Schema(format!("override `{spec}` is not key.path=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Schema(format!("override `{path}`: `{key}` is not inside an object")))?;
        if i + 1 == keys.len() {
            match obj.get(*key) {
                Some(v) if v.is_object() || v.is_array() => {
                    return Err(CliError::Schema(format!("override `{path}` targets a non-scalar field")));
                }
                _ => {
                    obj.insert(key.to_string(), value);
                    return Ok(());
                }
            }
        }
        node = obj
            .get_mut(*key)
            .ok_or_else(|| CliError::Schema(format!("override `{path}`: no section `{key}`")))?;
    }
    Ok(())
}
