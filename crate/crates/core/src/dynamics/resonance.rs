use serde::Serialize;

use crate::units::{DriveConfig, Frequency};

/// Sensor resonances of the dressed spin: six in the XY signal plane, centred
/// on ω₀, and two in the MHz range for z signals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceMap {
    pub xy_resonances: Vec<Frequency>,
    pub z_resonances: Vec<Frequency>,
}

impl ResonanceMap {
    pub fn contains_xy(&self, f: Frequency, tol_hz: f64) -> bool {
        self.xy_resonances.iter().any(|r| (r.value() - f.value()).abs() <= tol_hz)
    }
}

pub fn resonance_map(drive: &DriveConfig) -> ResonanceMap {
    let w0 = drive.omega0.value();
    let om = drive.omega.value();
    let e = drive.epsilon_m.value();
    let mut xy: Vec<f64> = [e, om - e, om + e]
        .iter()
        .flat_map(|&d| [w0 - d, w0 + d])
        .collect();
    xy.sort_by(f64::total_cmp);
    xy.dedup();
    let mut z = vec![om - e, om + e];
    z.dedup();
    ResonanceMap {
        xy_resonances: xy.into_iter().map(Frequency::hz).collect(),
        z_resonances: z.into_iter().map(Frequency::hz).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map() {
        let m = resonance_map(&DriveConfig::default());
        assert_eq!(m.xy_resonances.len(), 6);
        for f in [2.31e9, 2.33e9, 2.23e9, 2.41e9, 2.21e9, 2.43e9] {
            assert!(m.contains_xy(Frequency::hz(f), 1.0), "{f}");
        }
        assert_eq!(m.z_resonances, vec![Frequency::hz(90e6), Frequency::hz(110e6)]);
        let sum: f64 = m.xy_resonances.iter().map(|f| f.value() - 2.32e9).sum();
        assert!(sum.abs() < 1e-3);
    }

    #[test]
    fn degenerate_without_second_drive() {
        let d = DriveConfig {
            epsilon_m: Frequency::ZERO,
            ..Default::default()
        };
        let m = resonance_map(&d);
        assert_eq!(
            m.xy_resonances,
            vec![Frequency::hz(2.22e9), Frequency::hz(2.32e9), Frequency::hz(2.42e9)]
        );
    }
}
