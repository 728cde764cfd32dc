//! Two-state hysteretic threshold switch.
//!
//! The device is a resistor that is either insulating (`r_ins`) or metallic
//! (`r_met`). It turns metallic once the voltage across it reaches `v_th` and
//! falls back to insulating once that voltage drops to `v_h`. Thresholds act
//! on `|v|`, so the device responds identically to negative drive.
//!
//! Five parameter sets model increasing oxygen-vacancy levels. The shipped
//! table lives in `config/devices.toml` and is mirrored by
//! [`DeviceTable::default`]; a config file may override any subset of fields.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 5;

/// Default per-cycle jitter as a fraction of `v_th`, used by stochastic runs.
pub const DEFAULT_JITTER_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceState {
    Insulating,
    Metallic,
}

impl DeviceState {
    pub fn is_metallic(self) -> bool {
        matches!(self, DeviceState::Metallic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub level: u8,
    /// Insulator to metal switching threshold across the device, volts.
    pub v_th: f64,
    /// Metal to insulator hold voltage, volts.
    pub v_h: f64,
    pub r_ins: f64,
    pub r_met: f64,
    /// Per-cycle Gaussian jitter on `v_th` and `v_h`, volts.
    pub jitter_sigma: f64,
}

// level, v_th, v_h, r_ins, r_met
const DEFAULT_TABLE: [(u8, f64, f64, f64, f64); 5] = [
    (1, 6.5, 2.5, 100_000.0, 600.0),
    (2, 5.3125, 2.3, 56_000.0, 540.0),
    (3, 4.125, 2.0, 32_000.0, 450.0),
    (4, 2.9375, 1.55, 18_000.0, 340.0),
    (5, 1.75, 1.5, 230.0, 200.0),
];

impl DeviceParams {
    pub fn hysteresis(&self) -> f64 {
        self.v_th - self.v_h
    }

    pub fn resistance(&self, state: DeviceState) -> f64 {
        resistance(state, self)
    }

    /// Copy with `jitter_sigma = fraction * v_th`.
    pub fn with_jitter_fraction(mut self, fraction: f64) -> Self {
        self.jitter_sigma = fraction * self.v_th;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.v_th,
            self.v_h,
            self.r_ins,
            self.r_met,
            self.jitter_sigma,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(format!(
                "level {}: non-finite device parameter",
                self.level
            )));
        }
        if !(self.v_h > 0.0 && self.v_h < self.v_th) {
            return Err(Error::InvalidParameter(format!(
                "level {}: need 0 < v_h < v_th (v_h = {}, v_th = {})",
                self.level, self.v_h, self.v_th
            )));
        }
        if !(self.r_met > 0.0 && self.r_met < self.r_ins) {
            return Err(Error::InvalidParameter(format!(
                "level {}: need 0 < r_met < r_ins (r_met = {}, r_ins = {})",
                self.level, self.r_met, self.r_ins
            )));
        }
        if self.jitter_sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "level {}: jitter_sigma must be >= 0",
                self.level
            )));
        }
        Ok(())
    }
}

/// Resistance of the device in the given state.
pub fn resistance(state: DeviceState, params: &DeviceParams) -> f64 {
    match state {
        DeviceState::Insulating => params.r_ins,
        DeviceState::Metallic => params.r_met,
    }
}

/// One hysteretic update against the instantaneous device voltage.
pub fn step_state(state: DeviceState, v_device: f64, params: &DeviceParams) -> DeviceState {
    step_state_with(state, v_device, params.v_th, params.v_h)
}

/// [`step_state`] with explicit (possibly jittered) thresholds.
pub(crate) fn step_state_with(
    state: DeviceState,
    v_device: f64,
    v_th: f64,
    v_h: f64,
) -> DeviceState {
    let v = v_device.abs();
    match state {
        DeviceState::Insulating if v >= v_th => DeviceState::Metallic,
        DeviceState::Metallic if v <= v_h => DeviceState::Insulating,
        s => s,
    }
}

/// Default parameters for a vacancy level.
pub fn device_params(level: i64) -> Result<DeviceParams> {
    DeviceTable::default().get(level)
}

/// The five-level parameter family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTable {
    levels: [DeviceParams; 5],
}

impl Default for DeviceTable {
    fn default() -> Self {
        let levels = DEFAULT_TABLE.map(|(level, v_th, v_h, r_ins, r_met)| DeviceParams {
            level,
            v_th,
            v_h,
            r_ins,
            r_met,
            jitter_sigma: 0.0,
        });
        DeviceTable { levels }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelOverride {
    v_th: Option<f64>,
    v_h: Option<f64>,
    r_ins: Option<f64>,
    r_met: Option<f64>,
    jitter_sigma: Option<f64>,
}

impl DeviceTable {
    pub fn get(&self, level: i64) -> Result<DeviceParams> {
        if level < MIN_LEVEL as i64 || level > MAX_LEVEL as i64 {
            return Err(Error::InvalidLevel(level));
        }
        Ok(self.levels[(level - 1) as usize])
    }

    pub fn levels(&self) -> &[DeviceParams] {
        &self.levels
    }

    /// Parse a config file: one `[levelN]` table per level with any of
    /// `v_th`, `v_h`, `r_ins`, `r_met`, `jitter_sigma`. Missing keys keep the
    /// built-in defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, LevelOverride> =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut table = DeviceTable::default();
        for (key, ov) in raw {
            let level: u8 = key
                .strip_prefix("level")
                .and_then(|n| n.parse().ok())
                .filter(|n| (MIN_LEVEL..=MAX_LEVEL).contains(n))
                .ok_or_else(|| Error::Config(format!("unknown section [{key}]")))?;
            let p = &mut table.levels[(level - 1) as usize];
            if let Some(v) = ov.v_th {
                p.v_th = v;
            }
            if let Some(v) = ov.v_h {
                p.v_h = v;
            }
            if let Some(v) = ov.r_ins {
                p.r_ins = v;
            }
            if let Some(v) = ov.r_met {
                p.r_met = v;
            }
            if let Some(v) = ov.jitter_sigma {
                p.jitter_sigma = v;
            }
        }
        for p in &table.levels {
            p.validate()?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_config_str(
            &std::fs::read_to_string(path).map_err(crate::error::file_error(path))?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_thresholds() {
        assert_eq!(device_params(1).unwrap().v_th, 6.5);
        assert_eq!(device_params(5).unwrap().v_th, 1.75);
    }

    #[test]
    fn interior_levels_are_linear_in_threshold() {
        // 6.5 - (3 - 1) * (6.5 - 1.75) / 4
        let expected = 6.5 - 2.0 * (6.5 - 1.75) / 4.0;
        assert_eq!(expected, 4.125);
        assert_eq!(device_params(3).unwrap().v_th, expected);
        for level in 1..=5 {
            let v = 6.5 - (level as f64 - 1.0) * 1.1875;
            assert_eq!(device_params(level).unwrap().v_th, v);
        }
    }

    #[test]
    fn out_of_range_levels() {
        assert!(matches!(device_params(0), Err(Error::InvalidLevel(0))));
        assert!(matches!(device_params(6), Err(Error::InvalidLevel(6))));
        assert!(matches!(device_params(-3), Err(Error::InvalidLevel(-3))));
    }

    #[test]
    fn level1_resistances() {
        let p = device_params(1).unwrap();
        assert_eq!(resistance(DeviceState::Insulating, &p), 100_000.0);
        assert_eq!(resistance(DeviceState::Metallic, &p), 600.0);
        let custom = DeviceParams { r_ins: 1234.5, ..p };
        assert_eq!(custom.resistance(DeviceState::Insulating), 1234.5);
    }

    #[test]
    fn monotone_family() {
        let table = DeviceTable::default();
        for w in table.levels().windows(2) {
            assert!(w[1].v_th < w[0].v_th);
            assert!(w[1].hysteresis() < w[0].hysteresis());
            assert!(w[1].r_ins < w[0].r_ins);
        }
        for p in table.levels() {
            p.validate().unwrap();
        }
    }

    #[test]
    fn threshold_and_hold() {
        let p = device_params(2).unwrap();
        let eps = 1e-9;
        assert_eq!(
            step_state(DeviceState::Insulating, p.v_th + eps, &p),
            DeviceState::Metallic
        );
        assert_eq!(
            step_state(DeviceState::Metallic, p.v_h - eps, &p),
            DeviceState::Insulating
        );
        let mid = 0.5 * (p.v_h + p.v_th);
        assert_eq!(
            step_state(DeviceState::Insulating, mid, &p),
            DeviceState::Insulating
        );
        assert_eq!(
            step_state(DeviceState::Metallic, mid, &p),
            DeviceState::Metallic
        );
        // symmetric in |v|
        assert_eq!(
            step_state(DeviceState::Insulating, -(p.v_th + eps), &p),
            DeviceState::Metallic
        );
    }

    #[test]
    fn config_overrides_and_rejects() {
        let t =
            DeviceTable::from_config_str("[level2]\nv_th = 5.0\njitter_sigma = 0.05\n").unwrap();
        let p = t.get(2).unwrap();
        assert_eq!(p.v_th, 5.0);
        assert_eq!(p.jitter_sigma, 0.05);
        assert_eq!(p.v_h, 2.3);
        assert_eq!(t.get(1).unwrap(), device_params(1).unwrap());

        assert!(DeviceTable::from_config_str("[level9]\nv_th = 1.0\n").is_err());
        assert!(DeviceTable::from_config_str("[level1]\nbogus = 1.0\n").is_err());
        assert!(DeviceTable::from_config_str("[level1]\nv_h = 7.0\n").is_err());
    }

    #[test]
    fn shipped_config_matches_builtin_table() {
        let text = include_str!("../../../config/devices.toml");
        assert_eq!(
            DeviceTable::from_config_str(text).unwrap(),
            DeviceTable::default()
        );
    }
}
