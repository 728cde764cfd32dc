use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveKind {
    Constant {
        v: f64,
    },
    /// `offset + amplitude` for the first `width` seconds of every period,
    /// `offset` otherwise.
    SquarePulse {
        amplitude: f64,
        period: f64,
        width: f64,
        offset: f64,
    },
    Sine {
        amplitude: f64,
        period: f64,
        offset: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    pub kind: DriveKind,
    pub duration: f64,
}

/// Named drive presets addressable from the command line.
pub const PRESET_NAMES: [&str; 4] = ["matching-pulse", "constant", "lif-pulse", "sine"];

impl DriveWaveform {
    pub fn constant(v: f64, duration: f64) -> Self {
        DriveWaveform {
            kind: DriveKind::Constant { v },
            duration,
        }
    }

    pub fn square(amplitude: f64, period: f64, width: f64, offset: f64, duration: f64) -> Self {
        DriveWaveform {
            kind: DriveKind::SquarePulse {
                amplitude,
                period,
                width,
                offset,
            },
            duration,
        }
    }

    pub fn sine(amplitude: f64, period: f64, offset: f64, duration: f64) -> Self {
        DriveWaveform {
            kind: DriveKind::Sine {
                amplitude,
                period,
                offset,
            },
            duration,
        }
    }

    /// The 12.5 V, 100 us wide matching-circuit test pulse. The simulated
    /// window covers exactly the on-phase of one pulse.
    pub fn matching_pulse() -> Self {
        Self::square(12.5, 200e-6, 100e-6, 0.0, 100e-6)
    }

    /// Look up a preset by name. `amplitude` is required for presets whose
    /// amplitude is not fixed (`constant`, `lif-pulse`, `sine`) and rejected
    /// for `matching-pulse`.
    pub fn preset(name: &str, amplitude: Option<f64>) -> Result<Self> {
        let need = |a: Option<f64>| {
            a.ok_or_else(|| Error::InvalidParameter(format!("preset `{name}` needs an amplitude")))
        };
        let drive = match name {
            "matching-pulse" => {
                if amplitude.is_some() {
                    return Err(Error::InvalidParameter(
                        "preset `matching-pulse` has a fixed 12.5 V amplitude".into(),
                    ));
                }
                Self::matching_pulse()
            }
            "constant" => Self::constant(need(amplitude)?, 100e-6),
            // 4 us period, 2 us pulses
            "lif-pulse" => Self::square(need(amplitude)?, 4e-6, 2e-6, 0.0, 100e-6),
            // one 2 ms sine period
            "sine" => Self::sine(need(amplitude)?, 2e-3, 0.0, 2e-3),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown drive preset `{other}` (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        drive.validate()?;
        Ok(drive)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter("drive duration must be > 0".into()));
        }
        match self.kind {
            DriveKind::Constant { v } if !v.is_finite() => Err(Error::InvalidParameter(
                "drive voltage must be finite".into(),
            )),
            DriveKind::SquarePulse { period, width, .. }
                if !(period > 0.0 && width >= 0.0 && width <= period) =>
            {
                Err(Error::InvalidParameter(
                    "need period > 0 and 0 <= width <= period".into(),
                ))
            }
            DriveKind::Sine { period, .. } if !(period > 0.0) => {
                Err(Error::InvalidParameter("sine period must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            DriveKind::Constant { v } => v,
            DriveKind::SquarePulse {
                amplitude,
                period,
                width,
                offset,
            } => {
                let phase = t.rem_euclid(period);
                if phase < width {
                    offset + amplitude
                } else {
                    offset
                }
            }
            DriveKind::Sine {
                amplitude,
                period,
                offset,
            } => offset + amplitude * (TAU * t / period).sin(),
        }
    }

    /// Negated waveform.
    pub fn inverted(&self) -> Self {
        let kind = match self.kind {
            DriveKind::Constant { v } => DriveKind::Constant { v: -v },
            DriveKind::SquarePulse {
                amplitude,
                period,
                width,
                offset,
            } => DriveKind::SquarePulse {
                amplitude: -amplitude,
                period,
                width,
                offset: -offset,
            },
            DriveKind::Sine {
                amplitude,
                period,
                offset,
            } => DriveKind::Sine {
                amplitude: -amplitude,
                period,
                offset: -offset,
            },
        };
        DriveWaveform { kind, ..*self }
    }

    /// Discontinuities strictly inside `(a, b)`, ascending.
    pub(crate) fn edges_in(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        out.clear();
        if let DriveKind::SquarePulse { period, width, .. } = self.kind {
            let k0 = (a / period).floor() as i64;
            let k1 = (b / period).floor() as i64;
            for k in k0..=k1 {
                let base = k as f64 * period;
                for e in [base, base + width] {
                    if e > a && e < b {
                        out.push(e);
                    }
                }
            }
        }
    }

    /// Drive over `[a, b]` as a linear segment `(u(a), u(b))`. Piecewise
    /// constant waveforms are sampled at the midpoint, so the caller must split
    /// steps at [`edges_in`](Self::edges_in) first.
    pub(crate) fn segment(&self, a: f64, b: f64) -> (f64, f64) {
        match self.kind {
            DriveKind::Sine { .. } => (self.value(a), self.value(b)),
            _ => {
                let u = self.value(0.5 * (a + b));
                (u, u)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_pulse_levels_and_edges() {
        let d = DriveWaveform::square(5.0, 4e-6, 2e-6, 0.0, 20e-6);
        assert_eq!(d.value(1e-6), 5.0);
        assert_eq!(d.value(3e-6), 0.0);
        assert_eq!(d.value(5e-6), 5.0);
        let mut e = Vec::new();
        d.edges_in(1e-6, 9e-6, &mut e);
        assert_eq!(e.len(), 4);
        assert!((e[0] - 2e-6).abs() < 1e-18 && (e[3] - 8e-6).abs() < 1e-18);
        d.edges_in(2.5e-6, 3.5e-6, &mut e);
        assert!(e.is_empty());
    }

    #[test]
    fn presets() {
        let p = DriveWaveform::preset("matching-pulse", None).unwrap();
        assert_eq!(p.value(50e-6), 12.5);
        assert!(DriveWaveform::preset("matching-pulse", Some(3.0)).is_err());
        assert!(DriveWaveform::preset("sine", None).is_err());
        let s = DriveWaveform::preset("sine", Some(10.0)).unwrap();
        assert!((s.value(0.5e-3) - 10.0).abs() < 1e-12);
        assert!(DriveWaveform::preset("nope", Some(1.0)).is_err());
        for name in PRESET_NAMES {
            DriveWaveform::preset(
                name,
                if name == "matching-pulse" {
                    None
                } else {
                    Some(1.0)
                },
            )
            .unwrap();
        }
    }

    #[test]
    fn invalid_waveforms() {
        assert!(DriveWaveform::square(1.0, 1.0, 2.0, 0.0, 1.0)
            .validate()
            .is_err());
        assert!(DriveWaveform::sine(1.0, 0.0, 0.0, 1.0).validate().is_err());
        assert!(DriveWaveform::constant(1.0, 0.0).validate().is_err());
    }
}
