use serde::{Deserialize, Serialize};

use crate::device::{step_state_with, DeviceParams, DeviceState};
use crate::error::{Error, Result};

/// Series current limiter for I-V sweeps. Small enough that the metallic
/// state holds right after every switch of the default table.
pub const DEFAULT_LOAD_RESISTOR: f64 = 100.0;
pub const MIN_SWEEP_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub v_applied: f64,
    pub current: f64,
    pub v_device: f64,
    pub branch: Branch,
    pub state: DeviceState,
}

/// Up-then-down quasi-static sweep. Threshold fields are `None` when the
/// corresponding jump never happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVCurve {
    pub level: u8,
    pub load_resistor: f64,
    pub v_max: f64,
    pub steps: usize,
    pub points: Vec<IvPoint>,
    /// source voltage at the insulator to metal jump
    pub v_th_source: Option<f64>,
    /// source voltage at the metal to insulator jump
    pub v_h_source: Option<f64>,
    /// device voltage just before the insulator to metal jump
    pub v_th_device: Option<f64>,
    /// device voltage just before the metal to insulator jump
    pub v_h_device: Option<f64>,
}

impl IVCurve {
    /// Device-referred `(v_th, v_h)`, or `NoSwitch` if the sweep never
    /// switched both ways.
    pub fn thresholds(&self) -> Result<(f64, f64)> {
        match (self.v_th_device, self.v_h_device) {
            (Some(th), Some(h)) => Ok((th, h)),
            _ => Err(Error::NoSwitch { v_max: self.v_max }),
        }
    }

    pub fn step(&self) -> f64 {
        self.v_max / self.steps as f64
    }
}

pub fn iv_sweep(
    device: &DeviceParams,
    v_max: f64,
    steps: usize,
    load_resistor: f64,
) -> Result<IVCurve> {
    device.validate()?;
    iv_sweep_with(device, device.v_th, device.v_h, v_max, steps, load_resistor)
}

/// Sweep with explicit thresholds, used for per-cycle jitter.
pub(crate) fn iv_sweep_with(
    device: &DeviceParams,
    v_th: f64,
    v_h: f64,
    v_max: f64,
    steps: usize,
    load_resistor: f64,
) -> Result<IVCurve> {
    if steps < MIN_SWEEP_STEPS {
        return Err(Error::InvalidParameter(format!(
            "sweep needs at least {MIN_SWEEP_STEPS} steps"
        )));
    }
    if !(v_max > 0.0 && v_max.is_finite() && load_resistor > 0.0) {
        return Err(Error::InvalidParameter(
            "need v_max > 0 and load_resistor > 0".into(),
        ));
    }
    let mut curve = IVCurve {
        level: device.level,
        load_resistor,
        v_max,
        steps,
        points: Vec::with_capacity(2 * steps + 2),
        v_th_source: None,
        v_h_source: None,
        v_th_device: None,
        v_h_device: None,
    };
    let divider =
        |state, v: f64| v * device.resistance(state) / (device.resistance(state) + load_resistor);
    let mut state = DeviceState::Insulating;
    let up = (0..=steps).map(|k| (Branch::Up, k));
    let down = (0..=steps).rev().map(|k| (Branch::Down, k));
    for (branch, k) in up.chain(down) {
        let v = v_max * k as f64 / steps as f64;
        // settle: at most one switch each way per source value
        for _ in 0..2 {
            let v_dev = divider(state, v);
            let next = step_state_with(state, v_dev, v_th, v_h);
            if next == state {
                break;
            }
            match next {
                DeviceState::Metallic if curve.v_th_source.is_none() => {
                    curve.v_th_source = Some(v);
                    curve.v_th_device = Some(v_dev);
                }
                DeviceState::Insulating if curve.v_h_source.is_none() => {
                    curve.v_h_source = Some(v);
                    curve.v_h_device = Some(v_dev);
                }
                _ => {}
            }
            state = next;
        }
        let r = device.resistance(state) + load_resistor;
        curve.points.push(IvPoint {
            v_applied: v,
            current: v / r,
            v_device: divider(state, v),
            branch,
            state,
        });
    }
    Ok(curve)
}
