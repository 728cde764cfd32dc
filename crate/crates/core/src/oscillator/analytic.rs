//! Closed-form cycle of the ideal instantaneous-switching oscillator under
//! constant drive.
//!
//! In each state the node relaxes exponentially toward `V_inf = gain * v_in`
//! with `gain = Rp / (Rs + Rp)` and time constant `C (Rs || Rp)`. The
//! insulating segment charges from the switch-down node voltage `V_dn` to the
//! switch-up voltage `V_up`; the metallic segment discharges back:
//!
//! ```text
//! t_ins = tau_ins * ln((V_inf_ins - V_dn) / (V_inf_ins - V_up))
//! t_met = tau_met * ln((V_up - V_inf_met) / (V_dn - V_inf_met))
//! ```
//!
//! If `V_inf_ins <= V_up` the node never reaches the threshold (un-firing);
//! if `V_inf_met >= V_dn` the metallic state never releases (firing).

use serde::{Deserialize, Serialize};

use super::{NeuronCircuit, Response, DEFAULT_SETTLE_FRACTION};
use crate::device::DeviceState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub period: f64,
    pub t_insulating: f64,
    pub t_metallic: f64,
    /// node voltage at the metal to insulator switch
    pub v_low: f64,
    /// node voltage at the insulator to metal switch
    pub v_high: f64,
}

impl Cycle {
    pub fn frequency(&self) -> f64 {
        1.0 / self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Oscillation {
    Oscillating(Cycle),
    /// Insulating steady state never reaches the threshold.
    StuckInsulating,
    /// Metallic steady state never drops to the hold voltage (latched).
    StuckMetallic,
}

impl Oscillation {
    pub fn period(&self) -> Option<f64> {
        match self {
            Oscillation::Oscillating(c) => Some(c.period),
            _ => None,
        }
    }

    pub fn frequency(&self) -> f64 {
        self.period().map_or(0.0, |p| 1.0 / p)
    }

    pub fn response(&self) -> Response {
        match self {
            Oscillation::Oscillating(_) => Response::Oscillating,
            Oscillation::StuckInsulating => Response::UnFiring,
            Oscillation::StuckMetallic => Response::Firing,
        }
    }
}

struct Segment {
    gain: f64,
    tau: f64,
}

fn segment(c: &NeuronCircuit, state: DeviceState) -> Segment {
    let rp = c.branch_resistance(state);
    Segment {
        gain: rp / (c.r_series + rp),
        tau: c.time_constant(state),
    }
}

/// Exact period of the ideal model, or which state it gets stuck in.
/// Only `|v_in|` matters.
pub fn closed_form_period(circuit: &NeuronCircuit, v_in: f64) -> Oscillation {
    let v = v_in.abs();
    let up = circuit.node_switch_up();
    let dn = circuit.node_switch_down();
    let ins = segment(circuit, DeviceState::Insulating);
    let met = segment(circuit, DeviceState::Metallic);
    let inf_i = v * ins.gain;
    if inf_i <= up {
        return Oscillation::StuckInsulating;
    }
    let inf_m = v * met.gain;
    if inf_m >= dn || dn >= up {
        return Oscillation::StuckMetallic;
    }
    let t_insulating = ins.tau * ((inf_i - dn) / (inf_i - up)).ln();
    let t_metallic = met.tau * ((up - inf_m) / (dn - inf_m)).ln();
    Oscillation::Oscillating(Cycle {
        period: t_insulating + t_metallic,
        t_insulating,
        t_metallic,
        v_low: dn,
        v_high: up,
    })
}

/// Integral of the node voltage over a relaxation segment of length `t`.
fn segment_integral(v0: f64, v_inf: f64, tau: f64, t: f64) -> f64 {
    v_inf * t + (v0 - v_inf) * tau * (-(-t / tau).exp_m1())
}

/// Time-averaged power drawn from the source, `v_in * mean(i_source)`, in
/// the periodic steady state.
pub fn average_power(circuit: &NeuronCircuit, v_in: f64) -> f64 {
    let rs = circuit.r_series;
    let steady = |state| v_in * v_in / (rs + circuit.branch_resistance(state));
    match closed_form_period(circuit, v_in) {
        Oscillation::StuckInsulating => steady(DeviceState::Insulating),
        Oscillation::StuckMetallic => steady(DeviceState::Metallic),
        Oscillation::Oscillating(c) => {
            let v = v_in.abs();
            let ins = segment(circuit, DeviceState::Insulating);
            let met = segment(circuit, DeviceState::Metallic);
            let area = segment_integral(c.v_low, v * ins.gain, ins.tau, c.t_insulating)
                + segment_integral(c.v_high, v * met.gain, met.tau, c.t_metallic);
            let mean_node = area / c.period;
            v * (v - mean_node) / rs
        }
    }
}

/// Drives at which the insulating state first reaches the threshold and
/// at which the metallic state stops releasing, `(v_on, v_latch)`. The
/// circuit oscillates exactly on `(v_on, v_latch)`, which is empty when
/// `v_on >= v_latch`.
pub fn band_edges(circuit: &NeuronCircuit) -> (f64, f64) {
    (
        circuit.node_switch_up() / segment(circuit, DeviceState::Insulating).gain,
        circuit.node_switch_down() / segment(circuit, DeviceState::Metallic).gain,
    )
}

/// Duration and step for a constant-drive run at `v_in` whose steady window
/// (after the default settle fraction) holds at least `periods` full cycles,
/// or is far past the start-up switch for the stuck outcomes.
pub fn suggested_run(circuit: &NeuronCircuit, v_in: f64, periods: f64) -> (f64, f64) {
    let v = v_in.abs();
    let ins = segment(circuit, DeviceState::Insulating);
    let met = segment(circuit, DeviceState::Metallic);
    let inf_i = v * ins.gain;
    let up = circuit.node_switch_up();
    // time for the first charge from 0 V to the switch-up voltage
    let first = || ins.tau * (inf_i / (inf_i - up)).ln();
    let keep = 1.0 - DEFAULT_SETTLE_FRACTION;
    match closed_form_period(circuit, v) {
        Oscillation::Oscillating(c) => {
            let duration = (first() + (periods + 1.0) * c.period) / keep;
            (duration, c.period / 1000.0)
        }
        Oscillation::StuckInsulating => {
            let duration = 20.0 * ins.tau;
            (duration, duration / 20_000.0)
        }
        Oscillation::StuckMetallic => {
            let duration = 12.0 * first() + 20.0 * met.tau;
            (duration, duration / 20_000.0)
        }
    }
}

/// Drive range over which the circuit oscillates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// onset: below this the device stays insulating
    pub v_on: f64,
    /// drive of maximum frequency; frequency rises monotonically on
    /// `[v_on, v_peak]`
    pub v_peak: f64,
    /// above this the device latches metallic
    pub v_latch: f64,
    pub f_peak: f64,
}

/// Oscillating band for positive drive, or `None` if the circuit never
/// oscillates.
pub fn oscillating_band(circuit: &NeuronCircuit) -> Option<Band> {
    if circuit.node_switch_down() >= circuit.node_switch_up() {
        return None;
    }
    let (v_on, v_latch) = band_edges(circuit);
    if v_on >= v_latch {
        return None;
    }
    let f = |v: f64| closed_form_period(circuit, v).frequency();
    // golden-section search; frequency vanishes at both band edges
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (v_on, v_latch);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-12 * v_latch {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let v_peak = 0.5 * (a + b);
    Some(Band {
        v_on,
        v_peak,
        v_latch,
        f_peak: f(v_peak),
    })
}
