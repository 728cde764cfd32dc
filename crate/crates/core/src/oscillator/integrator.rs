//! Exact per-state node update with bisection-located switching.
//!
//! Within one device state the node obeys `C dV/dt = (u - V)/Rs - V/Rp`,
//! which is linear. For a drive that is linear across the step the solution
//! is closed form, so the only numerical error comes from locating the
//! switching instants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::NeuronCircuit;
use crate::device::{step_state_with, DeviceState};
use crate::error::{Error, Result};

/// Switch instants are bracketed to this fraction of the step.
pub(crate) const EVENT_TOLERANCE: f64 = 1e-2;
const MAX_EVENTS_PER_STEP: usize = 64;

#[derive(Debug, Clone, Copy)]
struct StateConsts {
    /// 1 / time constant
    rate: f64,
    /// steady-state node gain `Rp / (Rs + Rp)`
    gain: f64,
    /// device share of the branch, `r_dev / Rp`
    device_share: f64,
    branch: f64,
}

impl StateConsts {
    fn new(c: &NeuronCircuit, state: DeviceState) -> Self {
        let rp = c.branch_resistance(state);
        StateConsts {
            rate: (1.0 / c.r_series + 1.0 / rp) / c.c_par,
            gain: rp / (c.r_series + rp),
            device_share: c.device.resistance(state) / rp,
            branch: rp,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NodeIntegrator {
    consts: [StateConsts; 2],
    r_sample: f64,
    pub v: f64,
    pub state: DeviceState,
    v_th: f64,
    v_h: f64,
    base_th: f64,
    base_h: f64,
    jitter: Option<(ChaCha8Rng, Normal<f64>)>,
    cached: [(f64, f64); 2],
}

fn idx(s: DeviceState) -> usize {
    s.is_metallic() as usize
}

impl NodeIntegrator {
    pub fn new(circuit: &NeuronCircuit, seed: Option<u64>) -> Result<Self> {
        circuit.validate()?;
        let d = &circuit.device;
        let jitter = if d.jitter_sigma > 0.0 {
            let seed = seed.ok_or(Error::MissingSeed)?;
            let normal = Normal::new(0.0, d.jitter_sigma)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Some((ChaCha8Rng::seed_from_u64(seed), normal))
        } else {
            None
        };
        let mut it = NodeIntegrator {
            consts: [
                StateConsts::new(circuit, DeviceState::Insulating),
                StateConsts::new(circuit, DeviceState::Metallic),
            ],
            r_sample: circuit.r_sample,
            v: 0.0,
            state: DeviceState::Insulating,
            v_th: d.v_th,
            v_h: d.v_h,
            base_th: d.v_th,
            base_h: d.v_h,
            jitter,
            cached: [(f64::NAN, 0.0); 2],
        };
        it.redraw_thresholds();
        Ok(it)
    }

    fn redraw_thresholds(&mut self) {
        if let Some((rng, normal)) = self.jitter.as_mut() {
            loop {
                let th = self.base_th + normal.sample(rng);
                let h = self.base_h + normal.sample(rng);
                if h > 0.0 && h < th {
                    self.v_th = th;
                    self.v_h = h;
                    break;
                }
            }
        }
    }

    pub fn spike_voltage(&self) -> f64 {
        self.v * self.r_sample / self.consts[idx(self.state)].branch
    }

    fn decay(&mut self, state: DeviceState, tau: f64) -> f64 {
        let i = idx(state);
        if self.cached[i].0 == tau {
            return self.cached[i].1;
        }
        let d = (-self.consts[i].rate * tau).exp();
        self.cached[i] = (tau, d);
        d
    }

    /// Node voltage after `tau` seconds in `state`, starting from `v0` with
    /// drive `u0 + slope * t`.
    fn propagate(&mut self, state: DeviceState, v0: f64, u0: f64, slope: f64, tau: f64) -> f64 {
        let c = self.consts[idx(state)];
        let decay = self.decay(state, tau);
        if slope == 0.0 {
            let target = c.gain * u0;
            return target + (v0 - target) * decay;
        }
        let lag = c.gain * slope / c.rate;
        let start = c.gain * u0 - lag;
        let end = c.gain * (u0 + slope * tau) - lag;
        end + (v0 - start) * decay
    }

    fn triggers(&self, state: DeviceState, v: f64) -> bool {
        let v_dev = v * self.consts[idx(state)].device_share;
        step_state_with(state, v_dev, self.v_th, self.v_h) != state
    }

    /// Advance by `h` seconds with the drive going linearly from `u0` to `u1`.
    /// `on_switch(offset, new_state)` is called for every switch, with the
    /// offset measured from the start of the step.
    pub fn advance(
        &mut self,
        t0: f64,
        h: f64,
        u0: f64,
        u1: f64,
        dt_ref: f64,
        mut on_switch: impl FnMut(f64, DeviceState),
    ) -> Result<()> {
        let slope = if u1 == u0 { 0.0 } else { (u1 - u0) / h };
        let tol = dt_ref * EVENT_TOLERANCE;
        let mut done = 0.0;
        let mut events = 0;
        loop {
            let rem = h - done;
            let u_start = u0 + slope * done;
            let state = self.state;
            let v_end = self.propagate(state, self.v, u_start, slope, rem);
            if !self.triggers(state, v_end) {
                self.v = v_end;
                break;
            }
            let v_start = self.v;
            let (mut lo, mut hi) = (0.0, rem);
            let mut v_hi = v_end;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let v_mid = self.propagate(state, v_start, u_start, slope, mid);
                if self.triggers(state, v_mid) {
                    hi = mid;
                    v_hi = v_mid;
                } else {
                    lo = mid;
                }
            }
            self.v = v_hi;
            done += hi;
            let next = match state {
                DeviceState::Insulating => DeviceState::Metallic,
                DeviceState::Metallic => DeviceState::Insulating,
            };
            self.state = next;
            if next == DeviceState::Insulating {
                self.redraw_thresholds();
            }
            on_switch(done, next);
            events += 1;
            if events > MAX_EVENTS_PER_STEP {
                return Err(Error::SwitchingChatter {
                    t: t0 + done,
                    limit: MAX_EVENTS_PER_STEP,
                });
            }
            if rem - hi <= 0.0 {
                break;
            }
        }
        if !self.v.is_finite() {
            return Err(Error::NonFiniteState { t: t0 + h });
        }
        Ok(())
    }
}
