//! Single-neuron relaxation oscillator.
//!
//! Topology: source `V_in` feeds the node through `r_series`; `c_par` holds the
//! node to ground; the device in series with the small `r_sample` also runs
//! from the node to ground. The voltage across `r_sample` is the spike output.

mod analytic;
mod drive;
pub(crate) mod integrator;
mod simulate;
mod spikes;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, DeviceState};
use crate::error::{Error, Result};

pub use analytic::{
    average_power, band_edges, closed_form_period, oscillating_band, suggested_run, Band, Cycle,
    Oscillation,
};
pub use drive::{DriveKind, DriveWaveform, PRESET_NAMES};
pub use simulate::{simulate, Trace};
pub use spikes::{
    classify_response, classify_response_with, extract_spikes, extract_spikes_with, Polarity,
    Response, SpikeTrain, DEFAULT_SETTLE_FRACTION,
};

pub const DEFAULT_R_SERIES: f64 = 3_000.0;
pub const DEFAULT_C_PAR: f64 = 1.8e-9;
pub const DEFAULT_R_SAMPLE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronCircuit {
    pub device: DeviceParams,
    pub r_series: f64,
    pub c_par: f64,
    pub r_sample: f64,
}

impl NeuronCircuit {
    /// The 3 kOhm / 1.8 nF matching circuit with a 50 Ohm sampling resistor.
    pub fn matching(device: DeviceParams) -> Self {
        NeuronCircuit {
            device,
            r_series: DEFAULT_R_SERIES,
            c_par: DEFAULT_C_PAR,
            r_sample: DEFAULT_R_SAMPLE,
        }
    }

    pub fn with_r_series(mut self, r: f64) -> Self {
        self.r_series = r;
        self
    }

    pub fn with_c_par(mut self, c: f64) -> Self {
        self.c_par = c;
        self
    }

    /// Resistance of the device branch (device plus sampling resistor).
    pub fn branch_resistance(&self, state: DeviceState) -> f64 {
        self.device.resistance(state) + self.r_sample
    }

    /// Node voltage at which the device voltage reaches `v_th` (insulating).
    pub fn node_switch_up(&self) -> f64 {
        self.device.v_th * self.branch_resistance(DeviceState::Insulating) / self.device.r_ins
    }

    /// Node voltage at which the device voltage falls to `v_h` (metallic).
    pub fn node_switch_down(&self) -> f64 {
        self.device.v_h * self.branch_resistance(DeviceState::Metallic) / self.device.r_met
    }

    /// Relaxation time constant `c_par * (r_series || r_branch)`.
    pub fn time_constant(&self, state: DeviceState) -> f64 {
        let rp = self.branch_resistance(state);
        self.c_par * self.r_series * rp / (self.r_series + rp)
    }

    /// Spike-output amplitude right after an insulator-metal switch.
    pub fn metallic_spike_amplitude(&self) -> f64 {
        self.node_switch_up() * self.r_sample / self.branch_resistance(DeviceState::Metallic)
    }

    /// Default spike detection level: half the metallic spike amplitude.
    pub fn default_spike_threshold(&self) -> f64 {
        0.5 * self.metallic_spike_amplitude()
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        if !(self.r_series > 0.0 && self.c_par > 0.0 && self.r_sample > 0.0) {
            return Err(Error::InvalidParameter(
                "r_series, c_par and r_sample must all be > 0".into(),
            ));
        }
        // r_sample must not dominate even the metallic branch
        if self.r_sample >= 0.5 * self.device.r_met {
            return Err(Error::InvalidParameter(
                "sampling resistor must be below half the metallic resistance".into(),
            ));
        }
        // After an upward switch the node still sits at the switch-up voltage;
        // the metallic device must then hold or the model chatters.
        let v_dev_after = self.node_switch_up() * self.device.r_met
            / self.branch_resistance(DeviceState::Metallic);
        if v_dev_after <= self.device.v_h {
            return Err(Error::InvalidParameter(format!(
                "level {}: metallic state cannot hold after switching ({v_dev_after:.4} V <= v_h)",
                self.device.level
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{device_params, DeviceTable};

    #[test]
    fn every_default_level_is_a_valid_matching_circuit() {
        for p in DeviceTable::default().levels() {
            NeuronCircuit::matching(*p).validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_circuits() {
        let c = NeuronCircuit::matching(device_params(1).unwrap());
        assert!(c.with_r_series(0.0).validate().is_err());
        assert!(c.with_c_par(-1.0).validate().is_err());
        let big_sample = NeuronCircuit {
            r_sample: 20_000.0,
            ..c
        };
        assert!(big_sample.validate().is_err());
    }
}
