use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oscillator::{closed_form_period, oscillating_band, NeuronCircuit};

pub const MIN_TRANSFER_SAMPLES: usize = 16;
pub const DEFAULT_TRANSFER_SAMPLES: usize = 96;
/// Knots below this fraction of the band are spaced geometrically to follow
/// the steep onset.
const ONSET_SPAN: f64 = 0.05;
const FIRST_KNOT: f64 = 1e-3;

/// Maps the oscillating band `[v_lo, v_hi]` onto `[0, 1]` and rates onto
/// `[0, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub v_lo: f64,
    pub v_hi: f64,
    pub r_max: f64,
}

/// Piecewise-linear drive-to-rate curve of one oscillator neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransferRepr")]
pub struct RateTransfer {
    pub circuit: NeuronCircuit,
    pub v_knots: Vec<f64>,
    pub r_knots: Vec<f64>,
    pub v_on: f64,
    pub v_latch: f64,
    pub normalization: Normalization,
    #[serde(skip)]
    z_knots: Vec<f64>,
    #[serde(skip)]
    y_knots: Vec<f64>,
}

#[derive(Deserialize)]
struct TransferRepr {
    circuit: NeuronCircuit,
    v_knots: Vec<f64>,
    r_knots: Vec<f64>,
    v_latch: f64,
    normalization: Normalization,
}

impl TryFrom<TransferRepr> for RateTransfer {
    type Error = Error;

    fn try_from(r: TransferRepr) -> Result<Self> {
        RateTransfer::from_knots(r.circuit, r.v_knots, r.r_knots, r.v_latch, r.normalization)
    }
}

/// Sample the closed-form frequency on the rising branch `[v_on, v_peak]`.
pub fn build_transfer(circuit: &NeuronCircuit, n_samples: usize) -> Result<RateTransfer> {
    if n_samples < MIN_TRANSFER_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "transfer needs at least {MIN_TRANSFER_SAMPLES} samples"
        )));
    }
    circuit.validate()?;
    let band = oscillating_band(circuit).ok_or(Error::NoOscillatingBand {
        level: circuit.device.level,
    })?;
    let n_onset = n_samples / 4;
    let n_uniform = n_samples - 1 - n_onset;
    let mut fractions = vec![0.0];
    let ratio = ONSET_SPAN / FIRST_KNOT;
    fractions.extend((0..n_onset).map(|k| FIRST_KNOT * ratio.powf(k as f64 / n_onset as f64)));
    fractions.extend(
        (0..n_uniform).map(|k| ONSET_SPAN + (1.0 - ONSET_SPAN) * (k + 1) as f64 / n_uniform as f64),
    );
    let span = band.v_peak - band.v_on;
    let v_knots: Vec<f64> = fractions.iter().map(|f| band.v_on + f * span).collect();
    let mut r_knots: Vec<f64> = v_knots
        .iter()
        .map(|&v| closed_form_period(circuit, v).frequency())
        .collect();
    r_knots[0] = 0.0;
    let r_max = r_knots[n_samples - 1];
    RateTransfer::from_knots(
        *circuit,
        v_knots,
        r_knots,
        band.v_latch,
        Normalization {
            v_lo: band.v_on,
            v_hi: band.v_peak,
            r_max,
        },
    )
}

impl RateTransfer {
    pub fn from_knots(
        circuit: NeuronCircuit,
        v_knots: Vec<f64>,
        r_knots: Vec<f64>,
        v_latch: f64,
        normalization: Normalization,
    ) -> Result<Self> {
        let mut t = RateTransfer {
            circuit,
            v_on: v_knots.first().copied().unwrap_or(f64::NAN),
            v_knots,
            r_knots,
            v_latch,
            normalization,
            z_knots: Vec::new(),
            y_knots: Vec::new(),
        };
        t.rebuild()?;
        Ok(t)
    }

    fn rebuild(&mut self) -> Result<()> {
        let n = self.v_knots.len();
        let Normalization { v_lo, v_hi, r_max } = self.normalization;
        let bad = |m: &str| Err(Error::InvalidParameter(format!("transfer: {m}")));
        if n < 2 || self.r_knots.len() != n {
            return bad("need at least two knots of each kind");
        }
        if self.v_knots.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("voltage knots must be strictly increasing");
        }
        if self.r_knots.iter().any(|&r| !(r >= 0.0 && r.is_finite())) || self.r_knots[0] != 0.0 {
            return bad("rates must be finite, non-negative and zero at onset");
        }
        if self.r_knots.windows(2).any(|w| w[1] < w[0]) {
            return bad("rates must be non-decreasing");
        }
        if !(v_hi > v_lo && r_max > 0.0) {
            return bad("degenerate normalization");
        }
        self.v_on = self.v_knots[0];
        let span = v_hi - v_lo;
        self.z_knots = self.v_knots.iter().map(|v| (v - v_lo) / span).collect();
        self.y_knots = self.r_knots.iter().map(|r| r / r_max).collect();
        Ok(())
    }

    pub fn to_volts(&self, z: f64) -> f64 {
        let Normalization { v_lo, v_hi, .. } = self.normalization;
        v_lo + z.clamp(0.0, 1.0) * (v_hi - v_lo)
    }

    pub fn to_normalized(&self, v: f64) -> f64 {
        let Normalization { v_lo, v_hi, .. } = self.normalization;
        (v - v_lo) / (v_hi - v_lo)
    }

    /// Knot positions in the normalized domain, where the slope can jump.
    pub fn kinks(&self) -> &[f64] {
        &self.z_knots
    }

    fn segment(&self, z: f64) -> Option<usize> {
        let k = self.z_knots.partition_point(|&zk| zk < z);
        (k > 0 && k < self.z_knots.len()).then(|| k - 1)
    }

    /// Normalized rate at normalized drive `z`; clamps outside the knots.
    pub fn eval(&self, z: f64) -> f64 {
        match self.segment(z) {
            Some(k) => {
                let (z0, z1) = (self.z_knots[k], self.z_knots[k + 1]);
                let (y0, y1) = (self.y_knots[k], self.y_knots[k + 1]);
                y0 + (y1 - y0) * (z - z0) / (z1 - z0)
            }
            None if z <= self.z_knots[0] => self.y_knots[0],
            None => self.y_knots[self.y_knots.len() - 1],
        }
    }

    /// Left derivative of [`eval`](Self::eval); zero where clamped.
    pub fn derivative(&self, z: f64) -> f64 {
        match self.segment(z) {
            Some(k) => {
                (self.y_knots[k + 1] - self.y_knots[k]) / (self.z_knots[k + 1] - self.z_knots[k])
            }
            None => 0.0,
        }
    }

    /// Firing rate in hertz at drive `v` volts.
    pub fn rate(&self, v: f64) -> f64 {
        self.eval(self.to_normalized(v)) * self.normalization.r_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::device_params;

    fn transfer(level: i64) -> RateTransfer {
        build_transfer(
            &NeuronCircuit::matching(device_params(level).unwrap()),
            DEFAULT_TRANSFER_SAMPLES,
        )
        .unwrap()
    }

    #[test]
    fn onset_and_clamping() {
        let t = transfer(1);
        assert_eq!(t.eval(0.0), 0.0);
        assert_eq!(t.eval(-3.0), 0.0);
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(7.0), 1.0);
        assert_eq!(t.rate(t.v_on), 0.0);
        assert_eq!(t.derivative(0.0), 0.0);
        assert_eq!(t.derivative(1.5), 0.0);
        assert!(t.derivative(1.0) > 0.0);
        assert!(t.v_latch > t.normalization.v_hi);
    }

    #[test]
    fn monotone_and_close_to_closed_form() {
        let t = transfer(4);
        let c = t.circuit;
        let mut last = 0.0;
        for i in 0..=1000 {
            let z = i as f64 / 1000.0;
            let y = t.eval(z);
            assert!(y >= last);
            last = y;
            if z >= 0.05 {
                let exact = closed_form_period(&c, t.to_volts(z)).frequency();
                let rel = (t.rate(t.to_volts(z)) - exact).abs() / exact;
                // linear interpolation error, second order in the knot spacing
                assert!(rel < 5e-3, "z {z}: {rel}");
            }
        }
    }

    #[test]
    fn left_derivative_at_knots() {
        let t = transfer(2);
        let k = 30;
        let z = t.kinks()[k];
        let left = (t.eval(z) - t.eval(z - 1e-9)) / 1e-9;
        assert!((t.derivative(z) - left).abs() / left < 1e-4);
    }

    #[test]
    fn json_round_trip_restores_cache() {
        let t = transfer(3);
        let back: RateTransfer = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.eval(0.37), t.eval(0.37));
    }

    #[test]
    fn level5_and_sample_count() {
        let c5 = NeuronCircuit::matching(device_params(5).unwrap());
        assert!(matches!(
            build_transfer(&c5, 64),
            Err(Error::NoOscillatingBand { level: 5 })
        ));
        let c1 = NeuronCircuit::matching(device_params(1).unwrap());
        assert!(build_transfer(&c1, 15).is_err());
    }

    #[test]
    fn mid_band_rate_matches_simulated_spikes() {
        use crate::oscillator::{extract_spikes, simulate, suggested_run, DriveWaveform};
        let t = transfer(1);
        let c = t.circuit;
        let v = t.to_volts(0.5);
        let (duration, dt) = suggested_run(&c, v, 40.0);
        let trace = simulate(&c, &DriveWaveform::constant(v, duration), dt, None).unwrap();
        let spikes = extract_spikes(&trace, c.default_spike_threshold()).unwrap();
        let s = &spikes.spike_times;
        let simulated = (s.len() - 1) as f64 / (s[s.len() - 1] - s[0]);
        assert!((t.rate(v) - simulated).abs() / simulated < 0.02);
    }
}
