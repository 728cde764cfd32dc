use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::oscillator::{
    average_power, closed_form_period, oscillating_band, simulate, suggested_run, DriveWaveform,
    NeuronCircuit, Response, Trace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// frequency against drive voltage
    VoltageFrequency,
    /// average power against frequency
    PowerFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub v_in: f64,
    pub response: Response,
    /// `None` for non-oscillating (flagged) points
    pub frequency: Option<f64>,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub level: u8,
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

impl CurveSeries {
    /// Plotted `(x, y)` pairs; flagged points are skipped.
    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| {
                let f = p.frequency?;
                Some(match self.kind {
                    CurveKind::VoltageFrequency => (p.v_in, f),
                    CurveKind::PowerFrequency => (f, p.power),
                })
            })
            .collect()
    }

    pub fn flagged(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(|p| p.frequency.is_none())
    }
}

fn evaluate(circuit: &NeuronCircuit, kind: CurveKind, v_points: &[f64]) -> Result<CurveSeries> {
    circuit.validate()?;
    if v_points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "drive points must be strictly increasing".into(),
        ));
    }
    let points = v_points
        .iter()
        .map(|&v| {
            let osc = closed_form_period(circuit, v);
            CurvePoint {
                v_in: v,
                response: osc.response(),
                frequency: osc.period().map(|t| 1.0 / t),
                power: average_power(circuit, v),
            }
        })
        .collect();
    Ok(CurveSeries {
        level: circuit.device.level,
        kind,
        points,
    })
}

pub fn vf_curve(circuit: &NeuronCircuit, v_points: &[f64]) -> Result<CurveSeries> {
    evaluate(circuit, CurveKind::VoltageFrequency, v_points)
}

pub fn power_curve(circuit: &NeuronCircuit, v_points: &[f64]) -> Result<CurveSeries> {
    evaluate(circuit, CurveKind::PowerFrequency, v_points)
}

/// `n` drives evenly spaced over `(v_on, v_peak]`.
pub fn band_points(circuit: &NeuronCircuit, n: usize) -> Result<Vec<f64>> {
    let band = oscillating_band(circuit).ok_or(Error::NoOscillatingBand {
        level: circuit.device.level,
    })?;
    Ok((1..=n)
        .map(|i| band.v_on + (band.v_peak - band.v_on) * i as f64 / n as f64)
        .collect())
}

/// Drive on the rising branch `[v_on, v_peak]` that oscillates at `f`.
pub fn frequency_to_drive(circuit: &NeuronCircuit, f: f64) -> Option<f64> {
    let band = oscillating_band(circuit)?;
    if !(f > 0.0 && f <= band.f_peak) {
        return None;
    }
    let (mut lo, mut hi) = (band.v_on, band.v_peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if closed_form_period(circuit, mid).frequency() < f {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Average power when oscillating at `f` on the rising branch.
pub fn power_at_frequency(circuit: &NeuronCircuit, f: f64) -> Option<f64> {
    frequency_to_drive(circuit, f).map(|v| average_power(circuit, v))
}

/// Closed form against a fine-step simulation at one drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub v_in: f64,
    pub frequency: f64,
    pub simulated_frequency: f64,
    pub power: f64,
    pub simulated_power: f64,
}

impl CrossCheck {
    pub fn frequency_error(&self) -> f64 {
        (self.simulated_frequency - self.frequency).abs() / self.frequency
    }

    pub fn power_error(&self) -> f64 {
        (self.simulated_power - self.power).abs() / self.power
    }
}

/// Trapezoid-rule mean of `v_in * i_source` between the first and last
/// spike onsets of the steady window.
fn simulated_power(trace: &Trace, r_series: f64, from: f64) -> Option<f64> {
    let onsets: Vec<f64> = trace.onsets().filter(|&t| t >= from).collect();
    let (&a, &b) = (onsets.first()?, onsets.last()?);
    if b <= a {
        return None;
    }
    let p = |i: usize| trace.v_in[i] * (trace.v_in[i] - trace.v_node[i]) / r_series;
    let i0 = trace.t.partition_point(|&t| t < a);
    let i1 = trace.t.partition_point(|&t| t <= b) - 1;
    let mut e = 0.0;
    for i in i0..i1 {
        e += 0.5 * (p(i) + p(i + 1)) * (trace.t[i + 1] - trace.t[i]);
    }
    Some(e / (trace.t[i1] - trace.t[i0]))
}

/// Cross-check `n` seeded random oscillating points of a series against
/// fine-step simulation (`steps_per_period` samples per cycle).
pub fn cross_check(
    circuit: &NeuronCircuit,
    series: &CurveSeries,
    n: usize,
    seed: u64,
    steps_per_period: f64,
    exec: Execution,
) -> Result<Vec<CrossCheck>> {
    let candidates: Vec<&CurvePoint> = series
        .points
        .iter()
        .filter(|p| p.frequency.is_some())
        .collect();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<CurvePoint> = (0..n)
        .map(|_| *candidates[rng.random_range(0..candidates.len())])
        .collect();
    try_map_indexed(picks.len(), exec, |k| {
        let p = picks[k];
        let f = p.frequency.expect("filtered to oscillating points");
        let (duration, _) = suggested_run(circuit, p.v_in, 30.0);
        let trace = simulate(
            circuit,
            &DriveWaveform::constant(p.v_in, duration),
            1.0 / (f * steps_per_period),
            None,
        )?;
        let from = 0.1 * duration;
        let period = trace.mean_period(from).ok_or(Error::Ambiguous)?;
        Ok(CrossCheck {
            v_in: p.v_in,
            frequency: f,
            simulated_frequency: 1.0 / period,
            power: p.power,
            simulated_power: simulated_power(&trace, circuit.r_series, from)
                .ok_or(Error::Ambiguous)?,
        })
    })
}
