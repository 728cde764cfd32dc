use serde::{Deserialize, Serialize};

use super::Trace;
use crate::device::DeviceState;
use crate::error::{Error, Result};

/// Fraction of a trace discarded as start-up transient.
pub const DEFAULT_SETTLE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Spikes inside the steady window `[window_start, window_start + window]`.
/// `rate == spike_times.len() / window` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub spike_times: Vec<f64>,
    pub polarity: Vec<Polarity>,
    pub rate: f64,
    pub window_start: f64,
    pub window: f64,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.spike_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_times.is_empty()
    }

    pub fn count(&self, p: Polarity) -> usize {
        self.polarity.iter().filter(|&&q| q == p).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    UnFiring,
    Oscillating,
    Firing,
}

fn settle_time(trace: &Trace, settle_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&settle_fraction) {
        return Err(Error::InvalidParameter(
            "settle fraction must be in [0, 1)".into(),
        ));
    }
    let duration = trace.duration();
    let settle = settle_fraction * duration;
    if trace.len() < 2 || settle >= duration {
        return Err(Error::WindowTooShort { settle, duration });
    }
    Ok(settle)
}

/// [`extract_spikes_with`] using the default settle fraction.
pub fn extract_spikes(trace: &Trace, v_thresh: f64) -> Result<SpikeTrain> {
    extract_spikes_with(trace, v_thresh, DEFAULT_SETTLE_FRACTION)
}

/// One spike per upward crossing of `|v_spike|` through `v_thresh`, timed by
/// linear interpolation between samples. Polarity is the sign of `v_spike`
/// after the crossing.
pub fn extract_spikes_with(
    trace: &Trace,
    v_thresh: f64,
    settle_fraction: f64,
) -> Result<SpikeTrain> {
    if !(v_thresh > 0.0) {
        return Err(Error::InvalidParameter(
            "spike threshold must be > 0".into(),
        ));
    }
    let settle = settle_time(trace, settle_fraction)?;
    let mut spike_times = Vec::new();
    let mut polarity = Vec::new();
    for (i, w) in trace.v_spike.windows(2).enumerate() {
        let (a, b) = (w[0].abs(), w[1].abs());
        if a < v_thresh && b >= v_thresh {
            let frac = (v_thresh - a) / (b - a);
            let t = trace.t[i] + frac * (trace.t[i + 1] - trace.t[i]);
            if t < settle {
                continue;
            }
            spike_times.push(t);
            polarity.push(if w[1] > 0.0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            });
        }
    }
    let window = trace.duration() - settle;
    Ok(SpikeTrain {
        rate: spike_times.len() as f64 / window,
        spike_times,
        polarity,
        window_start: settle,
        window,
    })
}

/// [`classify_response_with`] using the default settle fraction.
pub fn classify_response(trace: &Trace) -> Result<Response> {
    classify_response_with(trace, DEFAULT_SETTLE_FRACTION)
}

/// Label the steady window: insulating throughout, metallic throughout, or
/// at least two complete switching cycles.
pub fn classify_response_with(trace: &Trace, settle_fraction: f64) -> Result<Response> {
    let settle = settle_time(trace, settle_fraction)?;
    let first = trace.t.partition_point(|&t| t < settle);
    let states = &trace.state[first..];
    if states.iter().all(|&s| s == DeviceState::Insulating) {
        return Ok(Response::UnFiring);
    }
    if states.iter().all(|&s| s == DeviceState::Metallic) {
        return Ok(Response::Firing);
    }
    let (mut up, mut down) = (0, 0);
    for &(t, s) in &trace.switch_events {
        if t >= settle {
            match s {
                DeviceState::Metallic => up += 1,
                DeviceState::Insulating => down += 1,
            }
        }
    }
    if up >= 2 && down >= 2 {
        Ok(Response::Oscillating)
    } else {
        Err(Error::Ambiguous)
    }
}
