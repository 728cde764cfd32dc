use serde::{Deserialize, Serialize};

use super::integrator::NodeIntegrator;
use super::{DriveWaveform, NeuronCircuit};
use crate::device::DeviceState;
use crate::error::{Error, Result};

/// Sampled output of one oscillator run. Sample `i` is taken at `t[i] = i * dt`
/// after any switches up to that instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dt: f64,
    pub t: Vec<f64>,
    /// drive voltage at each sample
    pub v_in: Vec<f64>,
    /// capacitor node voltage
    pub v_node: Vec<f64>,
    /// voltage across the sampling resistor
    pub v_spike: Vec<f64>,
    pub state: Vec<DeviceState>,
    /// switch instants and the state entered, strictly increasing in time
    pub switch_events: Vec<(f64, DeviceState)>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    /// Negated copy (node and spike voltages), used for symmetry checks.
    pub fn negated(&self) -> Trace {
        Trace {
            v_in: self.v_in.iter().map(|v| -v).collect(),
            v_node: self.v_node.iter().map(|v| -v).collect(),
            v_spike: self.v_spike.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    /// Mean onset-to-onset interval over onsets at or after `from`, or `None`
    /// with fewer than two such onsets.
    pub fn mean_period(&self, from: f64) -> Option<f64> {
        let onsets: Vec<f64> = self.onsets().filter(|&t| t >= from).collect();
        match onsets.as_slice() {
            [first, .., last] => Some((last - first) / (onsets.len() - 1) as f64),
            _ => None,
        }
    }

    /// Insulator to metal switch times, i.e. spike onsets.
    pub fn onsets(&self) -> impl Iterator<Item = f64> + '_ {
        self.switch_events
            .iter()
            .filter(|(_, s)| s.is_metallic())
            .map(|&(t, _)| t)
    }
}

/// Simulate the oscillator under `drive`, starting unpowered with the
/// device insulating.
pub fn simulate(
    circuit: &NeuronCircuit,
    drive: &DriveWaveform,
    dt: f64,
    seed: Option<u64>,
) -> Result<Trace> {
    drive.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    let mut node = NodeIntegrator::new(circuit, seed)?;
    let tau_min = circuit
        .time_constant(DeviceState::Insulating)
        .min(circuit.time_constant(DeviceState::Metallic));
    if dt > tau_min / 1000.0 {
        log::debug!(
            "dt = {dt:e} s exceeds 1/1000 of the fastest time constant ({tau_min:e} s); switching instants are still bisected"
        );
    }

    let steps = (drive.duration / dt).ceil() as usize;
    let mut trace = Trace {
        dt,
        t: Vec::with_capacity(steps + 1),
        v_in: Vec::with_capacity(steps + 1),
        v_node: Vec::with_capacity(steps + 1),
        v_spike: Vec::with_capacity(steps + 1),
        state: Vec::with_capacity(steps + 1),
        switch_events: Vec::new(),
    };
    let record = |node: &NodeIntegrator, t: f64, trace: &mut Trace| {
        trace.t.push(t);
        trace.v_in.push(drive.value(t));
        trace.v_node.push(node.v);
        trace.v_spike.push(node.spike_voltage());
        trace.state.push(node.state);
    };
    record(&node, 0.0, &mut trace);

    let mut edges = Vec::new();
    for i in 0..steps {
        let a = i as f64 * dt;
        let b = (i + 1) as f64 * dt;
        drive.edges_in(a, b, &mut edges);
        let mut seg_start = a;
        for &seg_end in edges.iter().chain(std::iter::once(&b)) {
            let (u0, u1) = drive.segment(seg_start, seg_end);
            let events = &mut trace.switch_events;
            let t0 = seg_start;
            node.advance(t0, seg_end - seg_start, u0, u1, dt, |off, s| {
                events.push((t0 + off, s))
            })?;
            seg_start = seg_end;
        }
        record(&node, b, &mut trace);
    }
    Ok(trace)
}
