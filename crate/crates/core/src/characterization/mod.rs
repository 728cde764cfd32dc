//! Device and neuron characterization sweeps: quasi-static I-V curves,
//! threshold-cycling statistics, tri-state phase diagrams and the
//! frequency/power curves of the oscillating band.

mod curves;
mod iv;
mod phase;
mod stats;

pub use curves::{
    band_points, cross_check, frequency_to_drive, power_at_frequency, power_curve, vf_curve,
    CrossCheck, CurveKind, CurvePoint, CurveSeries,
};
pub use iv::{iv_sweep, Branch, IVCurve, IvPoint, DEFAULT_LOAD_RESISTOR, MIN_SWEEP_STEPS};
pub use phase::{
    cross_validate, phase_diagram, CellCheck, PhaseDiagram, DEFAULT_R_RANGE, DEFAULT_V_RANGE,
};
pub use stats::{threshold_stats, ThresholdStats, STATS_SWEEP_STEPS};
