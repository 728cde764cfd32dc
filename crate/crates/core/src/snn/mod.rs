//! Rate-coded spiking network whose activation is the oscillator's
//! drive-to-rate curve.
//!
//! Training and rate-domain inference run entirely in normalized units:
//! drive `z` in `[0, 1]` spans the rising branch of the oscillating band and
//! rate `T(z)` in `[0, 1]` spans `[0, r_max]`. Hardware units only appear in
//! the time-domain path, where every neuron is a full oscillator circuit.

mod network;
mod timedomain;
mod transfer;

pub use network::{
    argmax, evaluate, loss_and_gradients, train, EpochStats, Evaluation, Gradients, Network,
    TrainConfig, TrainHistory, DEFAULT_LAYER_SIZES, NETWORK_FORMAT, NETWORK_VERSION,
};
pub use timedomain::{
    demo_2x2, simulate_2x2, simulate_network_timedomain, Demo2x2, RasterPlot, TimeDomainConfig,
    TimeDomainRun, DEFAULT_DT, NETWORK_SETTLE_FRACTION, TAU_SYN,
};
pub use transfer::{
    build_transfer, Normalization, RateTransfer, DEFAULT_TRANSFER_SAMPLES, MIN_TRANSFER_SAMPLES,
};

use crate::device::device_params;
use crate::oscillator::NeuronCircuit;

pub const DEFAULT_NETWORK_LEVEL: i64 = 4;
pub const DEFAULT_NETWORK_C_PAR: f64 = 180e-12;

/// Neuron circuit used for network layers: level-4 device, 3 kOhm series
/// resistor, 180 pF so a 50 us window holds many cycles.
pub fn network_circuit() -> NeuronCircuit {
    NeuronCircuit::matching(device_params(DEFAULT_NETWORK_LEVEL).expect("level in range"))
        .with_c_par(DEFAULT_NETWORK_C_PAR)
}
