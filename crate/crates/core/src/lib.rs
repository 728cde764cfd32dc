//! Threshold-switching oscillator neurons and a rate-coded spiking network.
//!
//! The stack runs from a two-state hysteretic device model, through an RC
//! relaxation oscillator with event-accurate switching, to characterization
//! sweeps and a back-propagation network that uses the oscillator's
//! drive-to-rate curve as its activation.

pub mod characterization;
pub mod device;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod mnist;
pub mod oscillator;
pub mod report;
pub mod snn;

pub use error::{Error, Result};
