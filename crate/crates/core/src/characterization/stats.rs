use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::iv::{iv_sweep_with, DEFAULT_LOAD_RESISTOR};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};

/// Sweep resolution for per-cycle threshold extraction.
pub const STATS_SWEEP_STEPS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub level: u8,
    pub seed: u64,
    pub jitter_sigma: f64,
    /// device-referred extracted thresholds, ascending
    pub thresholds: Vec<f64>,
    pub mean: f64,
    /// population standard deviation
    pub std: f64,
}

impl ThresholdStats {
    /// Empirical cumulative distribution as `(v_th, fraction <= v_th)`.
    pub fn cdf(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.thresholds.len() as f64;
        self.thresholds
            .iter()
            .enumerate()
            .map(move |(i, &v)| (v, (i + 1) as f64 / n))
    }

    pub fn relative_spread(&self) -> f64 {
        self.std / self.mean
    }
}

/// Repeat the I-V sweep `n_cycles` times with thresholds drawn from the
/// device jitter. Cycle `k` uses ChaCha stream `k` of `seed`, so the result
/// does not depend on evaluation order.
pub fn threshold_stats(
    device: &DeviceParams,
    n_cycles: usize,
    seed: u64,
    exec: Execution,
) -> Result<ThresholdStats> {
    device.validate()?;
    if n_cycles == 0 {
        return Err(Error::EmptyRun);
    }
    let normal = Normal::new(0.0, device.jitter_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let v_max =
        1.5 * (device.v_th + 6.0 * device.jitter_sigma) * (device.r_ins + DEFAULT_LOAD_RESISTOR)
            / device.r_ins;
    let mut thresholds = try_map_indexed(n_cycles, exec, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let (th, h) = loop {
            let th = device.v_th + normal.sample(&mut rng);
            let h = device.v_h + normal.sample(&mut rng);
            if h > 0.0 && h < th {
                break (th, h);
            }
        };
        let curve = iv_sweep_with(
            device,
            th,
            h,
            v_max,
            STATS_SWEEP_STEPS,
            DEFAULT_LOAD_RESISTOR,
        )?;
        curve.v_th_device.ok_or(Error::NoSwitch { v_max })
    })?;
    thresholds.sort_by(f64::total_cmp);

    // shifted moments: identical samples give exactly zero spread
    let x0 = thresholds[0];
    let n = n_cycles as f64;
    let mean_shift = thresholds.iter().map(|x| x - x0).sum::<f64>() / n;
    let var = thresholds
        .iter()
        .map(|x| (x - x0 - mean_shift).powi(2))
        .sum::<f64>()
        / n;
    Ok(ThresholdStats {
        level: device.level,
        seed,
        jitter_sigma: device.jitter_sigma,
        mean: x0 + mean_shift,
        std: var.sqrt(),
        thresholds,
    })
}
