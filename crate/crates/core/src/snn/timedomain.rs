use ndarray::{arr1, arr2, Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{argmax, Network, RateTransfer};
use crate::error::{Error, Result};
use crate::oscillator::integrator::NodeIntegrator;

/// Synaptic low-pass time constant.
pub const TAU_SYN: f64 = 2e-6;
pub const DEFAULT_DT: f64 = 2e-9;
/// Network runs settle longer than single neurons: each layer waits for the
/// synaptic filter of the one before it.
pub const NETWORK_SETTLE_FRACTION: f64 = 0.2;
/// The window must hold ten cycles at this fraction of `r_max`.
const MIN_RESOLVED_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainConfig {
    pub window: f64,
    pub dt: f64,
    pub tau_syn: f64,
    pub settle_fraction: f64,
    /// required when the neuron circuit has threshold jitter
    pub seed: Option<u64>,
}

impl Default for TimeDomainConfig {
    fn default() -> Self {
        TimeDomainConfig {
            window: crate::mnist::DEFAULT_WINDOW,
            dt: DEFAULT_DT,
            tau_syn: TAU_SYN,
            settle_fraction: NETWORK_SETTLE_FRACTION,
            seed: None,
        }
    }
}

/// Spike onset times per neuron over `[0, window]`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterPlot {
    pub window: f64,
    pub spikes: Vec<Vec<f64>>,
}

impl RasterPlot {
    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainRun {
    /// one raster per layer, input layer first
    pub layers: Vec<RasterPlot>,
    /// steady-window rate per neuron in hertz, per layer
    pub rates: Vec<Vec<f64>>,
    pub settle: f64,
    pub predicted: usize,
}

impl TimeDomainRun {
    pub fn output_rates(&self) -> &[f64] {
        self.rates.last().expect("at least one layer")
    }
}

/// Rate from spikes after `settle`: mean inter-spike interval when there
/// are two or more, else count over the steady window.
fn steady_rate(spikes: &[f64], settle: f64, window: f64) -> f64 {
    let steady = &spikes[spikes.partition_point(|&t| t < settle)..];
    match steady {
        [] => 0.0,
        [_] => 1.0 / (window - settle),
        [first, .., last] => (steady.len() - 1) as f64 / (last - first),
    }
}

fn neuron_seed(seed: u64, layer: usize, index: usize) -> u64 {
    seed ^ ((layer as u64) << 32 | index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Run every neuron as an oscillator on a shared clock. Input neuron `i` is
/// held at `input_drives[i]` volts; every later neuron is driven at
/// `to_volts(b + W s)`, where `s` is the presynaptic spike trains filtered by
/// an exponential kernel of unit area and expressed in units of `r_max`.
pub fn simulate_network_timedomain(
    net: &Network,
    input_drives: &[f64],
    cfg: &TimeDomainConfig,
) -> Result<TimeDomainRun> {
    net.validate()?;
    let sizes = net.layer_sizes();
    if input_drives.len() != sizes[0] {
        return Err(Error::ShapeMismatch {
            expected: sizes[0],
            got: input_drives.len(),
        });
    }
    if !(cfg.dt > 0.0 && cfg.tau_syn > 0.0 && (0.0..1.0).contains(&cfg.settle_fraction)) {
        return Err(Error::InvalidParameter(
            "need dt > 0, tau_syn > 0, settle in [0, 1)".into(),
        ));
    }
    let transfer = &net.transfer;
    let r_max = transfer.normalization.r_max;
    let settle = cfg.settle_fraction * cfg.window;
    if !(cfg.window * (1.0 - cfg.settle_fraction) >= 10.0 / (MIN_RESOLVED_RATE * r_max)) {
        return Err(Error::WindowTooShort {
            settle,
            duration: cfg.window,
        });
    }

    let circuit = transfer.circuit;
    let mut neurons = Vec::with_capacity(sizes.len());
    for (l, &n) in sizes.iter().enumerate() {
        let layer = (0..n)
            .map(|i| NodeIntegrator::new(&circuit, cfg.seed.map(|s| neuron_seed(s, l, i))))
            .collect::<Result<Vec<_>>>()?;
        neurons.push(layer);
    }
    // transposed weights: row j is the fan-out of presynaptic neuron j
    let fan_out: Vec<Array2<f64>> = net.weights.iter().map(|w| w.t().to_owned()).collect();
    let mut syn: Vec<Array1<f64>> = net.biases.iter().map(|b| Array1::zeros(b.len())).collect();
    let mut spikes: Vec<Vec<Vec<f64>>> = sizes.iter().map(|&n| vec![Vec::new(); n]).collect();
    let mut fired: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sizes.len()];
    let decay = (-cfg.dt / cfg.tau_syn).exp();
    let gain = 1.0 / (cfg.tau_syn * r_max);
    let mut drives: Vec<f64> = Vec::new();

    let steps = (cfg.window / cfg.dt).ceil() as usize;
    for step in 0..steps {
        let t0 = step as f64 * cfg.dt;
        let t1 = t0 + cfg.dt;
        for (l, layer) in neurons.iter_mut().enumerate() {
            drives.clear();
            if l == 0 {
                drives.extend_from_slice(input_drives);
            } else {
                let b = &net.biases[l - 1];
                drives.extend(
                    syn[l - 1]
                        .iter()
                        .zip(b)
                        .map(|(s, b)| transfer.to_volts(s + b)),
                );
            }
            let out = &mut fired[l];
            out.clear();
            for (i, node) in layer.iter_mut().enumerate() {
                let v = drives[i];
                node.advance(t0, cfg.dt, v, v, cfg.dt, |off, s| {
                    if s.is_metallic() {
                        out.push((i, t0 + off));
                    }
                })?;
            }
            for &(i, t) in out.iter() {
                spikes[l][i].push(t);
            }
        }
        for (l, s) in syn.iter_mut().enumerate() {
            *s *= decay;
            for &(j, t) in &fired[l] {
                s.scaled_add(gain * (-(t1 - t) / cfg.tau_syn).exp(), &fan_out[l].row(j));
            }
        }
    }

    let window = steps as f64 * cfg.dt;
    let rates: Vec<Vec<f64>> = spikes
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|s| steady_rate(s, settle, window))
                .collect()
        })
        .collect();
    let predicted = argmax(rates.last().expect("non-empty"));
    Ok(TimeDomainRun {
        layers: spikes
            .into_iter()
            .map(|spikes| RasterPlot { window, spikes })
            .collect(),
        rates,
        settle,
        predicted,
    })
}

/// Two input neurons at equal drive feeding two outputs through signed
/// weights. `weights[o][i]` connects input `i` to output `o`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demo2x2 {
    pub weights: [[f64; 2]; 2],
    pub biases: [f64; 2],
    /// normalized drive of both input neurons
    pub input: f64,
}

impl Default for Demo2x2 {
    /// Output 1 gets two excitatory synapses, output 2 two inhibitory ones.
    fn default() -> Self {
        Demo2x2 {
            weights: [[0.4, 0.4], [-0.1, -0.1]],
            biases: [0.3, 0.3],
            input: 0.5,
        }
    }
}

impl Demo2x2 {
    pub fn network(&self, transfer: &RateTransfer) -> Result<Network> {
        let w = self.weights;
        Network::from_parts(vec![arr2(&w)], vec![arr1(&self.biases)], transfer.clone())
    }
}

/// Time-domain 2x2 run. Rates are ordered `[v(1,1), v(1,2), v(2,1), v(2,2)]`
/// in the returned `rates` (inputs then outputs).
pub fn simulate_2x2(
    demo: &Demo2x2,
    transfer: &RateTransfer,
    cfg: &TimeDomainConfig,
) -> Result<TimeDomainRun> {
    let net = demo.network(transfer)?;
    let z = [demo.input; 2];
    let expected = net.forward(&z)?;
    let r_max = transfer.normalization.r_max;
    let slowest = expected
        .iter()
        .flat_map(|a| a.iter().copied())
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    let steady = cfg.window * (1.0 - cfg.settle_fraction);
    if slowest.is_finite() && steady * slowest * r_max < 10.0 {
        return Err(Error::WindowTooShort {
            settle: cfg.window - steady,
            duration: cfg.window,
        });
    }
    let drives = z.map(|z| transfer.to_volts(z));
    simulate_network_timedomain(&net, &drives, cfg)
}

/// The shipped 2x2 demonstration.
pub fn demo_2x2(
    transfer: &RateTransfer,
    cfg: &TimeDomainConfig,
) -> Result<(Demo2x2, TimeDomainRun)> {
    let demo = Demo2x2::default();
    Ok((demo, simulate_2x2(&demo, transfer, cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{build_transfer, network_circuit};

    fn transfer() -> RateTransfer {
        build_transfer(&network_circuit(), 64).unwrap()
    }

    #[test]
    fn steady_rate_estimators() {
        assert_eq!(steady_rate(&[], 1.0, 10.0), 0.0);
        assert_eq!(steady_rate(&[0.5, 2.0], 1.0, 10.0), 1.0 / 9.0);
        assert_eq!(steady_rate(&[2.0, 4.0, 6.0], 1.0, 10.0), 0.5);
    }

    #[test]
    fn single_neuron_matches_transfer() {
        let t = transfer();
        let net = Network::zeros(&[1, 1], t.clone()).unwrap();
        for z in [0.1, 0.3, 0.6, 0.9] {
            let run =
                simulate_network_timedomain(&net, &[t.to_volts(z)], &TimeDomainConfig::default())
                    .unwrap();
            let expect = t.eval(z) * t.normalization.r_max;
            let got = run.rates[0][0];
            assert!(
                (got - expect).abs() / expect < 0.02,
                "z {z}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn zero_input_zero_network_is_silent() {
        let t = transfer();
        let net = Network::zeros(&[3, 2, 2], t.clone()).unwrap();
        let run =
            simulate_network_timedomain(&net, &[t.to_volts(0.0); 3], &TimeDomainConfig::default())
                .unwrap();
        assert!(run.layers.iter().all(|r| r.total_spikes() == 0));
    }

    #[test]
    fn short_window_is_rejected() {
        let t = transfer();
        let net = Network::zeros(&[1, 1], t.clone()).unwrap();
        let cfg = TimeDomainConfig {
            window: 1e-6,
            ..Default::default()
        };
        assert!(matches!(
            simulate_network_timedomain(&net, &[5.0], &cfg),
            Err(Error::WindowTooShort { .. })
        ));
    }

    #[test]
    fn demo_ordering() {
        let (_, run) = demo_2x2(&transfer(), &TimeDomainConfig::default()).unwrap();
        let (v11, v12) = (run.rates[0][0], run.rates[0][1]);
        let (v21, v22) = (run.rates[1][0], run.rates[1][1]);
        assert_eq!(v11, v12);
        assert!(
            v21 > v11 && v11 > v22 && v22 > 0.0,
            "{v11} {v12} {v21} {v22}"
        );
    }

    #[test]
    fn symmetric_weights_give_equal_outputs() {
        let demo = Demo2x2 {
            weights: [[0.3, 0.3], [0.3, 0.3]],
            ..Default::default()
        };
        let run = simulate_2x2(&demo, &transfer(), &TimeDomainConfig::default()).unwrap();
        assert_eq!(run.rates[1][0], run.rates[1][1]);
    }
}
