use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RateTransfer;
use crate::error::{file_error, Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::mnist::{pixel_value, Dataset};

pub const DEFAULT_LAYER_SIZES: [usize; 3] = [784, 128, 10];
pub const NETWORK_FORMAT: &str = "vo2snn-network";
pub const NETWORK_VERSION: u32 = 1;
/// Upper bound on the initial pre-activation spread around the bias.
const INIT_SPREAD: f64 = 1.0 / 12.0;
/// Rows per gradient chunk. Fixed so the reduction order, and hence the
/// result, does not depend on the thread count.
const CHUNK: usize = 16;
const EVAL_CHUNK: usize = 256;

/// Dense layers sharing one transfer. `weights[l]` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub transfer: RateTransfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub target_hi: f64,
    pub target_lo: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.005,
            momentum: 0.9,
            seed: 2024,
            target_hi: 1.0,
            target_lo: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs >= 1
            && self.batch_size >= 1
            && self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.momentum)
            && self.target_lo < self.target_hi
            && self.target_hi <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad training config: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// mean per-sample loss over the epoch
    pub train_loss: f64,
    /// accuracy of the pre-update predictions seen during the epoch
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// rows are true labels, columns predictions
    pub confusion: [[u64; 10]; 10],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: net
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    fn scale(&mut self, k: f64) {
        self.weights.iter_mut().for_each(|w| *w *= k);
        self.biases.iter_mut().for_each(|b| *b *= k);
    }
}

/// Index of the first maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    /// per layer, `out x in` row-major
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    transfer: RateTransfer,
}

impl Network {
    /// Biases uniform in `[1/3, 2/3]`. Weights are uniform with standard
    /// deviation `INIT_SPREAD / sqrt(fan_in)`, so for rates in `[0, 1]` the
    /// initial pre-activations stay within the middle of the domain, off both
    /// clamps.
    pub fn random(layer_sizes: &[usize], transfer: RateTransfer, seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = INIT_SPREAD * (3.0 / fan_in as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-a..a)
            }));
            biases.push(Array1::from_shape_simple_fn(fan_out, || {
                rng.random_range(1.0 / 3.0..2.0 / 3.0)
            }));
        }
        Ok(Network {
            weights,
            biases,
            transfer,
        })
    }

    pub fn zeros(layer_sizes: &[usize], transfer: RateTransfer) -> Result<Self> {
        check_sizes(layer_sizes)?;
        Ok(Network {
            weights: layer_sizes
                .windows(2)
                .map(|w| Array2::zeros((w[1], w[0])))
                .collect(),
            biases: layer_sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
            transfer,
        })
    }

    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        transfer: RateTransfer,
    ) -> Result<Self> {
        let net = Network {
            weights,
            biases,
            transfer,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.biases.len() {
            return Err(Error::NetworkFormat(
                "need one bias vector per weight matrix".into(),
            ));
        }
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if b.len() != w.nrows() {
                return Err(Error::ShapeMismatch {
                    expected: w.nrows(),
                    got: b.len(),
                });
            }
            if l > 0 && w.ncols() != self.weights[l - 1].nrows() {
                return Err(Error::ShapeMismatch {
                    expected: self.weights[l - 1].nrows(),
                    got: w.ncols(),
                });
            }
            if w.iter().chain(b.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NetworkFormat(format!(
                    "layer {l} has non-finite parameters"
                )));
            }
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.weights[0].ncols()];
        sizes.extend(self.weights.iter().map(|w| w.nrows()));
        sizes
    }

    pub fn input_len(&self) -> usize {
        self.weights[0].ncols()
    }

    /// Activations of every layer, input layer first. `input` holds
    /// normalized drives; the input layer fires at `T(input)`.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Array1<f64>>> {
        if input.len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                got: input.len(),
            });
        }
        let mut acts = vec![input
            .iter()
            .map(|&z| self.transfer.eval(z))
            .collect::<Array1<f64>>()];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let z = w.dot(acts.last().expect("non-empty")) + b;
            acts.push(z.mapv(|z| self.transfer.eval(z)));
        }
        Ok(acts)
    }

    /// Batched [`forward`](Self::forward), one sample per row.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        if inputs.ncols() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                got: inputs.ncols(),
            });
        }
        let a0 = inputs.mapv(|z| self.transfer.eval(z));
        Ok(self.propagate(a0).0)
    }

    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        let acts = self.forward(input)?;
        Ok(argmax(
            acts.last()
                .expect("non-empty")
                .as_slice()
                .expect("contiguous"),
        ))
    }

    /// Activations and pre-activations from input-layer rates.
    fn propagate(&self, a0: Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut acts = vec![a0];
        let mut pre = Vec::with_capacity(self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let z = acts.last().expect("non-empty").dot(&w.t()) + b;
            acts.push(z.mapv(|z| self.transfer.eval(z)));
            pre.push(z);
        }
        (acts, pre)
    }

    /// Summed loss, correct count and summed gradients over a chunk of
    /// input-layer rates.
    fn chunk_gradients(
        &self,
        a0: Array2<f64>,
        labels: &[u8],
        targets: (f64, f64),
    ) -> (f64, usize, Gradients) {
        let (acts, pre) = self.propagate(a0);
        let out = acts.last().expect("non-empty");
        let mut y = Array2::from_elem(out.raw_dim(), targets.0);
        for (i, &l) in labels.iter().enumerate() {
            y[[i, l as usize]] = targets.1;
        }
        let err = out - &y;
        let loss = 0.5 * err.iter().map(|e| e * e).sum::<f64>();
        let correct = out
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, &l)| argmax(row.as_slice().expect("contiguous")) == l as usize)
            .count();

        let n_layers = self.weights.len();
        let mut g = Gradients::zeros_like(self);
        let deriv = |z: &Array2<f64>| z.mapv(|z| self.transfer.derivative(z));
        let mut delta = err * deriv(&pre[n_layers - 1]);
        for l in (0..n_layers).rev() {
            g.weights[l] = delta.t().dot(&acts[l]);
            g.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.weights[l]) * deriv(&pre[l - 1]);
            }
        }
        (loss, correct, g)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            format: NETWORK_FORMAT.into(),
            version: NETWORK_VERSION,
            layer_sizes: self.layer_sizes(),
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().copied().collect())
                .collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
            transfer: self.transfer.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        if file.format != NETWORK_FORMAT || file.version != NETWORK_VERSION {
            return Err(Error::NetworkFormat(format!(
                "expected {NETWORK_FORMAT} v{NETWORK_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        check_sizes(&file.layer_sizes)?;
        let n = file.layer_sizes.len() - 1;
        if file.weights.len() != n || file.biases.len() != n {
            return Err(Error::NetworkFormat(
                "layer count does not match layer_sizes".into(),
            ));
        }
        let mut weights = Vec::with_capacity(n);
        for (l, w) in file.weights.into_iter().enumerate() {
            let shape = (file.layer_sizes[l + 1], file.layer_sizes[l]);
            let got = w.len();
            weights.push(
                Array2::from_shape_vec(shape, w).map_err(|_| Error::ShapeMismatch {
                    expected: shape.0 * shape.1,
                    got,
                })?,
            );
        }
        let biases = file.biases.into_iter().map(Array1::from).collect();
        Network::from_parts(weights, biases, file.transfer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(file_error(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(file_error(path))?)
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if data.image_len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                got: data.image_len(),
            });
        }
        Ok(())
    }

    /// Input-layer rate for every byte value.
    fn pixel_table(&self) -> [f64; 256] {
        std::array::from_fn(|p| self.transfer.eval(pixel_value(p as u8)))
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "bad layer sizes {sizes:?}"
        )));
    }
    Ok(())
}

fn gather(data: &Dataset, indices: &[usize], table: &[f64; 256]) -> (Array2<f64>, Vec<u8>) {
    let n = data.image_len();
    let mut a0 = Array2::zeros((indices.len(), n));
    for (row, &i) in a0.rows_mut().into_iter().zip(indices) {
        for (x, &p) in row.into_iter().zip(data.raw_image(i)) {
            *x = table[p as usize];
        }
    }
    (a0, indices.iter().map(|&i| data.label(i)).collect())
}

/// Batch-mean loss `mean_b 0.5 * |T(out) - target|^2` and its gradient.
/// `inputs` are normalized input drives, one sample per row.
pub fn loss_and_gradients(
    net: &Network,
    inputs: ArrayView2<f64>,
    labels: &[u8],
    targets: (f64, f64),
) -> Result<(f64, Gradients)> {
    if inputs.nrows() != labels.len() || inputs.nrows() == 0 {
        return Err(Error::ShapeMismatch {
            expected: inputs.nrows(),
            got: labels.len(),
        });
    }
    if inputs.ncols() != net.input_len() {
        return Err(Error::ShapeMismatch {
            expected: net.input_len(),
            got: inputs.ncols(),
        });
    }
    let a0 = inputs.mapv(|z| net.transfer.eval(z));
    let (loss, _, mut g) = net.chunk_gradients(a0, labels, targets);
    let k = 1.0 / labels.len() as f64;
    g.scale(k);
    Ok((loss * k, g))
}

/// Mini-batch SGD with momentum on the batch-mean MSE loss. With `test`
/// given, test accuracy is recorded after every epoch.
pub fn train(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainConfig,
    test: Option<&Dataset>,
    exec: Execution,
) -> Result<TrainHistory> {
    cfg.validate()?;
    net.check_dataset(data)?;
    let table = net.pixel_table();
    let targets = (cfg.target_lo, cfg.target_hi);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut vel = Gradients::zeros_like(net);
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0);
        for batch in order.chunks(cfg.batch_size) {
            let parts = try_map_indexed(batch.len().div_ceil(CHUNK), exec, |c| {
                let idx = &batch[c * CHUNK..((c + 1) * CHUNK).min(batch.len())];
                let (a0, labels) = gather(data, idx, &table);
                Ok::<_, Error>(net.chunk_gradients(a0, &labels, targets))
            })?;
            let mut grad = Gradients::zeros_like(net);
            let mut batch_loss = 0.0;
            for (loss, c, g) in &parts {
                batch_loss += loss;
                correct += c;
                grad.accumulate(g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            loss_sum += batch_loss;
            let k = -cfg.learning_rate / batch.len() as f64;
            for l in 0..net.weights.len() {
                vel.weights[l] *= cfg.momentum;
                vel.weights[l].scaled_add(k, &grad.weights[l]);
                net.weights[l] += &vel.weights[l];
                vel.biases[l] *= cfg.momentum;
                vel.biases[l].scaled_add(k, &grad.biases[l]);
                net.biases[l] += &vel.biases[l];
            }
        }
        if net.weights.iter().any(|w| w.iter().any(|x| !x.is_finite())) {
            return Err(Error::DivergedLoss { epoch });
        }
        let test_accuracy = match test {
            Some(t) => Some(evaluate(net, t, exec)?.accuracy),
            None => None,
        };
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
            test_accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.5}, train acc {:.4}, test acc {:?}",
            stats.train_loss,
            stats.train_accuracy,
            stats.test_accuracy
        );
        history.epochs.push(stats);
    }
    Ok(history)
}

/// Argmax accuracy and confusion matrix.
pub fn evaluate(net: &Network, data: &Dataset, exec: Execution) -> Result<Evaluation> {
    net.check_dataset(data)?;
    let table = net.pixel_table();
    let n = data.len();
    let parts = try_map_indexed(n.div_ceil(EVAL_CHUNK), exec, |c| {
        let idx: Vec<usize> = (c * EVAL_CHUNK..((c + 1) * EVAL_CHUNK).min(n)).collect();
        let (a0, labels) = gather(data, &idx, &table);
        let (acts, _) = net.propagate(a0);
        let out = acts.last().expect("non-empty");
        let mut confusion = [[0u64; 10]; 10];
        for (row, &l) in out.rows().into_iter().zip(&labels) {
            let p = argmax(&row.to_vec());
            if p >= 10 {
                return Err(Error::ShapeMismatch {
                    expected: 10,
                    got: p + 1,
                });
            }
            confusion[l as usize][p] += 1;
        }
        Ok(confusion)
    })?;
    let mut confusion = [[0u64; 10]; 10];
    for part in &parts {
        for (row, prow) in confusion.iter_mut().zip(part) {
            for (x, y) in row.iter_mut().zip(prow) {
                *x += y;
            }
        }
    }
    let correct = (0..10).map(|i| confusion[i][i]).sum::<u64>() as usize;
    Ok(Evaluation {
        total: n,
        correct,
        accuracy: correct as f64 / n as f64,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{build_transfer, network_circuit};

    fn transfer() -> RateTransfer {
        build_transfer(&network_circuit(), 64).unwrap()
    }

    #[test]
    fn zero_network_is_silent() {
        let net = Network::zeros(&[6, 4, 3], transfer()).unwrap();
        let acts = net.forward(&[0.9; 6]).unwrap();
        assert!(acts[1].iter().chain(acts[2].iter()).all(|&r| r == 0.0));
        assert!(net.forward(&[0.0; 5]).is_err());
    }

    #[test]
    fn zero_input_matches_scaled_to_zero() {
        let net = Network::random(&[5, 7, 3], transfer(), 3).unwrap();
        let x = [0.2, 0.9, 0.4, 0.0, 1.0];
        let scaled: Vec<f64> = x.iter().map(|v| v * 0.0).collect();
        assert_eq!(
            net.forward(&scaled).unwrap(),
            net.forward(&[0.0; 5]).unwrap()
        );
    }

    #[test]
    fn batch_matches_single() {
        let net = Network::random(&[5, 7, 3], transfer(), 4).unwrap();
        let x = ndarray::arr2(&[[0.1, 0.2, 0.3, 0.4, 0.5], [0.9, 0.0, 0.7, 0.3, 0.2]]);
        let batch = net.forward_batch(x.view()).unwrap();
        for i in 0..2 {
            let single = net.forward(x.row(i).as_slice().unwrap()).unwrap();
            for (b, s) in batch.iter().zip(&single) {
                for (p, q) in b.row(i).iter().zip(s) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let net = Network::random(&[5, 7, 3], transfer(), 5).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
        let bad = net
            .to_json()
            .unwrap()
            .replace("\"version\":1", "\"version\":9");
        assert!(matches!(
            Network::from_json(&bad),
            Err(Error::NetworkFormat(_))
        ));
    }

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[0.1, 0.7, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[3.0]), 0);
    }

    #[test]
    fn bad_configs() {
        let mut c = TrainConfig::default();
        c.validate().unwrap();
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        c = TrainConfig {
            target_lo: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
