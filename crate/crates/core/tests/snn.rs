use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vo2snn::exec::Execution;
use vo2snn::mnist::{decode_rate, encode_rate, Dataset, IdxImages, Split};
use vo2snn::snn::{
    build_transfer, evaluate, loss_and_gradients, network_circuit, simulate_network_timedomain,
    train, Network, RateTransfer, TimeDomainConfig, TrainConfig,
};

fn transfer() -> RateTransfer {
    build_transfer(&network_circuit(), 64).unwrap()
}

/// `n` noisy 4x4 images, one random prototype per class, labels cycling
/// through the ten classes.
fn synthetic(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<[u8; 16]> = (0..10)
        .map(|_| std::array::from_fn(|_| rng.random()))
        .collect();
    let mut pixels = Vec::with_capacity(n * 16);
    for i in 0..n {
        pixels.extend(
            prototypes[i % 10]
                .iter()
                .map(|&p| p.saturating_add_signed(rng.random_range(-20..=20))),
        );
    }
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    let images = IdxImages {
        count: n,
        rows: 4,
        cols: 4,
        pixels,
    };
    Dataset::pair(Split::Train, images, labels).unwrap()
}

/// Segment index of every pre-activation, used to detect kink crossings.
fn segments(net: &Network, inputs: &Array2<f64>) -> Vec<usize> {
    let kinks = net.transfer.kinks();
    let mut a = inputs.mapv(|z| net.transfer.eval(z));
    let mut out = Vec::new();
    for (w, b) in net.weights.iter().zip(&net.biases) {
        let z = a.dot(&w.t()) + b;
        out.extend(z.iter().map(|&z| kinks.partition_point(|&k| k < z)));
        a = z.mapv(|z| net.transfer.eval(z));
    }
    out
}

#[test]
fn gradients_match_central_differences() {
    let t = transfer();
    let net = Network::random(&[12, 8, 10], t, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inputs = Array2::from_shape_fn((10, 12), |_| rng.random_range(0.2..0.9));
    let labels: Vec<u8> = (0..10).collect();
    let targets = (0.0, 1.0);
    let (_, grad) = loss_and_gradients(&net, inputs.view(), &labels, targets).unwrap();
    let base = segments(&net, &inputs);
    let h = 1e-6;

    let (mut checked, mut skipped) = (0, 0);
    let mut probe = |perturb: &dyn Fn(&mut Network, f64), analytic: f64| {
        let (mut plus, mut minus) = (net.clone(), net.clone());
        perturb(&mut plus, h);
        perturb(&mut minus, -h);
        if segments(&plus, &inputs) != base || segments(&minus, &inputs) != base {
            skipped += 1;
            return;
        }
        let lp = loss_and_gradients(&plus, inputs.view(), &labels, targets)
            .unwrap()
            .0;
        let lm = loss_and_gradients(&minus, inputs.view(), &labels, targets)
            .unwrap()
            .0;
        let numeric = (lp - lm) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs());
        assert!(
            (analytic - numeric).abs() <= 1e-4 * scale + 1e-12,
            "analytic {analytic:e}, numeric {numeric:e}"
        );
        checked += 1;
    };
    for l in 0..net.weights.len() {
        for ((i, j), &g) in grad.weights[l].indexed_iter() {
            probe(&|n, d| n.weights[l][[i, j]] += d, g);
        }
        for (i, &g) in grad.biases[l].indexed_iter() {
            probe(&|n, d| n.biases[l][i] += d, g);
        }
    }
    assert!(
        checked > 10 * (skipped + 1),
        "checked {checked}, skipped {skipped}"
    );
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = synthetic(40, 1);
    let mut net = Network::random(&[16, 8, 10], transfer(), 3).unwrap();
    let before = net.clone();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        learning_rate: 0.0,
        ..Default::default()
    };
    train(&mut net, &data, &cfg, None, Execution::Sequential).unwrap();
    assert_eq!(net, before);
}

#[test]
fn learns_class_prototypes() {
    let data = synthetic(64, 2);
    let mut net = Network::random(&[16, 48, 10], transfer(), 4).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 16,
        ..Default::default()
    };
    let history = train(&mut net, &data, &cfg, None, Execution::Parallel).unwrap();
    let first = history.epochs.first().unwrap().train_loss;
    let last = history.epochs.last().unwrap().train_loss;
    assert!(last < 0.25 * first, "loss {first} -> {last}");
    assert_eq!(
        evaluate(&net, &data, Execution::Parallel).unwrap().accuracy,
        1.0
    );
}

#[test]
fn training_is_identical_in_both_execution_modes() {
    let data = synthetic(200, 3);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 50,
        ..Default::default()
    };
    let start = Network::random(&[16, 24, 10], transfer(), 9).unwrap();
    let (mut a, mut b) = (start.clone(), start);
    let ha = train(&mut a, &data, &cfg, Some(&data), Execution::Sequential).unwrap();
    let hb = train(&mut b, &data, &cfg, Some(&data), Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn json_file_round_trip() {
    let net = Network::random(&[16, 5, 10], transfer(), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    assert_eq!(Network::load(&path).unwrap(), net);
}

#[test]
fn time_domain_rate_tracks_transfer() {
    let t = transfer();
    let r_max = t.normalization.r_max;
    let w = Array2::from_elem((1, 1), 0.0);
    for z in [0.05, 0.15, 0.3, 0.5, 0.7, 0.95] {
        let net =
            Network::from_parts(vec![w.clone()], vec![Array1::from_elem(1, z)], t.clone()).unwrap();
        let run = simulate_network_timedomain(&net, &[0.0], &TimeDomainConfig::default()).unwrap();
        let expect = t.eval(z) * r_max;
        assert!(expect > 0.05 * r_max);
        let got = run.rates[1][0];
        assert!(
            (got - expect).abs() <= 0.05 * expect,
            "z {z}: {got} vs {expect}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_encoding_round_trips(pixels in proptest::collection::vec(0u8..=255, 1..50)) {
        let t = transfer();
        let image: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
        let enc = encode_rate(&image, &t, 50e-6).unwrap();
        let (lo, hi) = (t.normalization.v_lo, t.normalization.v_hi);
        prop_assert!(enc.drives.iter().all(|&v| v >= lo && v <= hi));
        for (a, b) in decode_rate(&enc, &t).iter().zip(&image) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_rates_stay_in_unit_range(seed in 0u64..1000, x in proptest::collection::vec(-2.0f64..3.0, 6)) {
        let net = Network::random(&[6, 7, 10], transfer(), seed).unwrap();
        for layer in net.forward(&x).unwrap() {
            prop_assert!(layer.iter().all(|&r| (0.0..=1.0).contains(&r)));
        }
    }
}
