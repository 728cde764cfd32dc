use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vo2snn::characterization::{phase_diagram, threshold_stats, DEFAULT_R_RANGE, DEFAULT_V_RANGE};
use vo2snn::device::device_params;
use vo2snn::exec::Execution;
use vo2snn::mnist::{Dataset, IdxImages, Split};
use vo2snn::oscillator::DEFAULT_C_PAR;
use vo2snn::snn::{
    build_transfer, network_circuit, train, Network, TrainConfig, DEFAULT_LAYER_SIZES,
};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn noise_digits(n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let images = IdxImages {
        count: n,
        rows: 28,
        cols: 28,
        pixels: (0..n * 784).map(|_| rng.random()).collect(),
    };
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    Dataset::pair(Split::Train, images, labels).unwrap()
}

fn sweeps(c: &mut Criterion) {
    let device = device_params(1).unwrap();
    let jittered = device.with_jitter_fraction(0.01);
    let mut g = c.benchmark_group("sweeps");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("phase_64x64", name), |b| {
            b.iter(|| {
                phase_diagram(
                    &device,
                    DEFAULT_R_RANGE,
                    DEFAULT_V_RANGE,
                    (64, 64),
                    DEFAULT_C_PAR,
                    exec,
                )
                .unwrap()
            })
        });
        g.bench_function(BenchmarkId::new("threshold_stats_200", name), |b| {
            b.iter(|| threshold_stats(&jittered, 200, 7, exec).unwrap())
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let data = noise_digits(512);
    let transfer = build_transfer(&network_circuit(), 96).unwrap();
    let start = Network::random(&DEFAULT_LAYER_SIZES, transfer, 3).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..Default::default()
    };
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("epoch_512", name), |b| {
            b.iter(|| {
                let mut net = start.clone();
                train(&mut net, &data, &cfg, None, exec).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, sweeps, training);
criterion_main!(benches);
