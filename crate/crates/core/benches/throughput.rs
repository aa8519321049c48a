//! Sequential against rayon-parallel execution for the batch workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qrisk_core::circuits::{build_loader, run_sweep, GaussianLoaderParams, SweepNoise, SweepSpec};
use qrisk_core::exec::Execution;
use qrisk_core::noise::{spam_statistics, ConfusionMatrix, SpamNoise};
use qrisk_core::variational::{train_batch, TrainConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let mut spec = SweepSpec::three_qubit_fine();
    spec.noise = Some(SweepNoise {
        shots: Some(4096),
        readout: Some(ConfusionMatrix::uniform_fidelity(3, 0.95).unwrap()),
        seed: 1,
    });
    let mut g = c.benchmark_group("sweep_three_qubit_fine");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_sweep(&spec, exec).unwrap()));
    }
    g.finish();
}

fn spam(c: &mut Criterion) {
    let circuit = build_loader(&GaussianLoaderParams::from_degrees(&[90.0, 191.0]).unwrap()).unwrap();
    let noise = SpamNoise { readout: Some(ConfusionMatrix::uniform_fidelity(2, 0.97).unwrap()), cz_phase: None };
    let mut g = c.benchmark_group("spam_1000x4096");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| spam_statistics(&circuit, &noise, 1000, Some(4096), 3, exec).unwrap())
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let configs: Vec<TrainConfig> = (0..16)
        .map(|seed| TrainConfig { seed, max_iters: 300, ..TrainConfig::new(3, 0.0, 1.0, 1.0) })
        .collect();
    let mut g = c.benchmark_group("train_batch_16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| train_batch(&configs, exec)));
    }
    g.finish();
}

criterion_group!(benches, sweep, spam, training);
criterion_main!(benches);
