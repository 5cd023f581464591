use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ganlab_core::distributions::Preset;
use ganlab_core::gan::{GanConfig, GanModel};
use ganlab_core::nn::{Activation, LayerSpec, Mlp};
use ganlab_core::viz::{compute_heatmap, generator_manifold};
use ganlab_core::gan::NoiseSpec;
use ganlab_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn discriminator() -> Mlp {
    Mlp::new(
        &[
            LayerSpec::new(2, 14, Activation::Relu),
            LayerSpec::new(14, 14, Activation::Relu),
            LayerSpec::new(14, 1, Activation::Sigmoid),
        ],
        7,
    )
    .unwrap()
}

fn generator() -> Mlp {
    Mlp::new(
        &[
            LayerSpec::new(2, 14, Activation::Relu),
            LayerSpec::new(14, 14, Activation::Relu),
            LayerSpec::new(14, 2, Activation::Sigmoid),
        ],
        11,
    )
    .unwrap()
}

fn heatmap(c: &mut Criterion) {
    let d = discriminator();
    let mut group = c.benchmark_group("heatmap");
    for res in [40usize, 200] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, res), &res, |b, &res| {
                b.iter(|| compute_heatmap(&d, black_box(res), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn manifold(c: &mut Criterion) {
    let g = generator();
    let mut group = c.benchmark_group("manifold");
    for res in [20usize, 100] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, res), &res, |b, &res| {
                b.iter(|| generator_manifold(&g, NoiseSpec::default(), black_box(res), exec).unwrap())
            });
        }
    }
    group.finish();
}

/// Trains one model per seed for a fixed number of epochs.
fn seed_sweep(exec: Execution, seeds: usize, epochs: usize) -> Vec<u64> {
    let source = Preset::TwoGaussians.into();
    exec.map(seeds, |seed| {
        let mut model = GanModel::new(GanConfig::default(), seed as u64).unwrap();
        for _ in 0..epochs {
            model.train_epoch(&source).unwrap();
        }
        model.epoch()
    })
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "8x50"), |b| b.iter(|| seed_sweep(exec, 8, 50)));
    }
    group.finish();
}

criterion_group!(benches, heatmap, manifold, sweep);
criterion_main!(benches);
