use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geopipe::gas::{gas_report_with, AttentionMap, RegionMask};
use geopipe::noise::{forward_noise_with, LatentTensor, VarianceSchedule};
use geopipe::repe::{encode_sequence_with, FrequencyConfig};
use geopipe::scene_graph::{build_graph_with, OccupancyCloud};
use geopipe::synthetic::{random_scene, random_sequence, random_vec3};
use geopipe::Parallelism;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("rayon", Parallelism::Rayon)];

fn encode(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let frames = random_sequence(&mut rng, 512);
    let cfg = FrequencyConfig::new(10_000.0, 1024).unwrap();
    let mut group = c.benchmark_group("encode_sequence_512x1024");
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(encode_sequence_with(&frames, &cfg, mode).unwrap())));
    }
    group.finish();
}

fn graph(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("build_graph");
    group.sample_size(20);
    for nodes in [200usize, 800] {
        let frames = random_scene(&mut rng, nodes, 4.0);
        let cloud = OccupancyCloud::new((0..5_000).map(|_| random_vec3(&mut rng, 2.0).add_scalar(2.0)).collect()).unwrap();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, nodes), &frames, |b, frames| {
                b.iter(|| black_box(build_graph_with(frames, &cloud, 0.5, 0.05, mode).unwrap()))
            });
        }
    }
    group.finish();
}

fn gas(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<_> = (0..256)
        .map(|_| {
            let n = 16 * 24 * 24;
            let w = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let m = (0..n).map(|_| rng.random_bool(0.1)).collect();
            (AttentionMap::new(16, 24, 24, w).unwrap(), RegionMask::new(16, 24, 24, m).unwrap())
        })
        .collect();
    let mut group = c.benchmark_group("gas_report_256");
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(gas_report_with(&pairs, mode).unwrap())));
    }
    group.finish();
}

fn noise(c: &mut Criterion) {
    let schedule = VarianceSchedule::default();
    let n = 1 << 22;
    let z0 = LatentTensor::standard_normal(n, 4, Parallelism::default());
    let eps = LatentTensor::standard_normal(n, 5, Parallelism::default());
    let mut group = c.benchmark_group("noise_4M");
    group.sample_size(20);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::new("standard_normal", name), |b| {
            b.iter(|| black_box(LatentTensor::standard_normal(n, 6, mode)))
        });
        group.bench_function(BenchmarkId::new("forward_noise", name), |b| {
            b.iter(|| black_box(forward_noise_with(&z0, 500, &eps, &schedule, mode).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, encode, graph, gas, noise);
criterion_main!(benches);
