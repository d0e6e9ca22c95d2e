//! Parallel vs sequential timing for the data-parallel hot paths: Monte
//! Carlo recovery cells, kernel-sphere oracle sweeps, and threshold curve
//! evaluation. With the default `parallel` feature the first member of each
//! pair runs on the rayon pool; the `*_seq` twins are always sequential.

use blocksparse::harness::{run_cell, run_cell_seq};
use blocksparse::oracle::{check_weak, check_weak_seq, nullspace_basis, SupportPattern};
use blocksparse::solver::{BlockDims, SolverConfig};
use blocksparse::threshold::{required_alpha, ThresholdKind};
use criterion::{criterion_group, criterion_main, Criterion};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use std::hint::black_box;

fn bench_cell(c: &mut Criterion) {
    let dims = BlockDims::new(40, 5, 20, 8).unwrap();
    let config = SolverConfig::default();
    let mut group = c.benchmark_group("phase_cell_n40_d5_m20_k8_t8");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| run_cell(black_box(&dims), 8, &config, 42).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| run_cell_seq(black_box(&dims), 8, &config, 42).unwrap())
    });
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    // kernel dimension 3: n - m = 3 blocks of length 1
    let dims = BlockDims::new(6, 1, 3, 1).unwrap();
    let instance = blocksparse::harness::generate_instance(&dims, 7);
    let basis = nullspace_basis(&instance.matrix).unwrap();
    let pattern = SupportPattern::from_signal(&instance.planted).unwrap();
    let mut group = c.benchmark_group("oracle_weak_p3_grid20000");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| check_weak(black_box(&basis), &dims, &pattern, 20_000).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| check_weak_seq(black_box(&basis), &dims, &pattern, 20_000).unwrap())
    });
    group.finish();
}

fn bench_curve(c: &mut Criterion) {
    let alphas: Vec<f64> = (1..=32).map(|i| i as f64 / 33.0).collect();
    let mut group = c.benchmark_group("required_alpha_weak_d15_32pts");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| {
            alphas
                .par_iter()
                .map(|&a| required_alpha(ThresholdKind::Weak, a * 0.6, 15, 0.0).unwrap().required_alpha)
                .sum::<f64>()
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            alphas
                .iter()
                .map(|&a| required_alpha(ThresholdKind::Weak, a * 0.6, 15, 0.0).unwrap().required_alpha)
                .sum::<f64>()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_cell, bench_oracle, bench_curve);
criterion_main!(benches);
