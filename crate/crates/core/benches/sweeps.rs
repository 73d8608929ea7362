//! Single-thread pool against the default rayon pool for the two
//! data-parallel hot spots: frequency-grid evaluation and the quadrature
//! rounds behind the H2 norm and gramians. The sequential build
//! (`--no-default-features`) runs the same code as the one-thread pool
//! minus scheduling overhead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::{ThreadPool, ThreadPoolBuilder};
use rtds::analysis::{gramians, h2_norm, GramianKind};
use rtds::{freq_grid, log_grid, random_rtds, QuadOptions};

fn pools() -> Vec<(String, ThreadPool)> {
    vec![
        ("one_thread".into(), ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("default_pool".into(), ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("freq_grid");
    let omegas = log_grid(1e-2, 1e3, 400).unwrap();
    for n in [10, 50, 200] {
        let sys = random_rtds(n, 1).unwrap();
        for (label, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(label, n), &sys, |b, sys| {
                b.iter(|| pool.install(|| freq_grid(sys, &omegas).unwrap()))
            });
        }
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("quadrature");
    group.sample_size(10);
    let opts = QuadOptions::default();
    for n in [10, 50] {
        let sys = random_rtds(n, 2).unwrap();
        for (label, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(format!("h2/{label}"), n), &sys, |b, sys| {
                b.iter(|| pool.install(|| h2_norm(sys, &opts).unwrap()))
            });
            group.bench_with_input(BenchmarkId::new(format!("gramians/{label}"), n), &sys, |b, sys| {
                b.iter(|| pool.install(|| gramians(sys, GramianKind::Both, &opts).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, grid, quadrature);
criterion_main!(benches);
