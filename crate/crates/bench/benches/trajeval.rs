use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mapbench_bench::{helix, perturbed};
use mapbench_core::trajeval::{align, ape, associate, rpe, DEFAULT_MAX_TIME_DIFF};

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    for n in [1_000usize, 10_000] {
        let reference = helix(n);
        let est = perturbed(&reference);
        group.bench_with_input(BenchmarkId::new("associate", n), &n, |b, _| {
            b.iter(|| associate(black_box(&est), black_box(&reference), DEFAULT_MAX_TIME_DIFF).unwrap())
        });
        let pairs = associate(&est, &reference, DEFAULT_MAX_TIME_DIFF).unwrap();
        group.bench_with_input(BenchmarkId::new("align_ape", n), &n, |b, _| {
            b.iter(|| {
                let tf = align(black_box(&pairs), false).unwrap();
                ape(&pairs, &tf).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("rpe_1m", n), &n, |b, _| {
            b.iter(|| rpe(black_box(&pairs), 1.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, evaluation);
criterion_main!(benches);
