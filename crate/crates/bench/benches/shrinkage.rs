use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hetshrink::linalg::truncated_svd;
use hetshrink::{cov_estimate, optshrink_predict, shrink_predict, LossFunction, SvShrinker};
use hetshrink_bench::fixture;
use std::hint::black_box;

fn svd(c: &mut Criterion) {
    let mut g = c.benchmark_group("truncated_svd");
    g.sample_size(20);
    for (p, n) in [(200, 400), (500, 1000), (1000, 2000)] {
        let (y, _) = fixture(p, n, false);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{p}x{n}")), &y, |b, y| {
            b.iter(|| truncated_svd(black_box(y), 3).unwrap())
        });
    }
    g.finish();
}

fn shrink(c: &mut Criterion) {
    let mut g = c.benchmark_group("shrink_predict");
    g.sample_size(20);
    for dense in [false, true] {
        let (y, noise) = fixture(500, 1000, dense);
        let label = if dense { "dense" } else { "diagonal" };
        g.bench_function(label, |b| b.iter(|| shrink_predict(black_box(&y), &noise, 3, SvShrinker::Optimal).unwrap()));
    }
    g.finish();
}

fn baselines(c: &mut Criterion) {
    let (y, noise) = fixture(500, 1000, false);
    let mut g = c.benchmark_group("estimators");
    g.sample_size(10);
    g.bench_function("cov_estimate_nuclear", |b| {
        b.iter(|| cov_estimate(black_box(&y), &noise, 3, &LossFunction::Nuclear).unwrap())
    });
    g.bench_function("optshrink_predict", |b| b.iter(|| optshrink_predict(black_box(&y), 3).unwrap()));
    g.finish();
}

criterion_group!(benches, svd, shrink, baselines);
criterion_main!(benches);
