use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use metricspace::field::theta_y;
use metricspace::pointwise::theta_distance;
use metricspace::random::{random_chart, random_metric_field, random_spd, random_sym, trial_rng};
use metricspace::tensor::trace_pair;
use metricspace::{field_distance, Constraint, Init, OptimizerOptions, Region};

fn trace(c: &mut Criterion) {
    let mut group = c.benchmark_group("trace_pair");
    for n in [2, 3, 8] {
        let mut rng = trial_rng(0, n as u64);
        let g = random_spd(&mut rng, n, 3.0).unwrap();
        let h = random_sym(&mut rng, n, 1.0);
        let k = random_sym(&mut rng, n, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| trace_pair(black_box(&g), black_box(&h), black_box(&k)).unwrap())
        });
    }
    group.finish();
}

fn pointwise(c: &mut Criterion) {
    let mut group = c.benchmark_group("theta_distance");
    let opts = OptimizerOptions::default();
    for n in [1, 2, 3] {
        let mut rng = trial_rng(1, n as u64);
        let r = random_spd(&mut rng, n, 2.0).unwrap();
        let a = random_spd(&mut rng, n, 2.0).unwrap();
        let b = random_spd(&mut rng, n, 2.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| theta_distance(&r, &a, &b, &opts).unwrap())
        });
    }
    group.finish();
}

fn integrated(c: &mut Criterion) {
    let mut group = c.benchmark_group("theta_y");
    group.sample_size(10);
    let opts = OptimizerOptions::default();
    for points in [8, 64] {
        let mut rng = trial_rng(2, points as u64);
        let chart = random_chart(&mut rng, 2, points).unwrap();
        let r = random_metric_field(&mut rng, &chart, 2.0).unwrap();
        let a = random_metric_field(&mut rng, &chart, 2.0).unwrap();
        let b = random_metric_field(&mut rng, &chart, 2.0).unwrap();
        let all = Region::all(&chart);
        group.bench_with_input(BenchmarkId::from_parameter(points), &points, |bench, _| {
            bench.iter(|| theta_y(&r, &a, &b, &all, &opts).unwrap())
        });
    }
    group.finish();
}

fn distance(c: &mut Criterion) {
    let mut group = c.benchmark_group("field_distance");
    group.sample_size(10);
    let mut rng = trial_rng(3, 0);
    let chart = random_chart(&mut rng, 3, 4).unwrap();
    let a = random_metric_field(&mut rng, &chart, 2.0).unwrap();
    let b = random_metric_field(&mut rng, &chart, 2.0).unwrap();
    let opts = OptimizerOptions::default();
    group.bench_function("n3_points4_k32", |bench| {
        bench.iter(|| field_distance(&a, &b, Init::Best, Constraint::Free, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, trace, pointwise, integrated, distance);
criterion_main!(benches);
