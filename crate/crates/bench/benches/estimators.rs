//! Criterion benchmarks: thresholding kernels, the subset search, the
//! group-lasso solver and the iterative shrinkage pipeline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use sf_bench::{functional_fixture, robust_fixture};
use sf_core::functional::{
    ewht_estimate, ght_estimate, ght_threshold, gss_estimate, gst_estimate, gst_gamma, GssConfig,
    ThresholdConfig,
};
use sf_core::model::{center_columns, column_norms, linear_functional};
use sf_core::robust::{group_lasso_fit, group_lasso_lambda, ist_estimate, RobustInstanceView};

fn bench_column_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("column-kernels");
    for (p, n) in [(64usize, 256usize), (256, 1024)] {
        let instance = functional_fixture(p, n, 8, 0xb001);
        group.throughput(Throughput::Elements((p * n) as u64));
        group.bench_with_input(
            BenchmarkId::new("linear_functional", format!("{p}x{n}")),
            &instance.y,
            |b, y| b.iter(|| black_box(linear_functional(y))),
        );
        group.bench_with_input(
            BenchmarkId::new("column_norms", format!("{p}x{n}")),
            &instance.y,
            |b, y| b.iter(|| black_box(column_norms(y))),
        );
        group.bench_with_input(
            BenchmarkId::new("center_columns", format!("{p}x{n}")),
            &instance.y,
            |b, y| b.iter(|| black_box(center_columns(y).unwrap())),
        );
    }
    group.finish();
}

fn bench_thresholding(c: &mut Criterion) {
    let mut group = c.benchmark_group("thresholding");
    for (p, n, s) in [(64usize, 256usize, 8usize), (256, 1024, 16)] {
        let instance = functional_fixture(p, n, s, 0xb002);
        let cfg = ThresholdConfig::s_known(1.0, s).unwrap();
        let lambda = ght_threshold(&cfg, p, n);
        let gamma = gst_gamma(&cfg, p, n);
        group.throughput(Throughput::Elements((p * n) as u64));
        group.bench_with_input(
            BenchmarkId::new("ght", format!("{p}x{n}")),
            &instance.y,
            |b, y| b.iter(|| black_box(ght_estimate(y, lambda))),
        );
        group.bench_with_input(
            BenchmarkId::new("gst", format!("{p}x{n}")),
            &instance.y,
            |b, y| b.iter(|| black_box(gst_estimate(y, 1.0, gamma))),
        );
        group.bench_with_input(
            BenchmarkId::new("ewht", format!("{p}x{n}")),
            &instance.y,
            |b, y| b.iter(|| black_box(ewht_estimate(y, 1.5))),
        );
    }
    group.finish();
}

fn bench_subset_selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy-subset-selection");
    group.sample_size(20);
    for n in [8usize, 12] {
        let instance = functional_fixture(8, n, 2, 0xb003);
        let cfg = GssConfig::new(1.0, 0.1, n).with_cap(n);
        group.bench_with_input(BenchmarkId::new("full-cap", n), &instance.y, |b, y| {
            b.iter(|| black_box(gss_estimate(y, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn bench_robust_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("robust-pipeline");
    group.sample_size(20);
    let (p, n, s) = (20usize, 400usize, 12usize);
    let instance = robust_fixture(p, n, s, 0xb004);
    let view = RobustInstanceView::new(instance.y.clone(), 1.0, s, 0.1).unwrap();
    let lambda = group_lasso_lambda(1.0, p, n, 0.1);
    group.bench_function("group_lasso_fit-20x400", |b| {
        b.iter(|| black_box(group_lasso_fit(&view, lambda, 1e-10, 10_000).unwrap()))
    });
    group.bench_function("ist-4-rounds-20x400", |b| {
        b.iter(|| black_box(ist_estimate(&view, 4).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_column_kernels,
    bench_thresholding,
    bench_subset_selection,
    bench_robust_pipeline
);
criterion_main!(benches);
