use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use instascope_bench::{labels_for, random_matrix, random_points};
use instascope_core::diversity::{build_kernel, geometric_diversity, KernelKind};
use instascope_core::geometry::convex_hull;
use instascope_core::projection::{fit_projection, ProjectionConfig};
use instascope_core::selection::{feature_significance, select_features, SelectionConfig};
use std::hint::black_box;

fn hull(c: &mut Criterion) {
    let mut group = c.benchmark_group("convex_hull");
    for n in [100, 1_000, 10_000] {
        let pts = random_points(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| convex_hull(black_box(pts)).unwrap())
        });
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let x = random_matrix(300, 8, 2);
    let y = labels_for(&x);
    let names: Vec<String> = (1..=8).map(|j| format!("f_{j}")).collect();
    let sig = feature_significance(&x, &names, &y).unwrap();
    let all: Vec<usize> = (0..8).collect();
    c.bench_function("select_features/300x8", |b| {
        b.iter(|| select_features(black_box(&x), &y, &sig, &all, SelectionConfig::default()).unwrap())
    });
}

fn projection(c: &mut Criterion) {
    let x = random_matrix(500, 6, 3);
    let y: Vec<f64> = labels_for(&x).into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
    let order: Vec<usize> = (0..6).collect();
    c.bench_function("fit_projection/500x6", |b| {
        b.iter(|| fit_projection(black_box(&x), &y, &order, ProjectionConfig::default()).unwrap())
    });
}

fn logdet(c: &mut Criterion) {
    let mut group = c.benchmark_group("logdet");
    for n in [50, 200] {
        let x = random_matrix(n, 10, 4);
        let k = build_kernel(&x, KernelKind::Rbf { gamma: 0.1 }, 1e-8).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &k, |b, k| b.iter(|| geometric_diversity(black_box(k))));
    }
    group.finish();
}

criterion_group!(benches, hull, selection, projection, logdet);
criterion_main!(benches);
