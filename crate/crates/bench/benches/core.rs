use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use prune_dc_bench::{spiked_law, spiked_model};
use prune_dc_core::dc::{build_mixture, solve_xi};
use prune_dc_core::lab::{least_squares, prune_magnitude};
use prune_dc_core::nonasym::{build_nonasym, sample_dc_rng};
use prune_dc_core::pruning::{risk_magnitude, risk_feature_sweep};
use prune_dc_core::lab::Method;
use prune_dc_core::rng::stream_rng;

fn bench_fixed_point(c: &mut Criterion) {
    let mu = spiked_law();
    c.bench_function("solve_xi/two-atom", |b| {
        b.iter(|| solve_xi(black_box(&mu), black_box(2.0)).unwrap())
    });
}

fn bench_magnitude_risk(c: &mut Criterion) {
    let mu = spiked_law();
    let sol = build_mixture(&mu, 10.0 / 3.0, 1.0).unwrap();
    c.bench_function("risk_magnitude/two-atom", |b| {
        b.iter(|| risk_magnitude(black_box(&sol), black_box(0.1)).unwrap())
    });
}

fn bench_feature_sweep_point(c: &mut Criterion) {
    let model = spiked_model(400, 120);
    c.bench_function("risk_feature_sweep/p400-hessian", |b| {
        b.iter(|| risk_feature_sweep(black_box(&model), 400, 40, Method::Hessian).unwrap())
    });
}

fn bench_min_norm(c: &mut Criterion) {
    let model = spiked_model(400, 120);
    let (x, y) = model.generate(&mut stream_rng(1, 0)).unwrap();
    c.bench_function("least_squares/120x400", |b| {
        b.iter(|| least_squares(black_box(&x), black_box(&y), None).unwrap())
    });
    let beta = least_squares(&x, &y, None).unwrap();
    c.bench_function("prune_magnitude/p400-s40", |b| {
        b.iter(|| prune_magnitude(black_box(&beta), 40))
    });
}

fn bench_dc_sampler(c: &mut Criterion) {
    let model = spiked_model(1000, 300);
    let dc = build_nonasym(&model).unwrap();
    let mut rng = stream_rng(2, 0);
    c.bench_function("sample_dc/p1000", |b| {
        b.iter(|| sample_dc_rng(black_box(&dc), &mut rng))
    });
}

criterion_group!(
    benches,
    bench_fixed_point,
    bench_magnitude_risk,
    bench_feature_sweep_point,
    bench_min_norm,
    bench_dc_sampler
);
criterion_main!(benches);
