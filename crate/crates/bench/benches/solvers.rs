use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use discspec::potential::Fn1d;
use discspec::riccati_lab::en_measure;
use discspec::spectral::{dirichlet_lambda0, riccati_threshold};
use discspec::transport::{d_bound, radial_neumann_solve};
use discspec::{Ball, Domain, PotentialField};
use discspec_bench::quadratic_sample;

fn statistics(c: &mut Criterion) {
    let s = quadratic_sample(&[3.0, 0.0, 0.0], 0.5, 32);
    let delta = 0.1 * s.measure();
    c.bench_function("rearrangement", |b| b.iter(|| s.rearrangement(black_box(delta)).unwrap()));
    c.bench_function("trimmed_integral", |b| b.iter(|| s.trimmed_integral(black_box(delta)).unwrap()));
}

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral");
    g.sample_size(10);
    let v = PotentialField::quadratic(3);
    let ball = Ball::new(vec![2.0, 0.0, 0.0], 1.0).unwrap();
    g.bench_function("dirichlet_lambda0_h16", |b| b.iter(|| dirichlet_lambda0(&v, &ball, 1.0 / 16.0).unwrap()));
    let radial: Fn1d = Arc::new(|r: f64| r * r);
    g.bench_function("riccati_threshold", |b| b.iter(|| riccati_threshold(&radial, 1.0, 3).unwrap()));
    g.finish();
}

fn transport(c: &mut Criterion) {
    let mut g = c.benchmark_group("transport");
    g.sample_size(10);
    let w: Fn1d = Arc::new(|r: f64| if r < 0.4 { 1.0 } else { -0.4f64.powi(3) / (0.9f64.powi(3) - 0.4f64.powi(3)) });
    g.bench_function("radial_neumann_solve", |b| b.iter(|| radial_neumann_solve(&w, 0.9, 3, &[0.4], 400).unwrap()));
    let dom = Domain::Ball(Ball::centered(3, 0.5).unwrap());
    g.bench_function("d_bound_h8", |b| b.iter(|| d_bound(&|x: &[f64]| x[0], &dom, 0.5 / 8.0, true).unwrap()));
    g.finish();
}

fn riccati(c: &mut Criterion) {
    let u = |t: f64| (10.0 * t).sin();
    c.bench_function("en_measure_m200", |b| b.iter(|| en_measure(&u, black_box(10.0), 1.0, 200).unwrap()));
}

criterion_group!(benches, statistics, spectral, transport, riccati);
criterion_main!(benches);
