use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mdap_bench::{lattice, quadratic_point, schedule};
use mdap_core::correlations::{correlation_exact, double_sum, BoxSet2, Rect};
use mdap_core::counting::count_q;
use mdap_core::experiments::strip_hits;
use mdap_core::heights::ht;
use mdap_core::volumes::xi_area;
use mdap_core::FlowTime;

fn counting(c: &mut Criterion) {
    let x = quadratic_point();
    let s = schedule(1e6);
    c.bench_function("count_q_scan_1e6", |b| b.iter(|| count_q(black_box(x), &s).unwrap().count));
    c.bench_function("strip_hits_1e7", |b| b.iter(|| strip_hits(black_box(x), 0.05, 10_000_000).len()));
}

fn heights(c: &mut Criterion) {
    let l = lattice();
    let t = FlowTime::new(3.0, 5.0).unwrap();
    c.bench_function("ht_t3_5", |b| b.iter(|| ht(black_box(&l), t).unwrap()));
}

fn correlations(c: &mut Criterion) {
    let d1 = BoxSet2::new(vec![Rect::new(-0.3, 0.2, -0.1, 0.4).unwrap(), Rect::new(0.25, 0.5, -0.5, 0.0).unwrap()]).unwrap();
    let d2 = BoxSet2::rect(Rect::square(0.35));
    c.bench_function("correlation_exact_7_11", |b| b.iter(|| correlation_exact(black_box(&d1), &d2, 7, 11).unwrap()));
    let t = FlowTime::diagonal(4.0);
    c.bench_function("double_sum_t4", |b| b.iter(|| double_sum(black_box(t), 0.05, 0.5, 1.0).unwrap().value));
}

fn volumes(c: &mut Criterion) {
    c.bench_function("xi_area", |b| b.iter(|| xi_area(black_box(0.1)).unwrap()));
}

criterion_group!(kernels, counting, heights, correlations, volumes);
criterion_main!(kernels);
