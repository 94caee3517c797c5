use criterion::{criterion_group, criterion_main, Criterion};
use relbudget_core::rewardstats::c_rl;
use relbudget_core::specfun::reg_lower_gamma;
use relbudget_core::{optimal_xi, simulate, SimConfig};
use std::hint::black_box;

fn incomplete_gamma(c: &mut Criterion) {
    c.bench_function("reg_lower_gamma small shape", |b| {
        b.iter(|| reg_lower_gamma(black_box(2.5), black_box(3.1)))
    });
    c.bench_function("reg_lower_gamma large shape", |b| {
        b.iter(|| reg_lower_gamma(black_box(1e4), black_box(1.01e4)))
    });
}

fn reward_stats(c: &mut Criterion) {
    c.bench_function("c_rl", |b| b.iter(|| c_rl(black_box(3.0), black_box(1.3))));
}

fn optimum(c: &mut Criterion) {
    c.bench_function("optimal_xi K=2", |b| b.iter(|| optimal_xi(black_box(2.0), 1e-8)));
}

fn trajectory(c: &mut Criterion) {
    let cfg = SimConfig::new(2.0, 0.5, 100.0, 50);
    c.bench_function("simulate 50 iterations", |b| b.iter(|| simulate(black_box(&cfg))));
}

criterion_group!(benches, incomplete_gamma, reward_stats, optimum, trajectory);
criterion_main!(benches);
