use criterion::{criterion_group, criterion_main, Criterion};
use epcag::apsolve::{picard_solve, SolverConfig};
use epcag::ivpsim::{solve_ivp, InitialData, IvpOptions};
use epcag::timescale::sequence_almost_periods;
use epcag_bench::{golden_sine, perturbed_delayed, quasi_periodic_scalar};
use nalgebra::DVector;
use std::hint::black_box;

fn picard(c: &mut Criterion) {
    let scalar = quasi_periodic_scalar();
    let delayed = perturbed_delayed();
    let config = SolverConfig { core: [0.0, 20.0], tol: 1e-9, ..Default::default() };
    c.bench_function("picard_solve quasi-periodic", |b| b.iter(|| picard_solve(black_box(&scalar), &config).unwrap()));
    c.bench_function("picard_solve perturbed delayed", |b| b.iter(|| picard_solve(black_box(&delayed), &config).unwrap()));
}

fn forward(c: &mut Criterion) {
    let p = perturbed_delayed();
    let init = InitialData::constant(0, 2, DVector::from_element(1, 0.1));
    let opts = IvpOptions::default();
    c.bench_function("solve_ivp 50 intervals", |b| b.iter(|| solve_ivp(black_box(&p), &init, 50.0, &opts).unwrap()));
}

fn sequences(c: &mut Criterion) {
    let seq = golden_sine(500);
    c.bench_function("almost periods |i| ≤ 500", |b| b.iter(|| sequence_almost_periods(black_box(&seq), 0.14, 1..=100).unwrap()));
}

criterion_group!(benches, picard, forward, sequences);
criterion_main!(benches);
