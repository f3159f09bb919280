use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fvheat_bench::{grid, kerr_bath, oracle, spin_boson, weak_bath};
use fvheat_core::influence::{discretize_action, path_sum, SumMode, DEFAULT_PATH_BUDGET};
use fvheat_core::HigherOrderKernels;
use std::hint::black_box;

fn discretize(c: &mut Criterion) {
    let bath = weak_bath();
    let mut g = c.benchmark_group("discretize_action");
    for n in [6, 12, 24] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| discretize_action(&bath, &grid(n), black_box(0.5)).unwrap())
        });
    }
    g.finish();
}

fn path_sums(c: &mut Criterion) {
    let (sys, rho0) = spin_boson();
    let mut g = c.benchmark_group("path_sum");
    g.sample_size(10);
    for n in [6, 8, 10] {
        let coeffs = [discretize_action(&weak_bath(), &grid(n), 0.0).unwrap()];
        g.bench_with_input(BenchmarkId::new("density", n), &n, |b, _| {
            b.iter(|| path_sum(&sys, &coeffs, None, &rho0, SumMode::Density, DEFAULT_PATH_BUDGET).unwrap())
        });
    }
    let bath = kerr_bath(0.2);
    let coeffs = [discretize_action(&bath, &grid(6), 0.0).unwrap()];
    let kernels = HigherOrderKernels::from_bath(&bath, &grid(6), 4).unwrap();
    g.bench_function("density_order4/6", |b| {
        b.iter(|| path_sum(&sys, &coeffs, Some(&kernels), &rho0, SumMode::Density, DEFAULT_PATH_BUDGET).unwrap())
    });
    g.finish();
}

fn higher_order_tables(c: &mut Criterion) {
    let bath = kerr_bath(0.2);
    let mut g = c.benchmark_group("higher_order_kernels");
    g.sample_size(10);
    g.bench_function("order4/6", |b| b.iter(|| HigherOrderKernels::from_bath(&bath, &grid(6), 4).unwrap()));
    g.finish();
}

fn oracle_evolution(c: &mut Criterion) {
    let (_, rho0) = spin_boson();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("reduced_density", |b| {
        b.iter(|| {
            let o = oracle(0.2);
            o.reduced_density(&rho0, 0.0, 1.0, 1).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, discretize, path_sums, higher_order_tables, oracle_evolution);
criterion_main!(benches);
