use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gwtheta_bench::{model, KERNEL_SCENARIOS};
use gwtheta_core::analytics::constants::constants_table;
use gwtheta_core::analytics::limits::DEFAULT_LIMIT_TOL;
use gwtheta_core::simulator::{run_ensemble, simulate_trajectory, Mode};
use gwtheta_core::{limit_constants, population_pmf};

fn constants(c: &mut Criterion) {
    let mut g = c.benchmark_group("constants_table_1e4");
    for id in KERNEL_SCENARIOS {
        let m = model(id);
        g.bench_with_input(BenchmarkId::from_parameter(id), &m, |b, m| {
            b.iter(|| constants_table(m, black_box(10_000)).unwrap())
        });
    }
    g.finish();
}

fn limits(c: &mut Criterion) {
    let m = model("Ex5");
    c.bench_function("limit_constants_ex5_2e14", |b| {
        b.iter(|| limit_constants(&m, black_box(1 << 14), DEFAULT_LIMIT_TOL).unwrap())
    });
}

fn pmf(c: &mut Criterion) {
    let mut g = c.benchmark_group("population_pmf_n50");
    for id in ["Ex2", "Ex7i", "Ex9i"] {
        let m = model(id);
        g.bench_with_input(BenchmarkId::from_parameter(id), &m, |b, m| {
            b.iter(|| population_pmf(m, black_box(50), 1e-10, 1 << 16).unwrap())
        });
    }
    g.finish();
}

fn direct(c: &mut Criterion) {
    let mut g = c.benchmark_group("direct_ensemble_1e4");
    g.sample_size(20);
    for id in KERNEL_SCENARIOS {
        let m = model(id);
        g.bench_with_input(BenchmarkId::from_parameter(id), &m, |b, m| {
            b.iter(|| run_ensemble(m, 200, 10_000, black_box(1), 1, Mode::Direct, None).unwrap())
        });
    }
    g.finish();
}

fn generational(c: &mut Criterion) {
    let m = model("Ex9ii");
    c.bench_function("trajectory_ex9ii_200", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            simulate_trajectory(&m, 200, black_box(seed)).unwrap()
        })
    });
}

criterion_group!(kernels, constants, limits, pmf, direct, generational);
criterion_main!(kernels);
