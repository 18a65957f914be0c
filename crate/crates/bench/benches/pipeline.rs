//! Benchmarks for the hot paths: form decomposition, the energy dynamic
//! program, stopping-time construction, and the norm estimators.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use twoweight::chars::{
    energy_characteristic, operator_norm, testing, AscentConfig, IntervalMode, NormMethod, Side,
    TestingKind,
};
use twoweight::corona::build_cz_energy_forest;
use twoweight::forms::{decompose, Arithmetic};
use twoweight::instance::{generate, generate_functions, ExperimentConfig, MassDistribution};

fn config(atoms: usize) -> ExperimentConfig {
    ExperimentConfig {
        seed: 42,
        sigma_atoms: atoms,
        omega_atoms: atoms,
        masses: MassDistribution::LogUniform,
        adversarial: atoms > 30,
        ..Default::default()
    }
}

fn bench_decompose(c: &mut Criterion) {
    let cfg = config(24);
    let pair = generate(&cfg).unwrap();
    let (f, g) = generate_functions(&cfg, &pair);
    let forest = build_cz_energy_forest(&pair, &f, 2.0, cfg.gamma, pair.grid.top()).unwrap();
    c.bench_function("decompose_float_24_atoms", |b| {
        b.iter(|| decompose(&pair, &f, &g, &forest, Arithmetic::Float).unwrap())
    });
    c.bench_function("decompose_rational_24_atoms", |b| {
        b.iter_batched(
            || (),
            |_| decompose(&pair, &f, &g, &forest, Arithmetic::Rational).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_energy_dp(c: &mut Criterion) {
    let cfg = config(32);
    let pair = generate(&cfg).unwrap();
    c.bench_function("energy_characteristic_32_atoms", |b| {
        b.iter(|| energy_characteristic(&pair, 2.0))
    });
}

fn bench_forest(c: &mut Criterion) {
    let cfg = config(32);
    let pair = generate(&cfg).unwrap();
    let (f, _) = generate_functions(&cfg, &pair);
    c.bench_function("cz_energy_forest_32_atoms", |b| {
        b.iter(|| build_cz_energy_forest(&pair, &f, 2.0, 4.0, pair.grid.top()).unwrap())
    });
}

fn bench_norms(c: &mut Criterion) {
    let cfg = config(32);
    let pair = generate(&cfg).unwrap();
    c.bench_function("operator_norm_svd_32_atoms", |b| {
        b.iter(|| operator_norm(&pair, 2.0, NormMethod::ExactP2).unwrap())
    });
    c.bench_function("operator_norm_ascent_32_atoms", |b| {
        b.iter(|| operator_norm(&pair, 3.0, NormMethod::Ascent { restarts: 4 }).unwrap())
    });
    let ascent = AscentConfig::light(1);
    c.bench_function("quad_testing_32_atoms", |b| {
        b.iter(|| {
            testing(&pair, 2.0, TestingKind::QuadLocal, Side::Forward, IntervalMode::Dyadic, &ascent)
        })
    });
}

criterion_group!(benches, bench_decompose, bench_energy_dp, bench_forest, bench_norms);
criterion_main!(benches);
