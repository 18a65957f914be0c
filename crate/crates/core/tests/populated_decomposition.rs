//! End-to-end decomposition on a deep grid where every named form carries
//! mass: the partition identities then certify real cancellation structure
//! rather than empty sums.

use twoweight::corona::build_cz_energy_forest;
use twoweight::dual_tree::iterate_sn;
use twoweight::forms::{decompose, stopping_form_split, Arithmetic};
use twoweight::instance::{generate, generate_functions, ExperimentConfig, MassDistribution};

fn deep_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        sigma_atoms: 40,
        omega_atoms: 40,
        masses: MassDistribution::LogUniform,
        ..Default::default()
    }
}

#[test]
fn every_form_carries_mass_and_partitions_exactly() {
    let config = deep_config(5);
    let pair = generate(&config).unwrap();
    let (f, g) = generate_functions(&config, &pair);
    // A single-corona forest keeps all deep pairs diagonal, populating the
    // paraproduct and stopping pieces.
    let shallow = build_cz_energy_forest(&pair, &f, 2.0, 1e9, pair.grid.top()).unwrap();
    let d = decompose(&pair, &f, &g, &shallow, Arithmetic::Float).unwrap();
    for (name, value) in [
        ("below", d.b_below),
        ("neighbour", d.b_neigh),
        ("diagonal", d.b_diag),
        ("paraproduct", d.b_para),
        ("stopping", d.b_stop),
        ("comparable", d.b_comp),
        ("disjoint", d.b_disj),
    ] {
        assert!(value != 0.0, "{name} vanished on the deep instance");
    }
    assert!(d.residuals.max_abs() < 1e-9, "{:?}", d.residuals);
    let exact = decompose(&pair, &f, &g, &shallow, Arithmetic::Rational).unwrap();
    assert!(exact.residuals.exact_zero, "{:?}", exact.residuals);

    // A genuinely deep forest moves mass into the far form.
    let deep = build_cz_energy_forest(&pair, &f, 2.0, 3.0, pair.grid.top()).unwrap();
    assert!(deep.tops().len() > 1);
    let d2 = decompose(&pair, &f, &g, &deep, Arithmetic::Float).unwrap();
    assert!(d2.b_far != 0.0, "far form vanished under a deep forest");
    assert!(d2.residuals.max_abs() < 1e-9);

    // The stopping form splits exactly against a dual-tree refinement.
    let refinement = iterate_sn(&pair, &g, &deep, 1.05, 2.0, 4).last().unwrap().clone();
    let split = stopping_form_split(&pair, &f, &g, &deep, &refinement).unwrap();
    let sum = split.separated + split.separated_dual + split.top_only + split.no_top;
    assert!(
        (sum - split.total).abs() <= 1e-9 * (1.0 + split.total.abs()),
        "split {sum} vs total {}",
        split.total
    );
}
