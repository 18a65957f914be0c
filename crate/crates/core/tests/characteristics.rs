//! Worked examples and independent oracles for the characteristic
//! estimators.

use std::sync::Arc;
use twoweight::chars::{
    best_subpartition, energy_characteristic, energy_term, muckenhoupt, operator_norm, p_energy,
    refined_functional_energy, stopping_energy, testing, vector_extension_gap, wbp, AscentConfig,
    IntervalMode, Mode, MuckenhouptKind, NormMethod, Side, TestingKind, Witness,
};
use twoweight::corona::StoppingForest;
use twoweight::grid::{AtomicMeasure, Dyadic, DyadicInterval, Grid, MeasurePair};
use twoweight::haar::FunctionOnAtoms;
use twoweight::rng::SplitMix64;

fn pair_of(grid: Grid, sigma: Vec<(Dyadic, f64)>, omega: Vec<(Dyadic, f64)>) -> MeasurePair {
    MeasurePair::new(
        grid,
        AtomicMeasure::new(sigma).unwrap(),
        AtomicMeasure::new(omega).unwrap(),
    )
    .unwrap()
}

fn default_grid(m: u32) -> Grid {
    Grid::with_defaults(m, 6).unwrap()
}

fn light() -> AscentConfig {
    AscentConfig::light(5)
}

#[test]
fn operator_norm_single_entry() {
    let pair = pair_of(
        default_grid(1),
        vec![(Dyadic::new(1, 1), 1.0)],
        vec![(Dyadic::new(3, 1), 1.0)],
    );
    let report = operator_norm(&pair, 2.0, NormMethod::ExactP2).unwrap();
    assert!((report.value - 1.0).abs() < 1e-12);
    assert_eq!(report.mode, Mode::Exact);
}

#[test]
fn operator_norm_row_cancellation() {
    // Two source atoms straddling the single target: row (-1, 1).
    let pair = pair_of(
        default_grid(2),
        vec![(Dyadic::new(1, 1), 1.0), (Dyadic::new(5, 1), 1.0)],
        vec![(Dyadic::new(3, 1), 1.0)],
    );
    let p2 = operator_norm(&pair, 2.0, NormMethod::ExactP2).unwrap();
    assert!((p2.value - 2.0_f64.sqrt()).abs() < 1e-12);
    // p = 3: optimum at f2 = -f1, value 2^{2/3}.
    let p3 = operator_norm(&pair, 3.0, NormMethod::BruteSmall).unwrap();
    let expected = 2.0_f64.powf(2.0 / 3.0);
    assert!((p3.value - expected).abs() < 1e-3, "got {}", p3.value);
    // The ascent estimator reaches the dense-search value.
    let asc = operator_norm(&pair, 3.0, NormMethod::Ascent { restarts: 8 }).unwrap();
    assert!(asc.value >= 0.999 * p3.value);
    assert!(asc.value <= expected + 1e-9);
}

#[test]
fn brute_small_rejects_large_instances() {
    let grid = default_grid(3);
    let sigma: Vec<(Dyadic, f64)> =
        (0..4).map(|k| (Dyadic::new(2 * k + 1, 3), 1.0)).collect();
    let pair = pair_of(grid, sigma, vec![(Dyadic::new(31, 2), 1.0)]);
    assert!(matches!(
        operator_norm(&pair, 2.0, NormMethod::BruteSmall),
        Err(twoweight::Error::TooLarge { .. })
    ));
}

#[test]
fn scalar_testing_cancellation_example() {
    let pair = pair_of(
        default_grid(2),
        vec![(Dyadic::new(1, 1), 1.0), (Dyadic::new(5, 1), 1.0)],
        vec![(Dyadic::new(3, 1), 1.0)],
    );
    let report = testing(&pair, 2.0, TestingKind::ScalarLocal, Side::Forward, IntervalMode::Dyadic, &light());
    assert!((report.value - 1.0).abs() < 1e-12);
    match report.witness {
        Witness::Interval(i) => assert_eq!(i, DyadicInterval::new(1, 0)),
        other => panic!("unexpected witness {other:?}"),
    }
}

#[test]
fn quad_testing_collapses_at_p2() {
    for seed in [3u64, 11, 19] {
        let config = twoweight::ExperimentConfig {
            seed,
            sigma_atoms: 10,
            omega_atoms: 10,
            masses: twoweight::instance::MassDistribution::LogUniform,
            ..Default::default()
        };
        let pair = twoweight::instance::generate(&config).unwrap();
        let scalar = testing(&pair, 2.0, TestingKind::ScalarLocal, Side::Forward, IntervalMode::Dyadic, &light());
        let quad = testing(&pair, 2.0, TestingKind::QuadLocal, Side::Forward, IntervalMode::Dyadic, &light());
        assert!(
            (scalar.value - quad.value).abs() <= 1e-9 * (1.0 + scalar.value),
            "seed {seed}: scalar {} quad {}",
            scalar.value,
            quad.value
        );
        // One-term families make the quadratic value at least the scalar one.
        assert!(quad.value + 1e-12 >= scalar.value);
    }
}

#[test]
fn dual_side_swaps_measures() {
    let pair = pair_of(
        default_grid(2),
        vec![(Dyadic::new(1, 1), 2.0), (Dyadic::new(5, 1), 1.0)],
        vec![(Dyadic::new(3, 1), 1.5)],
    );
    let fwd_on_swapped = testing(
        &pair.swapped(),
        1.5,
        TestingKind::ScalarLocal,
        Side::Forward,
        IntervalMode::Dyadic,
        &light(),
    );
    let dual = testing(&pair, 3.0, TestingKind::ScalarLocal, Side::Dual, IntervalMode::Dyadic, &light());
    assert!((fwd_on_swapped.value - dual.value).abs() < 1e-12);
}

#[test]
fn tailed_muckenhoupt_example() {
    let pair = pair_of(
        default_grid(3),
        vec![(Dyadic::new(1, 1), 1.0)],
        vec![(Dyadic::new(3, 1), 1.0)],
    );
    let report = muckenhoupt(
        &pair,
        2.0,
        MuckenhouptKind::TailedScalar,
        Side::Forward,
        IntervalMode::Dyadic,
        &light(),
    );
    // The window [0,1) contributes (len/(len+dist))^p-average 2/3 against a
    // unit density ratio; the supremum over all dyadic windows is larger
    // (exactly 1, attained at the cell holding the sigma atom).
    let at_unit_window = {
        let len = 1.0f64;
        let tail: f64 = (len / (len + 0.5)).powi(2);
        (tail / len).sqrt() * (1.0f64 / len).sqrt()
    };
    assert!((at_unit_window - 2.0 / 3.0).abs() < 1e-15);
    assert!(report.value + 1e-12 >= at_unit_window);
    assert!((report.value - 1.0).abs() < 1e-12, "got {}", report.value);
}

#[test]
fn empty_omega_zeroes_every_kind() {
    let grid = default_grid(3);
    let pair = MeasurePair::new(
        grid,
        AtomicMeasure::new(vec![(Dyadic::new(1, 1), 1.0)]).unwrap(),
        AtomicMeasure::empty(),
    )
    .unwrap();
    for kind in [
        MuckenhouptKind::TailedScalar,
        MuckenhouptKind::OffsetQuad,
        MuckenhouptKind::TripleQuad,
        MuckenhouptKind::GlobalQuad,
        MuckenhouptKind::PlainQuad,
        MuckenhouptKind::PuncturedScalar,
    ] {
        let report = muckenhoupt(&pair, 2.0, kind, Side::Forward, IntervalMode::Dyadic, &light());
        assert_eq!(report.value, 0.0, "{kind:?}");
    }
}

#[test]
fn punctured_scalar_flagged_as_plain() {
    let pair = pair_of(
        default_grid(3),
        vec![(Dyadic::new(1, 1), 1.0)],
        vec![(Dyadic::new(3, 1), 1.0)],
    );
    let report = muckenhoupt(
        &pair,
        2.0,
        MuckenhouptKind::PuncturedScalar,
        Side::Forward,
        IntervalMode::Dyadic,
        &light(),
    );
    assert!(report.flags.iter().any(|f| f.contains("plain")));
    assert!(report.value > 0.0);
}

#[test]
fn wbp_single_pair_witness() {
    // I = [0,1), J = [1,2) adjacent: the unit-coefficient witness gives 1.
    let pair = pair_of(
        default_grid(3),
        vec![(Dyadic::new(1, 1), 1.0)],
        vec![(Dyadic::new(3, 1), 1.0)],
    );
    let report = wbp(&pair, 2.0, pair.grid.r, &light());
    assert!(report.value >= 1.0 - 1e-9, "got {}", report.value);
    // Symmetry: with measures and exponent swapped the value matches.
    let swapped = wbp(&pair.swapped(), 2.0, pair.grid.r, &light());
    assert!((report.value - swapped.value).abs() <= 1e-6 * (1.0 + report.value));
}

#[test]
fn wbp_empty_family() {
    // No omega mass anywhere: no admissible pair survives.
    let grid = Grid::new(3, 6, 3, 1, 8, 4).unwrap();
    let pair = MeasurePair::new(
        grid,
        AtomicMeasure::new(vec![(Dyadic::new(1, 4), 1.0)]).unwrap(),
        AtomicMeasure::empty(),
    )
    .unwrap();
    let report = wbp(&pair, 2.0, 0, &light());
    assert_eq!(report.value, 0.0);
}

#[test]
fn p_energy_examples() {
    let grid = default_grid(2);
    let omega = Arc::new(
        AtomicMeasure::new(vec![(Dyadic::new(9, 2), 1.0), (Dyadic::new(11, 2), 1.0)]).unwrap(),
    );
    let j = DyadicInterval::new(2, 2); // [2, 3)
    for p in [1.5, 2.0, 3.0] {
        let e = p_energy(&omega, &grid, j, p);
        assert!((e.value - 0.25).abs() < 1e-12, "p={p} got {}", e.value);
    }
    // Single atom: zero energy.
    let single = Arc::new(AtomicMeasure::new(vec![(Dyadic::new(9, 2), 1.0)]).unwrap());
    assert_eq!(p_energy(&single, &grid, j, 2.0).value, 0.0);
    // Weighted two-atom example: mean 2.625, value sqrt(3/64).
    let weighted = Arc::new(
        AtomicMeasure::new(vec![(Dyadic::new(9, 2), 1.0), (Dyadic::new(11, 2), 3.0)]).unwrap(),
    );
    let e = p_energy(&weighted, &grid, j, 2.0);
    assert!((e.value - (3.0f64 / 64.0).sqrt()).abs() < 1e-12, "got {}", e.value);
    // The square form agrees at p = 2 by orthogonality.
    assert!((e.square_form - e.value).abs() < 1e-12);
}

#[test]
fn energy_characteristic_worked_example() {
    let pair = pair_of(
        default_grid(2),
        vec![(Dyadic::new(1, 1), 1.0)],
        vec![(Dyadic::new(9, 2), 1.0), (Dyadic::new(11, 2), 1.0)],
    );
    let report = energy_characteristic(&pair, 2.0);
    assert!(
        (report.value.powi(2) - 1.0 / 648.0).abs() < 1e-15,
        "got {}",
        report.value.powi(2)
    );
    match &report.witness {
        Witness::Partition { root, parts } => {
            assert_eq!(*root, DyadicInterval::new(0, 0));
            assert_eq!(parts, &vec![DyadicInterval::new(2, 2)]);
        }
        other => panic!("unexpected witness {other:?}"),
    }
}

#[test]
fn energy_zero_when_every_cell_is_single() {
    // Omega atoms isolated at the finest scale in every candidate: spread
    // them one per coarse region.
    let pair = pair_of(
        default_grid(3),
        vec![(Dyadic::new(1, 1), 1.0)],
        vec![(Dyadic::new(9, 1), 1.0)],
    );
    let report = energy_characteristic(&pair, 2.0);
    assert_eq!(report.value, 0.0);
}

/// Exhaustive subpartition oracle: enumerate every pairwise-disjoint family
/// of positive-energy subintervals by recursive cartesian products, pruning
/// subtrees that carry fewer than two omega atoms.
fn oracle_best(pair: &MeasurePair, p: f64, root: DyadicInterval, node: DyadicInterval) -> Vec<f64> {
    let grid = &pair.grid;
    if pair.omega.atom_range(node, grid).len() < 2 {
        // Nothing of value below; only the empty selection remains.
        return vec![0.0];
    }
    let mut options = vec![0.0, energy_term(pair, p, root, node)];
    if node.level < grid.l {
        let left = oracle_best(pair, p, root, node.left_child(grid).unwrap());
        let right = oracle_best(pair, p, root, node.right_child(grid).unwrap());
        for l in &left {
            for r in &right {
                options.push(l + r);
            }
        }
    }
    options
}

#[test]
fn energy_dp_matches_exhaustive_oracle() {
    for seed in 0..6u64 {
        let grid = Grid::new(2, 5, 2, 1, 8, 3).unwrap();
        let mut rng = SplitMix64::new(seed + 100);
        let cells = rng.sample_distinct(1 << grid.l, 9);
        let mut s_atoms = Vec::new();
        let mut o_atoms = Vec::new();
        for (k, cell) in cells.iter().enumerate() {
            let pos = Dyadic::new((2 * cell + 1) as i64, (grid.l - grid.m) + 1);
            if k < 3 {
                s_atoms.push((pos, 0.5 + rng.next_f64()));
            } else {
                o_atoms.push((pos, 0.5 + rng.next_f64()));
            }
        }
        let pair = MeasurePair::new(
            grid,
            AtomicMeasure::new(s_atoms).unwrap(),
            AtomicMeasure::new(o_atoms).unwrap(),
        )
        .unwrap();
        for p in [1.5, 2.0, 3.0] {
            for root in grid.intervals() {
                if pair.sigma.interval_mass(root, &grid) <= 0.0 {
                    continue;
                }
                let (dp, _) = best_subpartition(&pair, p, root);
                let best = oracle_best(&pair, p, root, root)
                    .into_iter()
                    .fold(0.0f64, f64::max);
                assert!(
                    (dp - best).abs() <= 1e-12 * (1.0 + best),
                    "seed={seed} p={p} root={root:?}: dp={dp} oracle={best}"
                );
            }
        }
    }
}

#[test]
fn stopping_energy_flags_zero_mass_coronas() {
    let pair = pair_of(
        default_grid(2),
        vec![(Dyadic::new(1, 1), 1.0)],
        vec![(Dyadic::new(9, 2), 1.0), (Dyadic::new(11, 2), 1.0)],
    );
    let forest = StoppingForest::trivial(pair.grid, pair.grid.top());
    let report = stopping_energy(&pair, 2.0, &forest);
    // The only positive Poisson-energy interval carries no sigma mass.
    assert_eq!(report.value, 0.0);
    assert!(!report.flags.is_empty());
}

#[test]
fn stopping_energy_positive_case() {
    let pair = pair_of(
        default_grid(2),
        vec![(Dyadic::new(1, 1), 1.0), (Dyadic::new(17, 3), 4.0)], // 0.5 and 2.125
        vec![(Dyadic::new(9, 2), 1.0), (Dyadic::new(11, 2), 1.0)],
    );
    let forest = StoppingForest::trivial(pair.grid, pair.grid.top());
    let report = stopping_energy(&pair, 2.0, &forest);
    assert!(report.value > 0.0);
    if let Witness::TopAndInterval { top, .. } = report.witness {
        assert_eq!(top, pair.grid.top());
    } else {
        panic!("missing witness");
    }
}

#[test]
fn refined_functional_energy_reports() {
    let config = twoweight::ExperimentConfig {
        seed: 21,
        sigma_atoms: 8,
        omega_atoms: 12,
        ..Default::default()
    };
    let pair = twoweight::instance::generate(&config).unwrap();
    let forest = StoppingForest::trivial(pair.grid, pair.grid.top());
    let (report, tests) =
        refined_functional_energy(&pair, 2.0, &forest, 8.0, &light()).unwrap();
    assert!(tests.monotonicity_ok, "max ratio {}", tests.max_monotonicity_ratio);
    assert!(tests.max_monotonicity_ratio <= 4.0 + 1e-9);
    assert!(report.value >= 0.0);
    assert!(tests.forward_testing.is_finite() && tests.backward_testing.is_finite());
    assert!(tests.hole_energy >= 0.0 && tests.plug_energy >= 0.0);
}

#[test]
fn refined_functional_energy_empty_whitney() {
    // Tops at the next-to-finest level leave no room for deep Whitney
    // intervals inside any corona.
    let config = twoweight::ExperimentConfig { seed: 33, ..Default::default() };
    let pair = twoweight::instance::generate(&config).unwrap();
    let grid = pair.grid;
    let mut tops = vec![grid.top()];
    for level in 1..=grid.l {
        for off in 0..(1u64 << level) {
            tops.push(DyadicInterval::new(level, off));
        }
    }
    let forest = StoppingForest::from_tops(grid, grid.top(), tops).unwrap();
    // Every corona is a single interval, so the deep Whitney family inside
    // each corona is empty and the lower bound collapses to zero.
    let result = refined_functional_energy(&pair, 2.0, &forest, 1e9, &light()).unwrap();
    assert_eq!(result.0.value, 0.0);
}

#[test]
fn vector_gap_basics() {
    let pair = pair_of(
        default_grid(2),
        vec![(Dyadic::new(1, 1), 1.0), (Dyadic::new(5, 1), 2.0)],
        vec![(Dyadic::new(3, 1), 1.0), (Dyadic::new(13, 2), 0.5)],
    );
    let f = FunctionOnAtoms::new(Arc::clone(&pair.sigma), vec![1.0, -2.0]);
    let single = vector_extension_gap(&pair, 2.5, std::slice::from_ref(&f)).unwrap();
    let hf = twoweight::hilbert::hilbert_field(&pair.sigma, &f, &pair.omega);
    let direct = twoweight::lp_norm(&hf, pair.omega.masses(), 2.5) / f.lp_norm(2.5);
    assert!((single - direct).abs() < 1e-12);
    // Duplicated entries cancel in the ratio.
    let double = vector_extension_gap(&pair, 2.5, &[f.clone(), f.clone()]).unwrap();
    assert!((double - single).abs() < 1e-12);
    // Zero family is rejected.
    let zero = FunctionOnAtoms::zero(Arc::clone(&pair.sigma));
    assert!(vector_extension_gap(&pair, 2.5, &[zero]).is_err());
}

#[test]
fn lower_bound_witnesses_reproduce() {
    let config = twoweight::ExperimentConfig {
        seed: 9,
        sigma_atoms: 12,
        omega_atoms: 12,
        masses: twoweight::instance::MassDistribution::LogUniform,
        ..Default::default()
    };
    let pair = twoweight::instance::generate(&config).unwrap();
    for p in [1.5, 2.0, 3.0] {
        for report in [
            testing(&pair, p, TestingKind::QuadLocal, Side::Forward, IntervalMode::Dyadic, &light()),
            testing(&pair, p, TestingKind::QuadLocal, Side::Dual, IntervalMode::Dyadic, &light()),
            testing(&pair, p, TestingKind::QuadGlobal, Side::Forward, IntervalMode::Dyadic, &light()),
            muckenhoupt(&pair, p, MuckenhouptKind::PlainQuad, Side::Forward, IntervalMode::Dyadic, &light()),
            muckenhoupt(&pair, p, MuckenhouptKind::OffsetQuad, Side::Forward, IntervalMode::Dyadic, &light()),
            muckenhoupt(&pair, p, MuckenhouptKind::TripleQuad, Side::Forward, IntervalMode::Dyadic, &light()),
            muckenhoupt(&pair, p, MuckenhouptKind::GlobalQuad, Side::Forward, IntervalMode::Dyadic, &light()),
        ] {
            let re = twoweight::chars::reevaluate(&pair, &report)
                .unwrap_or_else(|| panic!("no reevaluation for {}", report.name));
            assert!(
                (re - report.value).abs() <= 1e-9 * (1.0 + report.value),
                "{} at p={p}: stored {} reevaluated {re}",
                report.name,
                report.value
            );
        }
        let w = wbp(&pair, p, pair.grid.r, &light());
        let re = twoweight::chars::reevaluate_wbp(&pair, &w).unwrap();
        assert!((re - w.value).abs() <= 1e-9 * (1.0 + w.value));
    }
}
