//! Property tests for the grid and Haar invariants.

use proptest::prelude::*;
use std::sync::Arc;
use twoweight::forms::{classify_pair, Category};
use twoweight::grid::{AtomicMeasure, Dyadic, DyadicInterval, Grid};
use twoweight::haar::{expectation, haar_function, FunctionOnAtoms};

fn grid() -> Grid {
    Grid::with_defaults(3, 6).unwrap()
}

fn interval_strategy(l: u32) -> impl Strategy<Value = DyadicInterval> {
    (0..=l).prop_flat_map(|level| {
        (0u64..(1u64 << level)).prop_map(move |offset| DyadicInterval::new(level, offset))
    })
}

/// Atom masses as sixteenths keep every partial sum exact in doubles.
fn measure_strategy(l: u32) -> impl Strategy<Value = AtomicMeasure> {
    proptest::collection::btree_map(0u64..(1u64 << l), 1u32..64, 1..20).prop_map(move |atoms| {
        let list: Vec<(Dyadic, f64)> = atoms
            .into_iter()
            .map(|(cell, sixteenths)| {
                (Dyadic::new((2 * cell + 1) as i64, l - 3 + 1), sixteenths as f64 / 16.0)
            })
            .collect();
        AtomicMeasure::new(list).unwrap()
    })
}

proptest! {
    #[test]
    fn navigation_round_trips(i in interval_strategy(6)) {
        let grid = grid();
        if i.level < grid.l {
            let l = i.left_child(&grid).unwrap();
            let r = i.right_child(&grid).unwrap();
            prop_assert_eq!(l.parent().unwrap(), i);
            prop_assert_eq!(r.parent().unwrap(), i);
            prop_assert_eq!(l.sibling().unwrap(), r);
            prop_assert_eq!(l.hi_units(&grid), r.lo_units(&grid));
            prop_assert_eq!(l.lo_units(&grid), i.lo_units(&grid));
            prop_assert_eq!(r.hi_units(&grid), i.hi_units(&grid));
        }
        if i.level > 0 {
            prop_assert_eq!(i.sibling().unwrap().sibling().unwrap(), i);
        }
    }

    #[test]
    fn mass_is_finitely_additive(mu in measure_strategy(6), a in 0i64..64, b in 0i64..64, c in 0i64..64) {
        let grid = grid();
        let mut cuts = [a, b, c];
        cuts.sort_unstable();
        let pa = grid.units_to_dyadic(cuts[0]);
        let pb = grid.units_to_dyadic(cuts[1]);
        let pc = grid.units_to_dyadic(cuts[2]);
        // Sixteenth masses make the float sums exact, so equality is exact.
        prop_assert_eq!(
            mu.mass_between(&pa, &pb) + mu.mass_between(&pb, &pc),
            mu.mass_between(&pa, &pc)
        );
    }

    #[test]
    fn classification_partitions_pairs(
        i in interval_strategy(6),
        j in interval_strategy(6),
    ) {
        let grid = grid();
        let c = classify_pair(i, j, &grid);
        // Disjoint pairs never land in nested classes and vice versa.
        let nested = i.contains(j) || j.contains(i);
        match c {
            Category::Disjoint | Category::DisjointDual => prop_assert!(!nested),
            _ => prop_assert!(nested),
        }
        if i == j {
            prop_assert_eq!(c, Category::Comparable);
        }
    }

    #[test]
    fn haar_is_mean_zero_and_normalized(mu in measure_strategy(6), q in interval_strategy(6)) {
        let grid = grid();
        let mu = Arc::new(mu);
        let h = haar_function(&grid, &mu, q);
        if h.degenerate {
            prop_assert!(h.function.values().iter().all(|v| *v == 0.0));
        } else {
            prop_assert!(h.function.integral().abs() < 1e-12);
            prop_assert!((h.function.inner(&h.function) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn telescoping_reconstructs(mu in measure_strategy(6), seed in 0u64..1000) {
        let grid = grid();
        let mu = Arc::new(mu);
        let mut rng = twoweight::rng::SplitMix64::new(seed);
        let f = FunctionOnAtoms::new(
            Arc::clone(&mu),
            (0..mu.len()).map(|_| rng.next_gaussian()).collect(),
        );
        let mean = expectation(&grid, &f, grid.top()).unwrap();
        let mut recon = vec![mean; mu.len()];
        for q in grid.intervals() {
            if q.level >= grid.l {
                continue;
            }
            let h = haar_function(&grid, &mu, q);
            if h.degenerate {
                continue;
            }
            let c = f.inner(&h.function);
            for k in 0..mu.len() {
                recon[k] += c * h.function.value(k);
            }
        }
        for k in 0..mu.len() {
            prop_assert!((recon[k] - f.value(k)).abs() <= 1e-9 * (1.0 + f.value(k).abs()));
        }
    }

    #[test]
    fn dyadic_roundtrip(num in -10_000i64..10_000, exp in 0u32..20) {
        let d = Dyadic::new(num, exp);
        let text = format!("{d}");
        prop_assert_eq!(Dyadic::parse(&text).unwrap(), d);
    }
}
