//! Truncated Hilbert transform on atomic measures, the two-weight bilinear
//! form, and the Poisson integral.
//!
//! On finite atomic measures the transform is a single finite sum; the only
//! principal-value convention needed is that the self-atom term is dropped
//! when the evaluation point coincides with an atom of the source measure.

use crate::error::{Error, Result};
use crate::grid::{AtomicMeasure, Dyadic, DyadicInterval, Grid, MeasurePair};
use crate::haar::{martingale_difference, FunctionOnAtoms};

/// One evaluated kernel term `1 / (y - x)` from a source atom to a target
/// point; coincident points carry no term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEvaluation {
    pub source: f64,
    pub target: f64,
    pub value: f64,
}

impl KernelEvaluation {
    /// `None` exactly on the principal-value diagonal.
    pub fn new(source: &Dyadic, target: &Dyadic) -> Option<KernelEvaluation> {
        if source == target {
            return None;
        }
        let y = source.to_f64();
        let x = target.to_f64();
        Some(KernelEvaluation { source: y, target: x, value: 1.0 / (y - x) })
    }
}

/// `H(f sigma)(x) = sum_{y != x} f(y) sigma({y}) / (y - x)`.
pub fn hilbert_at(sigma: &AtomicMeasure, f: &FunctionOnAtoms, x: &Dyadic) -> f64 {
    debug_assert_eq!(f.len(), sigma.len());
    let mut acc = 0.0;
    for i in 0..sigma.len() {
        if let Some(k) = KernelEvaluation::new(&sigma.position(i), x) {
            acc += f.value(i) * sigma.mass_of(i) * k.value;
        }
    }
    acc
}

/// `H(1_K f sigma)` evaluated at every atom of `targets`.
pub fn hilbert_field_restricted(
    sigma: &AtomicMeasure,
    f: &FunctionOnAtoms,
    window: Option<std::ops::Range<usize>>,
    targets: &AtomicMeasure,
) -> Vec<f64> {
    let range = window.unwrap_or(0..sigma.len());
    let mut out = vec![0.0; targets.len()];
    for (t, slot) in out.iter_mut().enumerate() {
        let x = targets.position(t);
        let xf = targets.position_f64(t);
        let mut acc = 0.0;
        for i in range.clone() {
            if sigma.position(i) == x {
                continue;
            }
            acc += f.value(i) * sigma.mass_of(i) / (sigma.position_f64(i) - xf);
        }
        *slot = acc;
    }
    out
}

/// `H(f sigma)` at every atom of `targets`.
pub fn hilbert_field(sigma: &AtomicMeasure, f: &FunctionOnAtoms, targets: &AtomicMeasure) -> Vec<f64> {
    hilbert_field_restricted(sigma, f, None, targets)
}

/// The full bilinear pairing `<H_sigma f, g>_omega`, or its restriction to a
/// set of Haar frequency pairs `(I, J)`.
pub fn bilinear_form(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    g: &FunctionOnAtoms,
    restrict: Option<&[(DyadicInterval, DyadicInterval)]>,
) -> Result<f64> {
    check_disjoint(&pair.sigma, &pair.omega)?;
    match restrict {
        None => {
            let hf = hilbert_field(&pair.sigma, f, &pair.omega);
            let mut acc = 0.0;
            for (x, h) in hf.iter().enumerate() {
                acc += h * g.value(x) * pair.omega.mass_of(x);
            }
            Ok(acc)
        }
        Some(pairs) => {
            let mut acc = 0.0;
            for &(i, j) in pairs {
                acc += pair_inner_product(pair, f, g, i, j);
            }
            Ok(acc)
        }
    }
}

/// `<H_sigma D_I f, D_J g>_omega` for one frequency pair.
pub fn pair_inner_product(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    g: &FunctionOnAtoms,
    i: DyadicInterval,
    j: DyadicInterval,
) -> f64 {
    let grid = &pair.grid;
    let (_, df) = martingale_difference(grid, f, i);
    let (_, dg) = martingale_difference(grid, g, j);
    let src = pair.sigma.atom_range(i, grid);
    let tgt = pair.omega.atom_range(j, grid);
    let mut acc = 0.0;
    for t in tgt {
        let xf = pair.omega.position_f64(t);
        let mut h = 0.0;
        for s in src.clone() {
            h += df.value(s) * pair.sigma.mass_of(s) / (pair.sigma.position_f64(s) - xf);
        }
        acc += h * dg.value(t) * pair.omega.mass_of(t);
    }
    acc
}

pub fn check_disjoint(sigma: &AtomicMeasure, omega: &AtomicMeasure) -> Result<()> {
    let mut i = 0;
    let mut j = 0;
    while i < sigma.len() && j < omega.len() {
        match sigma.position(i).cmp(&omega.position(j)) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Err(Error::CommonAtom),
        }
    }
    Ok(())
}

/// Poisson integral `P(J, nu) = sum_y len(J) / (len(J) + |y - c_J|)^2 nu({y})`
/// for a weighted atom list.
pub fn poisson(grid: &Grid, j: DyadicInterval, atoms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let len = j.len(grid);
    let c = j.center(grid);
    let mut acc = 0.0;
    for (y, w) in atoms {
        let d = len + (y - c).abs();
        acc += len / (d * d) * w;
    }
    acc
}

/// `P(J, 1_{window} mu)` over the atoms of `mu` whose index lies in `window`.
pub fn poisson_on_measure(
    grid: &Grid,
    j: DyadicInterval,
    mu: &AtomicMeasure,
    window: std::ops::Range<usize>,
) -> f64 {
    poisson(
        grid,
        j,
        window.map(|i| (mu.position_f64(i), mu.mass_of(i))),
    )
}

/// `P(J, 1_{outer minus inner} mu)` for nested windows of atom indices.
pub fn poisson_on_complement(
    grid: &Grid,
    j: DyadicInterval,
    mu: &AtomicMeasure,
    outer: std::ops::Range<usize>,
    inner: std::ops::Range<usize>,
) -> f64 {
    debug_assert!(outer.start <= inner.start && inner.end <= outer.end);
    poisson(
        grid,
        j,
        (outer.start..inner.start)
            .chain(inner.end..outer.end)
            .map(|i| (mu.position_f64(i), mu.mass_of(i))),
    )
}

/// Weighted atoms helper for Poisson arguments built from a function.
pub fn weighted_atoms<'a>(
    mu: &'a AtomicMeasure,
    weights: &'a FunctionOnAtoms,
    window: std::ops::Range<usize>,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    window.map(move |i| (mu.position_f64(i), weights.value(i) * mu.mass_of(i)))
}

/// Median split point of an interval: the smallest atom position whose
/// cumulative mass inside reaches half the interval mass.
pub fn omega_median(mu: &AtomicMeasure, range: std::ops::Range<usize>) -> Option<Dyadic> {
    let total: f64 = range.clone().map(|i| mu.mass_of(i)).sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for i in range {
        acc += mu.mass_of(i);
        if acc >= 0.5 * total {
            return Some(mu.position(i));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::sync::Arc;

    fn grid() -> Grid {
        Grid::with_defaults(3, 6).unwrap()
    }

    #[test]
    fn kernel_single_atom() {
        let sigma = AtomicMeasure::new(vec![(Dyadic::new(5, 1), 1.0)]).unwrap(); // 2.5
        let sigma = Arc::new(sigma);
        let one = FunctionOnAtoms::constant(Arc::clone(&sigma), 1.0);
        let x = Dyadic::new(1, 1); // 0.5
        assert!((hilbert_at(&sigma, &one, &x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn principal_value_drops_self_term() {
        let sigma = Arc::new(AtomicMeasure::new(vec![(Dyadic::new(1, 1), 1.0)]).unwrap());
        let one = FunctionOnAtoms::constant(Arc::clone(&sigma), 1.0);
        assert_eq!(hilbert_at(&sigma, &one, &Dyadic::new(1, 1)), 0.0);
    }

    #[test]
    fn linearity() {
        let sigma = Arc::new(
            AtomicMeasure::new(vec![
                (Dyadic::new(5, 1), 0.75),
                (Dyadic::new(11, 2), 2.0),
            ])
            .unwrap(),
        );
        let f = FunctionOnAtoms::new(Arc::clone(&sigma), vec![1.5, -0.25]);
        let x = Dyadic::new(1, 1);
        let a = hilbert_at(&sigma, &f, &x);
        let b = hilbert_at(&sigma, &f.scaled(2.0), &x);
        assert!((b - 2.0 * a).abs() < 1e-14);
    }

    #[test]
    fn bilinear_single_kernel_term() {
        let grid = grid();
        let sigma = AtomicMeasure::new(vec![(Dyadic::new(1, 1), 1.0)]).unwrap();
        let omega = AtomicMeasure::new(vec![(Dyadic::new(9, 2), 1.0)]).unwrap(); // 2.25
        let pair = MeasurePair::new(grid, sigma, omega).unwrap();
        let f = FunctionOnAtoms::constant(Arc::clone(&pair.sigma), 1.0);
        let g = FunctionOnAtoms::constant(Arc::clone(&pair.omega), 1.0);
        let v = bilinear_form(&pair, &f, &g, None).unwrap();
        // Single kernel term 1/(0.5 - 2.25) of magnitude 4/7.
        assert!((v + 4.0 / 7.0).abs() < 1e-15);
        // Empty restriction sums to zero.
        assert_eq!(bilinear_form(&pair, &f, &g, Some(&[])).unwrap(), 0.0);
    }

    #[test]
    fn bilinear_antisymmetry() {
        let grid = grid();
        let mut rng = crate::rng::SplitMix64::new(3);
        let cells = rng.sample_distinct(1 << grid.l, 12);
        let mut s_atoms = Vec::new();
        let mut o_atoms = Vec::new();
        for (k, cell) in cells.iter().enumerate() {
            let pos = Dyadic::new((2 * cell + 1) as i64, (grid.l - grid.m) + 1);
            if k % 2 == 0 {
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
        let f = FunctionOnAtoms::new(
            Arc::clone(&pair.sigma),
            (0..pair.sigma.len()).map(|_| rng.next_gaussian()).collect(),
        );
        let g = FunctionOnAtoms::new(
            Arc::clone(&pair.omega),
            (0..pair.omega.len()).map(|_| rng.next_gaussian()).collect(),
        );
        let fwd = bilinear_form(&pair, &f, &g, None).unwrap();
        let rev = bilinear_form(&pair.swapped(), &g, &f, None).unwrap();
        assert!((fwd + rev).abs() < 1e-12 * (1.0 + fwd.abs()));
    }

    #[test]
    fn common_atom_detected() {
        let sigma = AtomicMeasure::new(vec![(Dyadic::new(1, 1), 1.0)]).unwrap();
        let omega = AtomicMeasure::new(vec![(Dyadic::new(1, 1), 1.0)]).unwrap();
        assert_eq!(check_disjoint(&sigma, &omega), Err(Error::CommonAtom));
    }

    #[test]
    fn monotonicity_window_on_separated_pair() {
        // nu supported far to the right of the doubled interval J: the Haar
        // component of the transform sits within [2/3, 8] of the Poisson
        // slope times the coordinate coefficient.
        let grid = Grid::with_defaults(3, 6).unwrap();
        let sigma = Arc::new(
            AtomicMeasure::new(vec![
                (Dyadic::new(45, 3), 1.0),  // 5.625
                (Dyadic::new(55, 3), 2.5),  // 6.875
            ])
            .unwrap(),
        );
        let omega = Arc::new(
            AtomicMeasure::new(vec![
                (Dyadic::new(3, 3), 1.0),   // 0.375
                (Dyadic::new(5, 3), 4.0),   // 0.625
            ])
            .unwrap(),
        );
        let j = DyadicInterval::new(3, 0); // [0, 1): 2J = [-0.5, 1.5) misses sigma
        let h = crate::haar::haar_function(&grid, &omega, j);
        assert!(!h.degenerate);
        let z = FunctionOnAtoms::coordinate(Arc::clone(&omega));
        let z_coeff = z.inner(&h.function).abs();
        let one = FunctionOnAtoms::constant(Arc::clone(&sigma), 1.0);
        let hvals = hilbert_field(&sigma, &one, &omega);
        let mut comp = 0.0;
        for x in 0..omega.len() {
            comp += hvals[x] * h.function.value(x) * omega.mass_of(x);
        }
        let pois = poisson(
            &grid,
            j,
            (0..sigma.len()).map(|i| (sigma.position_f64(i), sigma.mass_of(i))),
        );
        let ratio = comp.abs() / (pois / j.len(&grid) * z_coeff);
        assert!((2.0 / 3.0..=8.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn poisson_examples() {
        let grid = grid();
        // J = [0,1), unit mass at 3.5: len 1, |y-c| = 3 -> 1/16.
        let j = DyadicInterval::new(3, 0);
        let p = poisson(&grid, j, [(3.5, 1.0)]);
        assert!((p - 1.0 / 16.0).abs() < 1e-15);
        // Unit mass at the center evaluates to 1/len... scaled: len/(len)^2*1.
        let q = poisson(&grid, j, [(0.5, 1.0)]);
        assert!((q - 1.0).abs() < 1e-15);
        // Additivity in the measure argument.
        let a = poisson(&grid, j, [(3.5, 1.0)]);
        let b = poisson(&grid, j, [(5.25, 2.0)]);
        let ab = poisson(&grid, j, [(3.5, 1.0), (5.25, 2.0)]);
        assert!((ab - (a + b)).abs() < 1e-15);
    }
}
