//! Interval testing characteristics, scalar and quadratic, local and global.

use super::ascent::{quad_ratio_ascent, AscentConfig, QuadForm};
use super::{CharacteristicReport, Witness};
use crate::grid::{Dyadic, DyadicInterval, MeasurePair};
use crate::lp_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestingKind {
    ScalarLocal,
    ScalarGlobal,
    QuadLocal,
    QuadGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Forward,
    Dual,
}

/// Which intervals scalar suprema range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalMode {
    /// Grid intervals only (default).
    Dyadic,
    /// All intervals with endpoints on the atom-resolution lattice; only
    /// sensible for small grids.
    Exhaustive,
}

/// A supremum window: dyadic grid intervals carry their identity, lattice
/// intervals only their endpoints.
pub(crate) enum SupWindow {
    Grid(DyadicInterval),
    Lattice { lo: Dyadic, hi: Dyadic, lo_units: u64, hi_units: u64 },
}

pub(crate) fn sup_windows(pair: &MeasurePair, mode: IntervalMode) -> Vec<SupWindow> {
    let grid = &pair.grid;
    let mut out: Vec<SupWindow> = grid.intervals().map(SupWindow::Grid).collect();
    if mode == IntervalMode::Exhaustive {
        let cells = 1u64 << grid.l;
        for a in 0..cells {
            for b in (a + 1)..=cells {
                out.push(SupWindow::Lattice {
                    lo: grid.units_to_dyadic(a as i64),
                    hi: grid.units_to_dyadic(b as i64),
                    lo_units: a,
                    hi_units: b,
                });
            }
        }
    }
    out
}

impl SupWindow {
    pub(crate) fn bounds(&self, pair: &MeasurePair) -> (Dyadic, Dyadic) {
        match self {
            SupWindow::Grid(i) => (i.lo(&pair.grid), i.hi(&pair.grid)),
            SupWindow::Lattice { lo, hi, .. } => (*lo, *hi),
        }
    }

    pub(crate) fn witness(&self) -> Witness {
        match self {
            SupWindow::Grid(i) => Witness::Interval(*i),
            SupWindow::Lattice { lo, hi, .. } => Witness::GeneralInterval { lo: *lo, hi: *hi },
        }
    }

    pub(crate) fn length(&self, pair: &MeasurePair) -> f64 {
        match self {
            SupWindow::Grid(i) => i.len(&pair.grid),
            SupWindow::Lattice { lo_units, hi_units, .. } => {
                (hi_units - lo_units) as f64 * pair.grid.unit().to_f64()
            }
        }
    }
}

/// Testing characteristic.  Scalar kinds are exact suprema; quadratic kinds
/// are ascent lower bounds over coefficient families on all grid intervals.
/// The dual side swaps the measures and conjugates the exponent.
pub fn testing(
    pair: &MeasurePair,
    p: f64,
    kind: TestingKind,
    side: Side,
    mode: IntervalMode,
    config: &AscentConfig,
) -> CharacteristicReport {
    if side == Side::Dual {
        let swapped = pair.swapped();
        let mut report = testing(&swapped, crate::conjugate(p), kind, Side::Forward, mode, config);
        report.name.push_str(".dual");
        report.p = p;
        return report;
    }
    match kind {
        TestingKind::ScalarLocal => scalar(pair, p, true, mode),
        TestingKind::ScalarGlobal => scalar(pair, p, false, mode),
        TestingKind::QuadLocal => quad(pair, p, true, config),
        TestingKind::QuadGlobal => quad(pair, p, false, config),
    }
}

/// `H_sigma 1_{window}` evaluated at the omega atoms, optionally restricted
/// back to the window.
fn transform_of_indicator(
    pair: &MeasurePair,
    lo: &Dyadic,
    hi: &Dyadic,
    local: bool,
) -> Vec<f64> {
    let src = pair.sigma.range_between(lo, hi);
    let tgt = if local {
        pair.omega.range_between(lo, hi)
    } else {
        0..pair.omega.len()
    };
    let mut out = vec![0.0; pair.omega.len()];
    for t in tgt {
        let x = pair.omega.position_f64(t);
        let mut acc = 0.0;
        for s in src.clone() {
            acc += pair.sigma.mass_of(s) / (pair.sigma.position_f64(s) - x);
        }
        out[t] = acc;
    }
    out
}

fn scalar(pair: &MeasurePair, p: f64, local: bool, mode: IntervalMode) -> CharacteristicReport {
    let mut best = 0.0_f64;
    let mut witness = Witness::None;
    for window in sup_windows(pair, mode) {
        let (lo, hi) = window.bounds(pair);
        let sigma_mass = pair.sigma.mass_between(&lo, &hi);
        if sigma_mass <= 0.0 {
            continue; // zero numerator over zero mass counts as zero
        }
        let values = transform_of_indicator(pair, &lo, &hi, local);
        let num = lp_norm(&values, pair.omega.masses(), p);
        let ratio = num / sigma_mass.powf(1.0 / p);
        if ratio > best {
            best = ratio;
            witness = window.witness();
        }
    }
    let name = if local { "testing.scalar_local" } else { "testing.scalar_global" };
    CharacteristicReport::exact(name, p, best, witness)
}

fn quad(pair: &MeasurePair, p: f64, local: bool, config: &AscentConfig) -> CharacteristicReport {
    let grid = &pair.grid;
    // One family slot per grid interval with positive sigma mass.
    let mut intervals = Vec::new();
    let mut phi: Vec<Vec<f64>> = Vec::new(); // omega-side profiles
    for i in grid.intervals() {
        if pair.sigma.interval_mass(i, grid) <= 0.0 {
            continue;
        }
        let values = transform_of_indicator(pair, &i.lo(grid), &i.hi(grid), local);
        intervals.push(i);
        phi.push(values);
    }
    let dim = intervals.len();
    // Numerator rows over omega atoms; denominator rows over sigma atoms.
    let mut num_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pair.omega.len()];
    for (idx, values) in phi.iter().enumerate() {
        for (x, v) in values.iter().enumerate() {
            if *v != 0.0 {
                num_rows[x].push((idx, v * v));
            }
        }
    }
    let mut den_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pair.sigma.len()];
    for (idx, i) in intervals.iter().enumerate() {
        for y in pair.sigma.atom_range(*i, grid) {
            den_rows[y].push((idx, 1.0));
        }
    }
    let num = QuadForm { weights: pair.omega.masses().to_vec(), rows: num_rows, half_p: p / 2.0 };
    let den = QuadForm { weights: pair.sigma.masses().to_vec(), rows: den_rows, half_p: p / 2.0 };
    let outcome = quad_ratio_ascent(&num, &den, dim, p, config);
    let coeffs: Vec<f64> = outcome.argument.iter().map(|b| b.max(0.0).sqrt()).collect();
    let name = if local { "testing.quad_local" } else { "testing.quad_global" };
    let mut report = CharacteristicReport::lower_bound(
        name,
        p,
        outcome.value,
        Witness::WeightedFamily { intervals, coeffs },
    );
    report.seed = config.seed;
    report.iterations = outcome.iterations;
    report
}

/// Evaluate a stored quadratic testing witness directly.
pub fn reevaluate_quad(pair: &MeasurePair, report: &CharacteristicReport) -> Option<f64> {
    let local = report.name.contains("quad_local");
    let dual = report.name.ends_with(".dual");
    let eff_pair = if dual { pair.swapped() } else { pair.clone() };
    let eff_p = if dual { crate::conjugate(report.p) } else { report.p };
    if let Witness::WeightedFamily { intervals, coeffs } = &report.witness {
        let grid = &eff_pair.grid;
        let mut num_sq = vec![0.0; eff_pair.omega.len()];
        let mut den_sq = vec![0.0; eff_pair.sigma.len()];
        for (i, a) in intervals.iter().zip(coeffs) {
            let values = transform_of_indicator(&eff_pair, &i.lo(grid), &i.hi(grid), local);
            for (x, v) in values.iter().enumerate() {
                num_sq[x] += (a * v) * (a * v);
            }
            for y in eff_pair.sigma.atom_range(*i, grid) {
                den_sq[y] += a * a;
            }
        }
        let mut num = 0.0;
        for (x, s) in num_sq.iter().enumerate() {
            num += s.powf(eff_p / 2.0) * eff_pair.omega.mass_of(x);
        }
        let mut den = 0.0;
        for (y, s) in den_sq.iter().enumerate() {
            den += s.powf(eff_p / 2.0) * eff_pair.sigma.mass_of(y);
        }
        if den <= 0.0 {
            return Some(0.0);
        }
        Some((num / den).powf(1.0 / eff_p))
    } else {
        None
    }
}
