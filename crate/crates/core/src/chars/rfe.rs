//! Refined functional energy: ascent lower bound for the Whitney-localized
//! Poisson-energy inequality, and the exact kernel tests of the associated
//! positive operator.

use super::ascent::{gradient_ascent, AscentConfig};
use super::{CharacteristicReport, Witness};
use crate::corona::StoppingForest;
use crate::error::{Error, Result};
use crate::grid::{DyadicInterval, MeasurePair};
use crate::grid::{whitney, WhitneyKind};
use crate::haar::{haar_function, FunctionOnAtoms};
use std::sync::Arc;

/// Exact evaluations attached to the functional-energy kernel.
#[derive(Debug, Clone)]
pub struct KernelTests {
    /// Global testing constant of the kernel operator from sigma to omega.
    pub forward_testing: f64,
    /// Dual global testing constant from omega back to sigma.
    pub backward_testing: f64,
    /// Kernel monotonicity `K(x, y2) <= 4 K(x, y1)` on atom pairs with
    /// `x < y1 < y2` or `y2 < y1 < x`.
    pub monotonicity_ok: bool,
    pub max_monotonicity_ratio: f64,
    /// Holed quadratic p-energy over the canonical Whitney subpartitions.
    pub hole_energy: f64,
    /// Plugged quadratic p-energy over the same subpartitions.
    pub plug_energy: f64,
}

/// One Whitney slot: a corona top, a deep Whitney interval in its corona,
/// and the absolute projection of the coordinate function over the corona
/// intervals inside it.
struct Slot {
    top: DyadicInterval,
    /// |P_{corona(F) ∩ D[W]}| Z at every omega atom.
    abs_z: Vec<f64>,
    /// Atom index range of the Whitney interval in sigma.
    sigma_range: std::ops::Range<usize>,
    /// Atom index range of the top in sigma (for the holed Poisson kernel).
    top_sigma_range: std::ops::Range<usize>,
    len: f64,
    center: f64,
}

fn build_slots(pair: &MeasurePair, forest: &StoppingForest) -> Vec<Slot> {
    let grid = &pair.grid;
    let mut slots = Vec::new();
    for idx in 0..forest.tops().len() {
        let top = forest.tops()[idx];
        let corona = forest.corona_intervals(idx);
        let deep = whitney(grid, top, WhitneyKind::Deep { steps: grid.r });
        for w in deep {
            if forest.corona_top_index(w) != Some(idx) {
                continue; // Whitney interval left the corona
            }
            let mut abs_sq = vec![0.0; pair.omega.len()];
            let z = FunctionOnAtoms::coordinate(Arc::clone(&pair.omega));
            for j in &corona {
                if !w.contains(*j) || j.level >= grid.l {
                    continue;
                }
                let h = haar_function(grid, &pair.omega, *j);
                if h.degenerate {
                    continue;
                }
                let coeff = z.inner(&h.function);
                for x in pair.omega.atom_range(*j, grid) {
                    let d = coeff * h.function.value(x);
                    abs_sq[x] += d * d;
                }
            }
            let abs_z: Vec<f64> = abs_sq.iter().map(|s| s.sqrt()).collect();
            slots.push(Slot {
                top,
                abs_z,
                sigma_range: pair.sigma.atom_range(w, grid),
                top_sigma_range: pair.sigma.atom_range(top, grid),
                len: w.len(grid),
                center: w.center(grid),
            });
        }
    }
    slots
}

/// `P(W, h 1_{window} sigma) / len(W) = sum_y h(y) sigma_y / (len+|y-c|)^2`.
fn poisson_row(pair: &MeasurePair, slot: &Slot, holed: bool) -> Vec<f64> {
    let mut row = vec![0.0; pair.sigma.len()];
    for (y, slotv) in row.iter_mut().enumerate() {
        if holed && slot.top_sigma_range.contains(&y) {
            continue; // support restricted to the complement of the top
        }
        let d = slot.len + (pair.sigma.position_f64(y) - slot.center).abs();
        *slotv = pair.sigma.mass_of(y) / (d * d);
    }
    row
}

/// The full kernel `K(x, y) = sum_slots |P| Z(x) / (len_W + |y - c_W|)^2`.
fn kernel_value(slots: &[Slot], x: usize, y_pos: f64) -> f64 {
    let mut acc = 0.0;
    for slot in slots {
        if slot.abs_z[x] == 0.0 {
            continue;
        }
        let d = slot.len + (y_pos - slot.center).abs();
        acc += slot.abs_z[x] / (d * d);
    }
    acc
}

/// Direct evaluation of the holed Whitney inequality at one test function:
/// the ratio certified by a stored witness.
pub fn rfe_evaluate(pair: &MeasurePair, p: f64, forest: &StoppingForest, h: &[f64]) -> f64 {
    assert_eq!(h.len(), pair.sigma.len());
    let slots = build_slots(pair, forest);
    let den = crate::lp_norm(h, pair.sigma.masses(), p);
    if den <= 0.0 {
        return 0.0;
    }
    let mut per_atom = vec![0.0; pair.omega.len()];
    for slot in &slots {
        let row = poisson_row(pair, slot, true);
        let mut t = 0.0;
        for (y, r) in row.iter().enumerate() {
            t += r * h[y];
        }
        for (x, a) in slot.abs_z.iter().enumerate() {
            per_atom[x] += (t * a) * (t * a);
        }
    }
    let mut acc = 0.0;
    for (x, s) in per_atom.iter().enumerate() {
        acc += s.powf(p / 2.0) * pair.omega.mass_of(x);
    }
    acc.powf(1.0 / p) / den
}

/// Refined functional energy lower bound together with the kernel tests.
///
/// The forest must satisfy a sigma-Carleson bound; `carleson_bound` is the
/// acceptable norm.
pub fn refined_functional_energy(
    pair: &MeasurePair,
    p: f64,
    forest: &StoppingForest,
    carleson_bound: f64,
    config: &AscentConfig,
) -> Result<(CharacteristicReport, KernelTests)> {
    let norm = forest.carleson_norm(&pair.sigma);
    if norm > carleson_bound {
        return Err(Error::NotCarleson { norm, bound: carleson_bound });
    }
    let grid = &pair.grid;
    let slots = build_slots(pair, forest);

    // Lower bound: ascent over h of LHS(h) / ||h||_{L^p(sigma)} with the
    // holed Poisson kernel rows.
    let rows: Vec<Vec<f64>> = slots.iter().map(|s| poisson_row(pair, s, true)).collect();
    let n_sigma = pair.sigma.len();
    let lhs = |h: &[f64]| -> f64 {
        let mut per_atom = vec![0.0; pair.omega.len()];
        for (slot, row) in slots.iter().zip(&rows) {
            let mut t = 0.0;
            for (y, r) in row.iter().enumerate() {
                t += r * h[y];
            }
            for (x, a) in slot.abs_z.iter().enumerate() {
                per_atom[x] += (t * a) * (t * a);
            }
        }
        let mut acc = 0.0;
        for (x, s) in per_atom.iter().enumerate() {
            acc += s.powf(p / 2.0) * pair.omega.mass_of(x);
        }
        acc.powf(1.0 / p)
    };
    let value = |h: &[f64]| -> f64 {
        let den = crate::lp_norm(h, pair.sigma.masses(), p);
        if den <= 0.0 {
            return 0.0;
        }
        lhs(h) / den
    };
    let gradient = |h: &[f64], out: &mut [f64]| {
        // Numerical gradient would be too slow; use the analytic form of
        // d/dh [log num^p - log den^p] up to positive scale.
        let mut t = vec![0.0; slots.len()];
        for (k, row) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for (y, r) in row.iter().enumerate() {
                acc += r * h[y];
            }
            t[k] = acc;
        }
        let mut per_atom = vec![0.0; pair.omega.len()];
        for (k, slot) in slots.iter().enumerate() {
            for (x, a) in slot.abs_z.iter().enumerate() {
                per_atom[x] += (t[k] * a) * (t[k] * a);
            }
        }
        let mut num = 0.0;
        let mut atom_factor = vec![0.0; pair.omega.len()];
        for (x, s) in per_atom.iter().enumerate() {
            if *s > 0.0 {
                num += s.powf(p / 2.0) * pair.omega.mass_of(x);
                atom_factor[x] = s.powf(p / 2.0 - 1.0) * pair.omega.mass_of(x);
            }
        }
        let mut den = 0.0;
        let mut h_factor = vec![0.0; n_sigma];
        for (y, v) in h.iter().enumerate() {
            let av = v.abs();
            if av > 0.0 {
                den += av.powf(p) * pair.sigma.mass_of(y);
                h_factor[y] = av.powf(p - 1.0) * v.signum() * pair.sigma.mass_of(y);
            }
        }
        if num <= 0.0 || den <= 0.0 {
            for (y, g) in out.iter_mut().enumerate() {
                let mut kick = 0.0;
                for row in &rows {
                    kick += row[y];
                }
                *g = kick;
            }
            return;
        }
        for (y, g) in out.iter_mut().enumerate() {
            let mut dn = 0.0;
            for (k, slot) in slots.iter().enumerate() {
                if rows[k][y] == 0.0 {
                    continue;
                }
                let mut afac = 0.0;
                for (x, a) in slot.abs_z.iter().enumerate() {
                    afac += atom_factor[x] * a * a;
                }
                dn += afac * t[k] * rows[k][y];
            }
            *g = dn / num - h_factor[y] / den;
        }
    };
    let mut inits = vec![vec![1.0; n_sigma]];
    // Indicator starts on the tops.
    for idx in 0..forest.tops().len().min(8) {
        let top = forest.tops()[idx];
        let mut h = vec![0.0; n_sigma];
        for y in pair.sigma.atom_range(top, grid) {
            h[y] = 1.0;
        }
        inits.push(h);
    }
    let outcome = gradient_ascent(n_sigma, &inits, &value, &gradient, config);
    let mut report = CharacteristicReport::lower_bound(
        "refined_functional_energy",
        p,
        outcome.value,
        Witness::FunctionValues(outcome.argument),
    );
    report.seed = config.seed;
    report.iterations = outcome.iterations;

    // Kernel tests use the unholed kernel.
    let q = crate::conjugate(p);
    let mut forward: f64 = 0.0;
    let mut backward: f64 = 0.0;
    for i in grid.intervals() {
        let sm = pair.sigma.interval_mass(i, grid);
        if sm > 0.0 {
            // ||T_sigma 1_I||_{L^p(omega)} / |I|_sigma^{1/p}.
            let mut acc = 0.0;
            for x in 0..pair.omega.len() {
                let mut t = 0.0;
                for y in pair.sigma.atom_range(i, grid) {
                    t += kernel_value(&slots, x, pair.sigma.position_f64(y))
                        * pair.sigma.mass_of(y);
                }
                acc += t.abs().powf(p) * pair.omega.mass_of(x);
            }
            forward = forward.max(acc.powf(1.0 / p) / sm.powf(1.0 / p));
        }
        let om = pair.omega.interval_mass(i, grid);
        if om > 0.0 {
            // ||T*_omega 1_I||_{L^{p'}(sigma)} / |I|_omega^{1/p'}.
            let mut acc = 0.0;
            for y in 0..pair.sigma.len() {
                let mut t = 0.0;
                for x in pair.omega.atom_range(i, grid) {
                    t += kernel_value(&slots, x, pair.sigma.position_f64(y))
                        * pair.omega.mass_of(x);
                }
                acc += t.abs().powf(q) * pair.sigma.mass_of(y);
            }
            backward = backward.max(acc.powf(1.0 / q) / om.powf(1.0 / q));
        }
    }

    // Monotonicity in the second variable, both orientations.
    let mut mono_ok = true;
    let mut max_ratio: f64 = 0.0;
    for x in 0..pair.omega.len() {
        let xf = pair.omega.position_f64(x);
        for y1 in 0..pair.sigma.len() {
            for y2 in 0..pair.sigma.len() {
                let p1 = pair.sigma.position_f64(y1);
                let p2 = pair.sigma.position_f64(y2);
                let ordered = (xf < p1 && p1 < p2) || (p2 < p1 && p1 < xf);
                if !ordered {
                    continue;
                }
                let k1 = kernel_value(&slots, x, p1);
                let k2 = kernel_value(&slots, x, p2);
                if k1 > 0.0 {
                    let ratio = k2 / k1;
                    max_ratio = max_ratio.max(ratio);
                    if ratio > 4.0 * (1.0 + 1e-12) {
                        mono_ok = false;
                    }
                } else if k2 > 0.0 {
                    mono_ok = false;
                    max_ratio = f64::INFINITY;
                }
            }
        }
    }

    // Holed and plugged quadratic p-energies over the canonical Whitney
    // subpartitions, supremum over roots with positive sigma mass.
    let mut hole: f64 = 0.0;
    let mut plug: f64 = 0.0;
    for root in grid.intervals() {
        let sm = pair.sigma.interval_mass(root, grid);
        if sm <= 0.0 {
            continue;
        }
        let mut hole_atom = vec![0.0; pair.omega.len()];
        let mut plug_atom = vec![0.0; pair.omega.len()];
        for slot in &slots {
            if !root.contains(slot.top) {
                continue;
            }
            // Holed: P(W, 1_{F minus W} sigma); plugged: P(W, 1_W sigma).
            let mut holed_t = 0.0;
            let mut plug_t = 0.0;
            for y in slot.top_sigma_range.clone() {
                let d = slot.len + (pair.sigma.position_f64(y) - slot.center).abs();
                let v = pair.sigma.mass_of(y) / (d * d);
                if slot.sigma_range.contains(&y) {
                    plug_t += v;
                } else {
                    holed_t += v;
                }
            }
            for (x, a) in slot.abs_z.iter().enumerate() {
                hole_atom[x] += (holed_t * a) * (holed_t * a);
                plug_atom[x] += (plug_t * a) * (plug_t * a);
            }
        }
        let mut hole_acc = 0.0;
        let mut plug_acc = 0.0;
        for x in pair.omega.atom_range(root, grid) {
            hole_acc += hole_atom[x].powf(p / 2.0) * pair.omega.mass_of(x);
            plug_acc += plug_atom[x].powf(p / 2.0) * pair.omega.mass_of(x);
        }
        hole = hole.max(hole_acc / sm);
        plug = plug.max(plug_acc / sm);
    }

    let tests = KernelTests {
        forward_testing: forward,
        backward_testing: backward,
        monotonicity_ok: mono_ok,
        max_monotonicity_ratio: max_ratio,
        hole_energy: hole.powf(1.0 / p),
        plug_energy: plug.powf(1.0 / p),
    };
    Ok((report, tests))
}
