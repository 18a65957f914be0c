//! Muckenhoupt characteristics (tailed, offset, triple, global, plain,
//! punctured) and the quadratic weak boundedness characteristic.

use super::ascent::{gradient_ascent, quad_ratio_ascent, AscentConfig, QuadForm};
use super::testing::{sup_windows, IntervalMode, Side};
use super::{CharacteristicReport, Witness};
use crate::grid::{DyadicInterval, MeasurePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuckenhouptKind {
    /// Scalar characteristic with the full Poisson-type tail.
    TailedScalar,
    /// Quadratic, paired with a disjoint same-length dyadic neighbor.
    OffsetQuad,
    /// Quadratic with test functions supported in the punctured triple.
    TripleQuad,
    /// Quadratic with test functions supported outside the interval.
    GlobalQuad,
    /// Quadratic with plain mass-ratio coefficients on the same interval.
    PlainQuad,
    /// Scalar with the heaviest common point mass removed; with disjoint
    /// atoms this equals the plain scalar ratio and is flagged as such.
    PuncturedScalar,
}

pub fn muckenhoupt(
    pair: &MeasurePair,
    p: f64,
    kind: MuckenhouptKind,
    side: Side,
    mode: IntervalMode,
    config: &AscentConfig,
) -> CharacteristicReport {
    if side == Side::Dual {
        let swapped = pair.swapped();
        let mut report = muckenhoupt(&swapped, crate::conjugate(p), kind, Side::Forward, mode, config);
        report.name.push_str(".dual");
        report.p = p;
        return report;
    }
    match kind {
        MuckenhouptKind::TailedScalar => tailed_scalar(pair, p, mode),
        MuckenhouptKind::PuncturedScalar => punctured_scalar(pair, p, mode),
        MuckenhouptKind::PlainQuad => plain_quad(pair, p, config),
        MuckenhouptKind::OffsetQuad => offset_quad(pair, p, config),
        MuckenhouptKind::TripleQuad => functional_quad(pair, p, config, false),
        MuckenhouptKind::GlobalQuad => functional_quad(pair, p, config, true),
    }
}

fn tailed_scalar(pair: &MeasurePair, p: f64, mode: IntervalMode) -> CharacteristicReport {
    let q = crate::conjugate(p);
    let mut best = 0.0_f64;
    let mut witness = Witness::None;
    for window in sup_windows(pair, mode) {
        let (lo, hi) = window.bounds(pair);
        let len = window.length(pair);
        let sigma_mass = pair.sigma.mass_between(&lo, &hi);
        if sigma_mass <= 0.0 {
            continue;
        }
        // Tail integral over all omega atoms with weight
        // (len / (len + dist(x, I)))^p.
        let lof = lo.to_f64();
        let hif = hi.to_f64();
        let mut tail = 0.0;
        for x in 0..pair.omega.len() {
            let pos = pair.omega.position_f64(x);
            let dist = if pos < lof {
                lof - pos
            } else if pos >= hif {
                pos - hif
            } else {
                0.0
            };
            tail += (len / (len + dist)).powf(p) * pair.omega.mass_of(x);
        }
        let value = (tail / len).powf(1.0 / p) * (sigma_mass / len).powf(1.0 / q);
        if value > best {
            best = value;
            witness = window.witness();
        }
    }
    CharacteristicReport::exact("muckenhoupt.tailed_scalar", p, best, witness)
}

fn punctured_scalar(pair: &MeasurePair, p: f64, mode: IntervalMode) -> CharacteristicReport {
    // The measures share no point masses, so the punctured omega mass is the
    // full omega mass and the characteristic coincides with the plain scalar
    // one; the report is flagged accordingly.
    let q = crate::conjugate(p);
    let mut best = 0.0_f64;
    let mut witness = Witness::None;
    for window in sup_windows(pair, mode) {
        let (lo, hi) = window.bounds(pair);
        let len = window.length(pair);
        let sigma_mass = pair.sigma.mass_between(&lo, &hi);
        let omega_mass = pair.omega.mass_between(&lo, &hi);
        if sigma_mass <= 0.0 || omega_mass <= 0.0 {
            continue;
        }
        let value = (omega_mass / len).powf(1.0 / p) * (sigma_mass / len).powf(1.0 / q);
        if value > best {
            best = value;
            witness = window.witness();
        }
    }
    let mut report = CharacteristicReport::exact("muckenhoupt.punctured_scalar", p, best, witness);
    report.flags.push("no_common_masses_equals_plain".into());
    report
}

fn plain_quad(pair: &MeasurePair, p: f64, config: &AscentConfig) -> CharacteristicReport {
    let grid = &pair.grid;
    let mut intervals = Vec::new();
    let mut ratios = Vec::new();
    for i in grid.intervals() {
        let sm = pair.sigma.interval_mass(i, grid);
        if sm <= 0.0 || pair.omega.interval_mass(i, grid) <= 0.0 {
            continue;
        }
        intervals.push(i);
        ratios.push(sm / i.len(grid));
    }
    let dim = intervals.len();
    let mut num_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pair.omega.len()];
    let mut den_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pair.sigma.len()];
    for (idx, i) in intervals.iter().enumerate() {
        for x in pair.omega.atom_range(*i, grid) {
            num_rows[x].push((idx, ratios[idx] * ratios[idx]));
        }
        for y in pair.sigma.atom_range(*i, grid) {
            den_rows[y].push((idx, 1.0));
        }
    }
    let num = QuadForm { weights: pair.omega.masses().to_vec(), rows: num_rows, half_p: p / 2.0 };
    let den = QuadForm { weights: pair.sigma.masses().to_vec(), rows: den_rows, half_p: p / 2.0 };
    let outcome = quad_ratio_ascent(&num, &den, dim, p, config);
    let coeffs: Vec<f64> = outcome.argument.iter().map(|b| b.max(0.0).sqrt()).collect();
    let mut report = CharacteristicReport::lower_bound(
        "muckenhoupt.plain_quad",
        p,
        outcome.value,
        Witness::WeightedFamily { intervals, coeffs },
    );
    report.seed = config.seed;
    report.iterations = outcome.iterations;
    report
}

/// All offset companions of a grid interval: disjoint, equal length, within
/// `r` lengths.
fn offset_companions(pair: &MeasurePair, i: DyadicInterval) -> Vec<DyadicInterval> {
    let grid = &pair.grid;
    let r = grid.r as i64;
    let mut out = Vec::new();
    let count = 1i64 << i.level;
    for delta in -(r + 1)..=(r + 1) {
        if delta == 0 {
            continue;
        }
        let off = i.offset as i64 + delta;
        if off < 0 || off >= count {
            continue;
        }
        let star = DyadicInterval::new(i.level, off as u64);
        // Gap between [n, n+1) and [n', n'+1) scaled by the length is
        // (|delta| - 1) lengths; admissible when at most r lengths.
        if (delta.abs() - 1) <= r {
            out.push(star);
        }
    }
    out
}

fn offset_quad(pair: &MeasurePair, p: f64, config: &AscentConfig) -> CharacteristicReport {
    let grid = &pair.grid;
    let mut pairs = Vec::new();
    let mut ratios = Vec::new();
    for i in grid.intervals() {
        if pair.omega.interval_mass(i, grid) <= 0.0 {
            continue;
        }
        for star in offset_companions(pair, i) {
            let sm = pair.sigma.interval_mass(star, grid);
            if sm <= 0.0 {
                continue;
            }
            pairs.push((i, star));
            ratios.push(sm / star.len(grid));
        }
    }
    let dim = pairs.len();
    let mut num_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pair.omega.len()];
    let mut den_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pair.sigma.len()];
    for (idx, (i, star)) in pairs.iter().enumerate() {
        for x in pair.omega.atom_range(*i, grid) {
            num_rows[x].push((idx, ratios[idx] * ratios[idx]));
        }
        for y in pair.sigma.atom_range(*star, grid) {
            den_rows[y].push((idx, 1.0));
        }
    }
    let num = QuadForm { weights: pair.omega.masses().to_vec(), rows: num_rows, half_p: p / 2.0 };
    let den = QuadForm { weights: pair.sigma.masses().to_vec(), rows: den_rows, half_p: p / 2.0 };
    let outcome = quad_ratio_ascent(&num, &den, dim, p, config);
    let coeffs: Vec<f64> = outcome.argument.iter().map(|b| b.max(0.0).sqrt()).collect();
    let (is_, stars): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
    let mut report = CharacteristicReport::lower_bound(
        "muckenhoupt.offset_quad",
        p,
        outcome.value,
        Witness::PairFamily {
            pairs: is_.into_iter().zip(stars).collect(),
            a: coeffs,
            b: Vec::new(),
        },
    );
    report.seed = config.seed;
    report.iterations = outcome.iterations;
    report
}

/// Triple (`global = false`) or global (`global = true`) quadratic
/// Muckenhoupt characteristic: ascent over one test function per interval,
/// supported in the punctured triple (resp. the complement).
fn functional_quad(
    pair: &MeasurePair,
    p: f64,
    config: &AscentConfig,
    global: bool,
) -> CharacteristicReport {
    let grid = &pair.grid;
    // Families: per interval, the sigma atoms of the support window and the
    // kernel sigma({y})/|y - c_I|.
    let mut intervals = Vec::new();
    let mut windows: Vec<Vec<usize>> = Vec::new();
    let mut kernels: Vec<Vec<f64>> = Vec::new();
    for i in grid.intervals() {
        if pair.omega.interval_mass(i, grid) <= 0.0 {
            continue;
        }
        let c = i.center(grid);
        let len = i.len(grid);
        let inside = pair.sigma.atom_range(i, grid);
        let mut idxs = Vec::new();
        let mut ker = Vec::new();
        for y in 0..pair.sigma.len() {
            if inside.contains(&y) {
                continue;
            }
            let pos = pair.sigma.position_f64(y);
            if !global {
                // Support in 3I minus I.
                if pos < c - 1.5 * len || pos >= c + 1.5 * len {
                    continue;
                }
            }
            idxs.push(y);
            ker.push(pair.sigma.mass_of(y) / (pos - c).abs());
        }
        if idxs.is_empty() {
            continue;
        }
        intervals.push(i);
        windows.push(idxs);
        kernels.push(ker);
    }
    let name = if global { "muckenhoupt.global_quad" } else { "muckenhoupt.triple_quad" };
    if intervals.is_empty() {
        return CharacteristicReport::lower_bound(name, p, 0.0, Witness::None);
    }
    // Parameter vector: concatenated test-function values per family.
    let offsets: Vec<usize> = windows
        .iter()
        .scan(0usize, |acc, w| {
            let o = *acc;
            *acc += w.len();
            Some(o)
        })
        .collect();
    let dim: usize = windows.iter().map(|w| w.len()).sum();
    let omega_rows: Vec<std::ops::Range<usize>> = intervals
        .iter()
        .map(|i| pair.omega.atom_range(*i, grid))
        .collect();
    let value = |x: &[f64]| -> f64 {
        let t: Vec<f64> = (0..intervals.len())
            .map(|k| {
                let mut acc = 0.0;
                for (j, &y) in windows[k].iter().enumerate() {
                    let _ = y;
                    acc += kernels[k][j] * x[offsets[k] + j];
                }
                acc
            })
            .collect();
        let mut num = 0.0;
        let mut per_atom = vec![0.0; pair.omega.len()];
        for (k, row) in omega_rows.iter().enumerate() {
            for a in row.clone() {
                per_atom[a] += t[k] * t[k];
            }
        }
        for (a, s) in per_atom.iter().enumerate() {
            num += s.powf(p / 2.0) * pair.omega.mass_of(a);
        }
        let mut den_sq = vec![0.0; pair.sigma.len()];
        for (k, w) in windows.iter().enumerate() {
            for (j, &y) in w.iter().enumerate() {
                let v = x[offsets[k] + j];
                den_sq[y] += v * v;
            }
        }
        let mut den = 0.0;
        for (y, s) in den_sq.iter().enumerate() {
            den += s.powf(p / 2.0) * pair.sigma.mass_of(y);
        }
        if den <= 0.0 {
            return 0.0;
        }
        (num / den).powf(1.0 / p)
    };
    let gradient = |x: &[f64], out: &mut [f64]| {
        // Gradient of log(num) - log(den) up to positive scaling.
        let t: Vec<f64> = (0..intervals.len())
            .map(|k| {
                let mut acc = 0.0;
                for (j, _) in windows[k].iter().enumerate() {
                    acc += kernels[k][j] * x[offsets[k] + j];
                }
                acc
            })
            .collect();
        let mut per_atom = vec![0.0; pair.omega.len()];
        for (k, row) in omega_rows.iter().enumerate() {
            for a in row.clone() {
                per_atom[a] += t[k] * t[k];
            }
        }
        let mut num = 0.0;
        let mut atom_factor = vec![0.0; pair.omega.len()];
        for (a, s) in per_atom.iter().enumerate() {
            if *s > 0.0 {
                num += s.powf(p / 2.0) * pair.omega.mass_of(a);
                atom_factor[a] = s.powf(p / 2.0 - 1.0) * pair.omega.mass_of(a);
            }
        }
        let mut den_sq = vec![0.0; pair.sigma.len()];
        for (k, w) in windows.iter().enumerate() {
            for (j, &y) in w.iter().enumerate() {
                let v = x[offsets[k] + j];
                den_sq[y] += v * v;
            }
        }
        let mut den = 0.0;
        let mut sig_factor = vec![0.0; pair.sigma.len()];
        for (y, s) in den_sq.iter().enumerate() {
            if *s > 0.0 {
                den += s.powf(p / 2.0) * pair.sigma.mass_of(y);
                sig_factor[y] = s.powf(p / 2.0 - 1.0) * pair.sigma.mass_of(y);
            }
        }
        if num <= 0.0 || den <= 0.0 {
            for g in out.iter_mut() {
                *g = 0.0;
            }
            return;
        }
        for (k, w) in windows.iter().enumerate() {
            // d num / d x = sum over atoms in I_k of factor * 2 t_k * kernel.
            let mut tfac = 0.0;
            for a in omega_rows[k].clone() {
                tfac += atom_factor[a];
            }
            for (j, &y) in w.iter().enumerate() {
                let dn = tfac * t[k] * kernels[k][j];
                let dd = sig_factor[y] * x[offsets[k] + j];
                out[offsets[k] + j] = dn / num - dd / den;
            }
        }
    };
    // Initial profiles: the kernel direction per family, plus single-family
    // starts for the largest families.
    let mut inits: Vec<Vec<f64>> = Vec::new();
    let mut profile = vec![0.0; dim];
    for (k, w) in windows.iter().enumerate() {
        for (j, _) in w.iter().enumerate() {
            profile[offsets[k] + j] = kernels[k][j];
        }
    }
    inits.push(profile);
    for k in 0..intervals.len().min(16) {
        let mut single = vec![0.0; dim];
        for (j, _) in windows[k].iter().enumerate() {
            single[offsets[k] + j] = kernels[k][j];
        }
        inits.push(single);
    }
    let outcome = gradient_ascent(dim, &inits, &value, &gradient, config);
    let values: Vec<Vec<f64>> = (0..intervals.len())
        .map(|k| {
            let mut full = vec![0.0; pair.sigma.len()];
            for (j, &y) in windows[k].iter().enumerate() {
                full[y] = outcome.argument[offsets[k] + j];
            }
            full
        })
        .collect();
    let mut report = CharacteristicReport::lower_bound(
        name,
        p,
        outcome.value,
        Witness::FamilyFunctions { intervals, values },
    );
    report.seed = config.seed;
    report.iterations = outcome.iterations;
    report
}

/// Quadratic weak boundedness characteristic: lower bound over adjacent
/// disjoint dyadic pairs with comparable lengths, alternating-symmetric by
/// construction (the objective is invariant under swapping the roles).
pub fn wbp(pair: &MeasurePair, p: f64, r: u32, config: &AscentConfig) -> CharacteristicReport {
    let grid = &pair.grid;
    let mut pairs: Vec<(DyadicInterval, DyadicInterval)> = Vec::new();
    let mut inner: Vec<f64> = Vec::new();
    for i in grid.intervals() {
        if pair.sigma.interval_mass(i, grid) <= 0.0 {
            continue;
        }
        let lo = i.level.saturating_sub(r);
        let hi = (i.level + r).min(grid.l);
        for level in lo..=hi {
            for offset in 0..(1u64 << level) {
                let j = DyadicInterval::new(level, offset);
                if i.intersects(j) || i.gap_units(j, grid) != 0 {
                    continue;
                }
                if pair.omega.interval_mass(j, grid) <= 0.0 {
                    continue;
                }
                // |<H_sigma 1_I, 1_J>_omega|.
                let src = pair.sigma.atom_range(i, grid);
                let mut acc = 0.0;
                for x in pair.omega.atom_range(j, grid) {
                    let xf = pair.omega.position_f64(x);
                    let mut h = 0.0;
                    for s in src.clone() {
                        h += pair.sigma.mass_of(s) / (pair.sigma.position_f64(s) - xf);
                    }
                    acc += h * pair.omega.mass_of(x);
                }
                pairs.push((i, j));
                inner.push(acc.abs());
            }
        }
    }
    let dim = pairs.len();
    if dim == 0 {
        return CharacteristicReport::lower_bound("wbp", p, 0.0, Witness::None);
    }
    let q = crate::conjugate(p);
    let sigma_rows: Vec<std::ops::Range<usize>> =
        pairs.iter().map(|(i, _)| pair.sigma.atom_range(*i, grid)).collect();
    let omega_rows: Vec<std::ops::Range<usize>> =
        pairs.iter().map(|(_, j)| pair.omega.atom_range(*j, grid)).collect();
    // Parameters: (a_k, b_k) concatenated; the numerator uses |a||b|.
    let value = |x: &[f64]| -> f64 {
        let (a, b) = x.split_at(dim);
        let mut num = 0.0;
        for k in 0..dim {
            num += a[k].abs() * b[k].abs() * inner[k];
        }
        let mut s_sq = vec![0.0; pair.sigma.len()];
        for k in 0..dim {
            for y in sigma_rows[k].clone() {
                s_sq[y] += a[k] * a[k];
            }
        }
        let mut den_a = 0.0;
        for (y, s) in s_sq.iter().enumerate() {
            den_a += s.powf(p / 2.0) * pair.sigma.mass_of(y);
        }
        let mut o_sq = vec![0.0; pair.omega.len()];
        for k in 0..dim {
            for y in omega_rows[k].clone() {
                o_sq[y] += b[k] * b[k];
            }
        }
        let mut den_b = 0.0;
        for (y, s) in o_sq.iter().enumerate() {
            den_b += s.powf(q / 2.0) * pair.omega.mass_of(y);
        }
        let den = den_a.powf(1.0 / p) * den_b.powf(1.0 / q);
        if den <= 0.0 {
            0.0
        } else {
            num / den
        }
    };
    let gradient = |x: &[f64], out: &mut [f64]| {
        // Numerical-free analytic gradient of log value.
        let (a, b) = x.split_at(dim);
        let mut num = 0.0;
        for k in 0..dim {
            num += a[k].abs() * b[k].abs() * inner[k];
        }
        let mut s_sq = vec![0.0; pair.sigma.len()];
        for k in 0..dim {
            for y in sigma_rows[k].clone() {
                s_sq[y] += a[k] * a[k];
            }
        }
        let mut den_a = 0.0;
        let mut s_fac = vec![0.0; pair.sigma.len()];
        for (y, s) in s_sq.iter().enumerate() {
            if *s > 0.0 {
                den_a += s.powf(p / 2.0) * pair.sigma.mass_of(y);
                s_fac[y] = s.powf(p / 2.0 - 1.0) * pair.sigma.mass_of(y);
            }
        }
        let mut o_sq = vec![0.0; pair.omega.len()];
        for k in 0..dim {
            for y in omega_rows[k].clone() {
                o_sq[y] += b[k] * b[k];
            }
        }
        let mut den_b = 0.0;
        let mut o_fac = vec![0.0; pair.omega.len()];
        for (y, s) in o_sq.iter().enumerate() {
            if *s > 0.0 {
                den_b += s.powf(q / 2.0) * pair.omega.mass_of(y);
                o_fac[y] = s.powf(q / 2.0 - 1.0) * pair.omega.mass_of(y);
            }
        }
        if num <= 0.0 || den_a <= 0.0 || den_b <= 0.0 {
            for (k, g) in out.iter_mut().enumerate().take(2 * dim) {
                // Kick off from zero toward the numerator.
                let kk = k % dim;
                *g = inner[kk];
            }
            return;
        }
        for k in 0..dim {
            let dn_a = b[k].abs() * inner[k] * a[k].signum();
            let mut dd_a = 0.0;
            for y in sigma_rows[k].clone() {
                dd_a += s_fac[y] * a[k];
            }
            out[k] = dn_a / num - dd_a / den_a;
            let dn_b = a[k].abs() * inner[k] * b[k].signum();
            let mut dd_b = 0.0;
            for y in omega_rows[k].clone() {
                dd_b += o_fac[y] * b[k];
            }
            out[dim + k] = dn_b / num - dd_b / den_b;
        }
    };
    // Vertex inits: each single pair.
    let mut inits = Vec::new();
    for k in 0..dim.min(64) {
        let mut x = vec![0.0; 2 * dim];
        x[k] = 1.0;
        x[dim + k] = 1.0;
        inits.push(x);
    }
    inits.push(vec![1.0; 2 * dim]);
    let outcome = gradient_ascent(2 * dim, &inits, &value, &gradient, config);
    let (a, b) = outcome.argument.split_at(dim);
    let mut report = CharacteristicReport::lower_bound(
        "wbp",
        p,
        outcome.value,
        Witness::PairFamily { pairs, a: a.to_vec(), b: b.to_vec() },
    );
    report.seed = config.seed;
    report.iterations = outcome.iterations;
    report
}

pub fn reevaluate(pair: &MeasurePair, report: &CharacteristicReport) -> Option<f64> {
    let dual = report.name.ends_with(".dual");
    let eff = if dual { pair.swapped() } else { pair.clone() };
    let p = if dual { crate::conjugate(report.p) } else { report.p };
    let grid = &eff.grid;
    match (&report.witness, report.name.contains("plain_quad"), report.name.contains("offset_quad")) {
        (Witness::WeightedFamily { intervals, coeffs }, true, _) => {
            let mut num_sq = vec![0.0; eff.omega.len()];
            let mut den_sq = vec![0.0; eff.sigma.len()];
            for (i, a) in intervals.iter().zip(coeffs) {
                let ratio = eff.sigma.interval_mass(*i, grid) / i.len(grid);
                for x in eff.omega.atom_range(*i, grid) {
                    num_sq[x] += (a * ratio) * (a * ratio);
                }
                for y in eff.sigma.atom_range(*i, grid) {
                    den_sq[y] += a * a;
                }
            }
            Some(quad_ratio_value(&eff, &num_sq, &den_sq, p))
        }
        (Witness::PairFamily { pairs, a, .. }, _, true) => {
            let mut num_sq = vec![0.0; eff.omega.len()];
            let mut den_sq = vec![0.0; eff.sigma.len()];
            for ((i, star), c) in pairs.iter().zip(a) {
                let ratio = eff.sigma.interval_mass(*star, grid) / star.len(grid);
                for x in eff.omega.atom_range(*i, grid) {
                    num_sq[x] += (c * ratio) * (c * ratio);
                }
                for y in eff.sigma.atom_range(*star, grid) {
                    den_sq[y] += c * c;
                }
            }
            Some(quad_ratio_value(&eff, &num_sq, &den_sq, p))
        }
        (Witness::FamilyFunctions { intervals, values }, _, _) => {
            let mut num_sq = vec![0.0; eff.omega.len()];
            let mut den_sq = vec![0.0; eff.sigma.len()];
            for (i, f) in intervals.iter().zip(values) {
                let c = i.center(grid);
                let mut t = 0.0;
                for y in 0..eff.sigma.len() {
                    let pos = eff.sigma.position_f64(y);
                    if f[y] != 0.0 {
                        t += f[y] * eff.sigma.mass_of(y) / (pos - c).abs();
                    }
                }
                for x in eff.omega.atom_range(*i, grid) {
                    num_sq[x] += t * t;
                }
                for (y, v) in f.iter().enumerate() {
                    den_sq[y] += v * v;
                }
            }
            Some(quad_ratio_value(&eff, &num_sq, &den_sq, p))
        }
        _ => None,
    }
}

fn quad_ratio_value(pair: &MeasurePair, num_sq: &[f64], den_sq: &[f64], p: f64) -> f64 {
    let mut num = 0.0;
    for (x, s) in num_sq.iter().enumerate() {
        num += s.powf(p / 2.0) * pair.omega.mass_of(x);
    }
    let mut den = 0.0;
    for (y, s) in den_sq.iter().enumerate() {
        den += s.powf(p / 2.0) * pair.sigma.mass_of(y);
    }
    if den <= 0.0 {
        return 0.0;
    }
    (num / den).powf(1.0 / p)
}

pub fn reevaluate_wbp(pair: &MeasurePair, report: &CharacteristicReport) -> Option<f64> {
    if let Witness::PairFamily { pairs, a, b } = &report.witness {
        if b.is_empty() {
            return None;
        }
        let grid = &pair.grid;
        let p = report.p;
        let q = crate::conjugate(p);
        let mut num = 0.0;
        for (k, (i, j)) in pairs.iter().enumerate() {
            let src = pair.sigma.atom_range(*i, grid);
            let mut acc = 0.0;
            for x in pair.omega.atom_range(*j, grid) {
                let xf = pair.omega.position_f64(x);
                let mut h = 0.0;
                for s in src.clone() {
                    h += pair.sigma.mass_of(s) / (pair.sigma.position_f64(s) - xf);
                }
                acc += h * pair.omega.mass_of(x);
            }
            num += a[k].abs() * b[k].abs() * acc.abs();
        }
        let mut s_sq = vec![0.0; pair.sigma.len()];
        let mut o_sq = vec![0.0; pair.omega.len()];
        for (k, (i, j)) in pairs.iter().enumerate() {
            for y in pair.sigma.atom_range(*i, grid) {
                s_sq[y] += a[k] * a[k];
            }
            for y in pair.omega.atom_range(*j, grid) {
                o_sq[y] += b[k] * b[k];
            }
        }
        let mut den_a = 0.0;
        for (y, s) in s_sq.iter().enumerate() {
            den_a += s.powf(p / 2.0) * pair.sigma.mass_of(y);
        }
        let mut den_b = 0.0;
        for (y, s) in o_sq.iter().enumerate() {
            den_b += s.powf(q / 2.0) * pair.omega.mass_of(y);
        }
        let den = den_a.powf(1.0 / p) * den_b.powf(1.0 / q);
        if den <= 0.0 {
            return Some(0.0);
        }
        Some(num / den)
    } else {
        None
    }
}
