//! Characteristics of a measure pair: operator norms and the full family of
//! testing, Muckenhoupt, weak-boundedness, energy and functional-energy
//! constants, each either an exact finitely-enumerated supremum or a
//! certified lower bound with a reproducible witness.

mod ascent;
mod muckenhoupt;
mod norm;
mod rfe;
mod testing;

pub use ascent::AscentConfig;
pub use muckenhoupt::{muckenhoupt, reevaluate_wbp, wbp, MuckenhouptKind};
pub use norm::{operator_norm, NormMethod};
pub use rfe::{refined_functional_energy, rfe_evaluate, KernelTests};
pub use testing::{testing, IntervalMode, Side, TestingKind};

use crate::error::{Error, Result};
use crate::grid::{AtomicMeasure, Dyadic, DyadicInterval, Grid, MeasurePair};
use crate::haar::FunctionOnAtoms;
use crate::hilbert::{hilbert_field, poisson_on_complement};
use crate::rng::fnv1a;
use std::fmt::Write as _;

/// Whether a reported value is an exact finitely-enumerated supremum or a
/// certified lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    LowerBound,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::LowerBound => "lower_bound",
        }
    }
}

/// The object achieving (or witnessing) a characteristic value.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    None,
    Interval(DyadicInterval),
    GeneralInterval { lo: Dyadic, hi: Dyadic },
    /// A corona top together with an interval inside it.
    TopAndInterval { top: DyadicInterval, interval: DyadicInterval },
    WeightedFamily { intervals: Vec<DyadicInterval>, coeffs: Vec<f64> },
    PairFamily {
        pairs: Vec<(DyadicInterval, DyadicInterval)>,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// Values on the atoms of sigma (test functions for ascent problems).
    FunctionValues(Vec<f64>),
    /// One test function per interval of a family, concatenated.
    FamilyFunctions { intervals: Vec<DyadicInterval>, values: Vec<Vec<f64>> },
    Partition { root: DyadicInterval, parts: Vec<DyadicInterval> },
}

impl Witness {
    pub fn digest(&self) -> u64 {
        let mut s = String::new();
        match self {
            Witness::None => s.push_str("none"),
            Witness::Interval(i) => {
                let _ = write!(s, "interval:{}:{}", i.level, i.offset);
            }
            Witness::GeneralInterval { lo, hi } => {
                let _ = write!(s, "general:{lo}:{hi}");
            }
            Witness::TopAndInterval { top, interval } => {
                let _ = write!(
                    s,
                    "top:{}:{}:int:{}:{}",
                    top.level, top.offset, interval.level, interval.offset
                );
            }
            Witness::WeightedFamily { intervals, coeffs } => {
                for (i, c) in intervals.iter().zip(coeffs) {
                    let _ = write!(s, "{}:{}:{c};", i.level, i.offset);
                }
            }
            Witness::PairFamily { pairs, a, b } => {
                for (k, (i, j)) in pairs.iter().enumerate() {
                    let av = a.get(k).copied().unwrap_or(0.0);
                    let bv = b.get(k).copied().unwrap_or(0.0);
                    let _ = write!(
                        s,
                        "{}:{}:{}:{}:{av}:{bv};",
                        i.level, i.offset, j.level, j.offset
                    );
                }
            }
            Witness::FunctionValues(v) => {
                for x in v {
                    let _ = write!(s, "{x};");
                }
            }
            Witness::FamilyFunctions { intervals, values } => {
                for (i, vs) in intervals.iter().zip(values) {
                    let _ = write!(s, "{}:{}|", i.level, i.offset);
                    for x in vs {
                        let _ = write!(s, "{x};");
                    }
                }
            }
            Witness::Partition { root, parts } => {
                let _ = write!(s, "{}:{}>", root.level, root.offset);
                for p in parts {
                    let _ = write!(s, "{}:{};", p.level, p.offset);
                }
            }
        }
        fnv1a(s.as_bytes())
    }
}

/// A named constant of the pair, with its mode and witness.
#[derive(Debug, Clone)]
pub struct CharacteristicReport {
    pub name: String,
    pub p: f64,
    pub value: f64,
    pub mode: Mode,
    pub witness: Witness,
    /// Absolute accuracy guarantee for dense-search values.
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub iterations: u64,
    pub flags: Vec<String>,
}

impl CharacteristicReport {
    pub fn exact(name: impl Into<String>, p: f64, value: f64, witness: Witness) -> Self {
        CharacteristicReport {
            name: name.into(),
            p,
            value,
            mode: Mode::Exact,
            witness,
            tolerance: None,
            seed: 0,
            iterations: 0,
            flags: Vec::new(),
        }
    }

    pub fn lower_bound(name: impl Into<String>, p: f64, value: f64, witness: Witness) -> Self {
        CharacteristicReport {
            name: name.into(),
            p,
            value,
            mode: Mode::LowerBound,
            witness,
            tolerance: None,
            seed: 0,
            iterations: 0,
            flags: Vec::new(),
        }
    }

    pub fn witness_digest(&self) -> u64 {
        self.witness.digest()
    }
}

/// The p-energy of an interval: normalized `L^p` deviation of the coordinate
/// function from its average, together with the Haar square-function variant
/// of the same quantity.
#[derive(Debug, Clone, Copy)]
pub struct PEnergy {
    pub value: f64,
    pub square_form: f64,
}

pub fn p_energy(omega: &AtomicMeasure, grid: &Grid, j: DyadicInterval, p: f64) -> PEnergy {
    let value = p_energy_value(omega, grid, j, p);
    // Square form: (1/|J| int_J (sum_{J' <= J} |D_{J'} Z|^2)^{p/2})^{1/p}.
    let range = j.atom_range_of(omega, grid);
    let mass = omega.interval_mass(j, grid);
    if mass <= 0.0 {
        return PEnergy { value: 0.0, square_form: 0.0 };
    }
    let n = range.len();
    let base = range.start;
    let mut squares = vec![0.0; n];
    collect_z_squares(omega, grid, j, base, &mut squares);
    let mut acc = 0.0;
    for (k, sq) in squares.iter().enumerate() {
        acc += sq.powf(p / 2.0) * omega.mass_of(base + k);
    }
    PEnergy { value, square_form: (acc / mass).powf(1.0 / p) }
}

fn collect_z_squares(
    omega: &AtomicMeasure,
    grid: &Grid,
    node: DyadicInterval,
    base: usize,
    squares: &mut [f64],
) {
    let range = node.atom_range_of(omega, grid);
    if range.len() < 2 {
        return;
    }
    // D_node Z directly: coefficient times the Haar step.
    if node.level < grid.l {
        let mass = omega.interval_mass(node, grid);
        if mass > 0.0 {
            let h = haar_step(omega, grid, node);
            if let Some((minus, plus, split)) = h {
                let mut coeff = 0.0;
                for i in range.clone() {
                    let hv = if i < split { minus } else { plus };
                    coeff += omega.position_f64(i) * hv * omega.mass_of(i);
                }
                for i in range.clone() {
                    let hv = if i < split { minus } else { plus };
                    let d = coeff * hv;
                    squares[i - base] += d * d;
                }
            }
            collect_z_squares(omega, grid, node.left_child(grid).unwrap(), base, squares);
            collect_z_squares(omega, grid, node.right_child(grid).unwrap(), base, squares);
        }
    }
}

/// Haar step values `(left value, right value, split index)` or None when a
/// child is empty.
fn haar_step(omega: &AtomicMeasure, grid: &Grid, q: DyadicInterval) -> Option<(f64, f64, usize)> {
    let left = q.left_child(grid).ok()?;
    let right = q.right_child(grid).ok()?;
    let lrange = left.atom_range_of(omega, grid);
    let rrange = right.atom_range_of(omega, grid);
    let lmass: f64 = lrange.clone().map(|i| omega.mass_of(i)).sum();
    let rmass: f64 = rrange.clone().map(|i| omega.mass_of(i)).sum();
    if lmass <= 0.0 || rmass <= 0.0 {
        return None;
    }
    let total = lmass + rmass;
    Some((
        -(rmass / lmass).sqrt() / total.sqrt(),
        (lmass / rmass).sqrt() / total.sqrt(),
        rrange.start,
    ))
}

/// Value form of the p-energy only, used in hot stopping-time loops.
pub fn p_energy_value(omega: &AtomicMeasure, grid: &Grid, j: DyadicInterval, p: f64) -> f64 {
    let range = omega.atom_range(j, grid);
    let mut mass = 0.0;
    let mut mean = 0.0;
    for i in range.clone() {
        mass += omega.mass_of(i);
        mean += omega.position_f64(i) * omega.mass_of(i);
    }
    if mass <= 0.0 {
        return 0.0;
    }
    mean /= mass;
    let mut acc = 0.0;
    for i in range {
        acc += (omega.position_f64(i) - mean).abs().powf(p) * omega.mass_of(i);
    }
    (acc / mass).powf(1.0 / p)
}

trait AtomRangeOf {
    fn atom_range_of(&self, mu: &AtomicMeasure, grid: &Grid) -> std::ops::Range<usize>;
}

impl AtomRangeOf for DyadicInterval {
    fn atom_range_of(&self, mu: &AtomicMeasure, grid: &Grid) -> std::ops::Range<usize> {
        mu.atom_range(*self, grid)
    }
}

/// Poisson-energy characteristic: over every root interval, the best
/// pairwise-disjoint dyadic subpartition of the root, by dynamic programming
/// `best(J) = max(term(J), best(left) + best(right))`.
pub fn energy_characteristic(pair: &MeasurePair, p: f64) -> CharacteristicReport {
    let grid = &pair.grid;
    let mut best_value = 0.0_f64;
    let mut best_witness = Witness::None;
    for root in grid.intervals() {
        let sigma_mass = pair.sigma.interval_mass(root, grid);
        if sigma_mass <= 0.0 {
            continue;
        }
        let (sum, parts) = best_subpartition(pair, p, root);
        let value = sum / sigma_mass;
        if value > best_value {
            best_value = value;
            best_witness = Witness::Partition { root, parts };
        }
    }
    CharacteristicReport::exact("energy", p, best_value.powf(1.0 / p), best_witness)
}

/// DP over the subtree of `root`; returns the best sum and its partition.
pub fn best_subpartition(
    pair: &MeasurePair,
    p: f64,
    root: DyadicInterval,
) -> (f64, Vec<DyadicInterval>) {
    let grid = &pair.grid;
    fn go(
        pair: &MeasurePair,
        p: f64,
        root: DyadicInterval,
        node: DyadicInterval,
        parts: &mut Vec<DyadicInterval>,
    ) -> f64 {
        let grid = &pair.grid;
        let term = energy_term(pair, p, root, node);
        if node.level >= grid.l {
            if term > 0.0 {
                parts.push(node);
            }
            return term;
        }
        let mut lparts = Vec::new();
        let mut rparts = Vec::new();
        let l = go(pair, p, root, node.left_child(grid).unwrap(), &mut lparts);
        let r = go(pair, p, root, node.right_child(grid).unwrap(), &mut rparts);
        if term >= l + r {
            if term > 0.0 {
                parts.push(node);
            }
            term
        } else {
            parts.extend(lparts);
            parts.extend(rparts);
            l + r
        }
    }
    let mut parts = Vec::new();
    let value = go(pair, p, root, root, &mut parts);
    let _ = grid;
    (value, parts)
}

/// One Poisson-energy term `(P(J, 1_{root minus J} sigma)/len(J))^p E_p(J)^p |J|_omega`.
pub fn energy_term(pair: &MeasurePair, p: f64, root: DyadicInterval, node: DyadicInterval) -> f64 {
    let grid = &pair.grid;
    let omega_mass = pair.omega.interval_mass(node, grid);
    if omega_mass <= 0.0 {
        return 0.0;
    }
    let energy = p_energy_value(&pair.omega, grid, node, p);
    if energy <= 0.0 {
        return 0.0;
    }
    let pois = poisson_on_complement(
        grid,
        node,
        &pair.sigma,
        pair.sigma.atom_range(root, grid),
        pair.sigma.atom_range(node, grid),
    );
    (pois / node.len(grid)).powf(p) * energy.powf(p) * omega_mass
}

/// Stopping-energy characteristic of a forest: per top, the supremum of the
/// Poisson-energy ratio over child-good corona intervals; the overall value
/// excludes coronas flagged infinite (zero sigma mass against a positive
/// numerator).
pub fn stopping_energy(
    pair: &MeasurePair,
    p: f64,
    forest: &crate::corona::StoppingForest,
) -> CharacteristicReport {
    let grid = &pair.grid;
    let mut best = 0.0_f64;
    let mut witness = Witness::None;
    let mut flags = Vec::new();
    for idx in 0..forest.tops().len() {
        let top = forest.tops()[idx];
        for i in forest.corona_intervals(idx) {
            if !grid.is_child_good(i) {
                continue;
            }
            let omega_mass = pair.omega.interval_mass(i, grid);
            if omega_mass <= 0.0 {
                continue;
            }
            let energy = p_energy_value(&pair.omega, grid, i, p);
            if energy <= 0.0 {
                continue;
            }
            let pois = poisson_on_complement(
                grid,
                i,
                &pair.sigma,
                pair.sigma.atom_range(top, grid),
                pair.sigma.atom_range(i, grid),
            );
            let numerator = (pois / i.len(grid)).powf(p) * energy.powf(p) * omega_mass;
            let sigma_mass = pair.sigma.interval_mass(i, grid);
            if sigma_mass <= 0.0 {
                if numerator > 0.0 {
                    flags.push(format!("infinite_corona:{}:{}", i.level, i.offset));
                }
                continue;
            }
            let ratio = numerator / sigma_mass;
            if ratio > best {
                best = ratio;
                witness = Witness::TopAndInterval { top, interval: i };
            }
        }
    }
    let mut report =
        CharacteristicReport::exact("stopping_energy", p, best.powf(1.0 / p), witness);
    report.flags = flags;
    report
}

/// Ratio of the `l^2`-aggregated transform of a function family to the
/// aggregated family norm.
pub fn vector_extension_gap(pair: &MeasurePair, p: f64, fs: &[FunctionOnAtoms]) -> Result<f64> {
    if fs.is_empty() {
        return Err(Error::ZeroDenominator);
    }
    let n_omega = pair.omega.len();
    let mut num_sq = vec![0.0; n_omega];
    let mut den_sq = vec![0.0; pair.sigma.len()];
    for f in fs {
        let hf = hilbert_field(&pair.sigma, f, &pair.omega);
        for (x, h) in hf.iter().enumerate() {
            num_sq[x] += h * h;
        }
        for y in 0..pair.sigma.len() {
            den_sq[y] += f.value(y) * f.value(y);
        }
    }
    let mut num = 0.0;
    for (x, s) in num_sq.iter().enumerate() {
        num += s.powf(p / 2.0) * pair.omega.mass_of(x);
    }
    let mut den = 0.0;
    for (y, s) in den_sq.iter().enumerate() {
        den += s.powf(p / 2.0) * pair.sigma.mass_of(y);
    }
    if den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num.powf(1.0 / p) / den.powf(1.0 / p))
}

/// Re-evaluate a lower-bound report from its stored witness.  Returns `None`
/// for reports whose witness is not a re-evaluable family.
pub fn reevaluate(pair: &MeasurePair, report: &CharacteristicReport) -> Option<f64> {
    match report.name.as_str() {
        name if name.starts_with("testing.quad") => {
            testing::reevaluate_quad(pair, report)
        }
        name if name.starts_with("muckenhoupt.") => {
            muckenhoupt::reevaluate(pair, report)
        }
        "wbp" => muckenhoupt::reevaluate_wbp(pair, report),
        "operator_norm.ascent" => norm::reevaluate_ascent(pair, report),
        "refined_functional_energy" => None,
        _ => None,
    }
}

