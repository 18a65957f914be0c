//! Weighted Haar system: martingale differences, projections and absolute
//! projections, square functions, and the dyadic maximal operator.

use crate::error::{Error, Result};
use crate::grid::{AtomicMeasure, DyadicInterval, Grid};
use crate::{corona::StoppingForest, lp_norm};
use std::sync::Arc;

/// An element of `L^p(mu)`: one value per atom of its measure.
#[derive(Debug, Clone)]
pub struct FunctionOnAtoms {
    measure: Arc<AtomicMeasure>,
    values: Vec<f64>,
}

impl FunctionOnAtoms {
    pub fn new(measure: Arc<AtomicMeasure>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), measure.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        FunctionOnAtoms { measure, values }
    }

    pub fn zero(measure: Arc<AtomicMeasure>) -> Self {
        let n = measure.len();
        FunctionOnAtoms { measure, values: vec![0.0; n] }
    }

    pub fn constant(measure: Arc<AtomicMeasure>, c: f64) -> Self {
        let n = measure.len();
        FunctionOnAtoms { measure, values: vec![c; n] }
    }

    /// The coordinate function `Z(x) = x`.
    pub fn coordinate(measure: Arc<AtomicMeasure>) -> Self {
        let values = measure.positions_f64().to_vec();
        FunctionOnAtoms { measure, values }
    }

    /// Indicator of a grid interval.
    pub fn indicator(measure: Arc<AtomicMeasure>, interval: DyadicInterval, grid: &Grid) -> Self {
        let mut values = vec![0.0; measure.len()];
        for i in measure.atom_range(interval, grid) {
            values[i] = 1.0;
        }
        FunctionOnAtoms { measure, values }
    }

    pub fn measure(&self) -> &Arc<AtomicMeasure> {
        &self.measure
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, self.measure.masses(), p)
    }

    pub fn scaled(&self, c: f64) -> Self {
        FunctionOnAtoms {
            measure: Arc::clone(&self.measure),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn plus(&self, other: &FunctionOnAtoms) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        FunctionOnAtoms {
            measure: Arc::clone(&self.measure),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn minus(&self, other: &FunctionOnAtoms) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        FunctionOnAtoms {
            measure: Arc::clone(&self.measure),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Inner product against the measure.
    pub fn inner(&self, other: &FunctionOnAtoms) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            acc += self.values[i] * other.values[i] * self.measure.mass_of(i);
        }
        acc
    }

    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            acc += self.values[i] * self.measure.mass_of(i);
        }
        acc
    }
}

/// Average of `f` over an interval.  Errors when the interval carries no mass.
pub fn expectation(grid: &Grid, f: &FunctionOnAtoms, interval: DyadicInterval) -> Result<f64> {
    let mu = f.measure();
    let range = mu.atom_range(interval, grid);
    let mut mass = 0.0;
    let mut acc = 0.0;
    for i in range {
        mass += mu.mass_of(i);
        acc += f.value(i) * mu.mass_of(i);
    }
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(acc / mass)
}

/// The normalized weighted Haar step function of an interval.
#[derive(Debug, Clone)]
pub struct HaarFunction {
    pub interval: DyadicInterval,
    pub function: FunctionOnAtoms,
    pub degenerate: bool,
}

/// `h_Q = |Q|^{-1/2} ( sqrt(|Q_-|/|Q_+|) 1_{Q_+} - sqrt(|Q_+|/|Q_-|) 1_{Q_-} )`
/// with the left/right children as `Q_-`/`Q_+`.  A child of zero mass, or an
/// interval at the atom resolution level, makes the function identically
/// zero and is flagged degenerate.
pub fn haar_function(grid: &Grid, measure: &Arc<AtomicMeasure>, q: DyadicInterval) -> HaarFunction {
    if q.level >= grid.l {
        return HaarFunction { interval: q, function: FunctionOnAtoms::zero(Arc::clone(measure)), degenerate: true };
    }
    let left = q.left_child(grid).unwrap();
    let right = q.right_child(grid).unwrap();
    let lrange = measure.atom_range(left, grid);
    let rrange = measure.atom_range(right, grid);
    let lmass: f64 = lrange.clone().map(|i| measure.mass_of(i)).sum();
    let rmass: f64 = rrange.clone().map(|i| measure.mass_of(i)).sum();
    if lmass <= 0.0 || rmass <= 0.0 {
        return HaarFunction { interval: q, function: FunctionOnAtoms::zero(Arc::clone(measure)), degenerate: true };
    }
    let total = lmass + rmass;
    let plus = (lmass / rmass).sqrt() / total.sqrt();
    let minus = -(rmass / lmass).sqrt() / total.sqrt();
    let mut values = vec![0.0; measure.len()];
    for i in lrange {
        values[i] = minus;
    }
    for i in rrange {
        values[i] = plus;
    }
    HaarFunction {
        interval: q,
        function: FunctionOnAtoms::new(Arc::clone(measure), values),
        degenerate: false,
    }
}

/// Haar coefficient and martingale difference of `f` at one interval.
pub fn martingale_difference(
    grid: &Grid,
    f: &FunctionOnAtoms,
    q: DyadicInterval,
) -> (f64, FunctionOnAtoms) {
    let h = haar_function(grid, f.measure(), q);
    if h.degenerate {
        return (0.0, h.function);
    }
    let coeff = f.inner(&h.function);
    (coeff, h.function.scaled(coeff))
}

/// All Haar coefficients of `f`, heap indexed; degenerate intervals carry
/// zero and are marked.
#[derive(Debug, Clone)]
pub struct HaarDecomposition {
    pub coefficients: Vec<f64>,
    pub nondegenerate: Vec<bool>,
}

impl HaarDecomposition {
    pub fn compute(grid: &Grid, f: &FunctionOnAtoms) -> Self {
        let n = grid.interval_count();
        let mut coefficients = vec![0.0; n];
        let mut nondegenerate = vec![false; n];
        for q in grid.intervals() {
            if q.level >= grid.l {
                continue;
            }
            let (c, _) = martingale_difference(grid, f, q);
            let h = haar_function(grid, f.measure(), q);
            if !h.degenerate {
                coefficients[q.heap_index()] = c;
                nondegenerate[q.heap_index()] = true;
            }
        }
        HaarDecomposition { coefficients, nondegenerate }
    }

    pub fn coefficient(&self, q: DyadicInterval) -> f64 {
        self.coefficients[q.heap_index()]
    }

    /// Intervals carrying a nonzero Haar component.
    pub fn support(&self, grid: &Grid) -> Vec<DyadicInterval> {
        grid.intervals()
            .filter(|q| {
                q.level < grid.l
                    && self.nondegenerate[q.heap_index()]
                    && self.coefficients[q.heap_index()] != 0.0
            })
            .collect()
    }
}

/// Projection `sum_{J in family} D_J f`, or the absolute variant
/// `sqrt(sum |D_J f|^2)` pointwise.
pub fn project(
    grid: &Grid,
    f: &FunctionOnAtoms,
    family: &[DyadicInterval],
    absolute: bool,
) -> FunctionOnAtoms {
    let mut acc = vec![0.0; f.len()];
    for &j in family {
        let (_, delta) = martingale_difference(grid, f, j);
        for i in 0..acc.len() {
            if absolute {
                acc[i] += delta.value(i) * delta.value(i);
            } else {
                acc[i] += delta.value(i);
            }
        }
    }
    if absolute {
        for v in &mut acc {
            *v = v.sqrt();
        }
    }
    FunctionOnAtoms::new(Arc::clone(f.measure()), acc)
}

/// Which square function to evaluate.
pub enum SquareFunctionKind<'a> {
    /// `(sum_Q |D_Q f|^2)^{1/2}` over every nondegenerate grid interval.
    Haar,
    /// `(sum_F |P_{corona(F)} f|^2)^{1/2}` for a stopping forest.
    Corona(&'a StoppingForest),
    /// Band-limited variant with weight `2^{-delta * |c_J - c_I|}` over
    /// intervals whose levels differ by at most `band`.
    Nearby { band: u32, delta: f64 },
}

pub fn square_function(grid: &Grid, f: &FunctionOnAtoms, kind: SquareFunctionKind) -> FunctionOnAtoms {
    match kind {
        SquareFunctionKind::Haar => {
            let family: Vec<DyadicInterval> =
                grid.intervals().filter(|q| q.level < grid.l).collect();
            project(grid, f, &family, true)
        }
        SquareFunctionKind::Corona(forest) => {
            let mut acc = vec![0.0; f.len()];
            for idx in 0..forest.tops().len() {
                let corona = forest.corona_intervals(idx);
                let proj = project(grid, f, &corona, false);
                for i in 0..acc.len() {
                    acc[i] += proj.value(i) * proj.value(i);
                }
            }
            for v in &mut acc {
                *v = v.sqrt();
            }
            FunctionOnAtoms::new(Arc::clone(f.measure()), acc)
        }
        SquareFunctionKind::Nearby { band, delta } => {
            // Per atom, only intervals containing the atom contribute.
            let deltas: Vec<(DyadicInterval, FunctionOnAtoms)> = grid
                .intervals()
                .filter(|q| q.level < grid.l)
                .map(|q| (q, martingale_difference(grid, f, q).1))
                .collect();
            let mu = f.measure();
            let mut out = vec![0.0; f.len()];
            for i in 0..f.len() {
                let pos = mu.position(i);
                let chain: Vec<&(DyadicInterval, FunctionOnAtoms)> = deltas
                    .iter()
                    .filter(|(q, _)| q.contains_position(&pos, grid))
                    .collect();
                let mut sq = 0.0;
                for (qi, _) in &chain {
                    let mut p = 0.0;
                    for (qj, dj) in &chain {
                        let diff = qi.level.abs_diff(qj.level);
                        if diff > band {
                            continue;
                        }
                        let dist = (qj.center(grid) - qi.center(grid)).abs();
                        p += (-delta * dist).exp2() * dj.value(i);
                    }
                    sq += p * p;
                }
                out[i] = sq.sqrt();
            }
            FunctionOnAtoms::new(Arc::clone(mu), out)
        }
    }
}

/// Scalar dyadic maximal function, or the pointwise `l^2` aggregate of the
/// maximal functions of a family.
pub fn dyadic_maximal(grid: &Grid, fs: &[&FunctionOnAtoms]) -> FunctionOnAtoms {
    assert!(!fs.is_empty());
    let mu = fs[0].measure();
    let n = mu.len();
    let mut out = vec![0.0; n];
    for f in fs {
        for (i, slot) in out.iter_mut().enumerate() {
            let m = maximal_at(grid, f, i);
            *slot += m * m;
        }
    }
    for v in &mut out {
        *v = v.sqrt();
    }
    FunctionOnAtoms::new(Arc::clone(mu), out)
}

fn maximal_at(grid: &Grid, f: &FunctionOnAtoms, atom: usize) -> f64 {
    let mu = f.measure();
    let pos = mu.position(atom);
    let mut best: f64 = 0.0;
    // Walk the interval chain containing the atom from the cell upward.
    let mut node = cell_of(grid, &pos);
    loop {
        let range = mu.atom_range(node, grid);
        let mut mass = 0.0;
        let mut acc = 0.0;
        for i in range {
            mass += mu.mass_of(i);
            acc += f.value(i).abs() * mu.mass_of(i);
        }
        if mass > 0.0 {
            best = best.max(acc / mass);
        }
        match node.parent() {
            Ok(p) => node = p,
            Err(_) => break,
        }
    }
    best
}

/// Level-`l` cell containing a position.
pub fn cell_of(grid: &Grid, pos: &crate::grid::Dyadic) -> DyadicInterval {
    // pos / 2^{m-l} lies in [0, 2^l); take the integer part exactly.
    let unit = grid.unit();
    let mut lo = 0u64;
    let mut hi = 1u64 << grid.l;
    // Binary search on exact dyadic comparisons.
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let boundary = grid.units_to_dyadic(mid as i64);
        if *pos >= boundary {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let _ = unit;
    DyadicInterval { level: grid.l, offset: lo }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Dyadic;

    fn two_atom_setup(masses: [f64; 2]) -> (Grid, Arc<AtomicMeasure>) {
        // Top [0,2), atoms at 0.5 and 1.5.
        let grid = Grid::new(1, 4, 1, 1, 8, 2).unwrap();
        let mu = AtomicMeasure::new(vec![
            (Dyadic::new(1, 1), masses[0]),
            (Dyadic::new(3, 1), masses[1]),
        ])
        .unwrap();
        (grid, Arc::new(mu))
    }

    #[test]
    fn expectation_examples() {
        let (grid, mu) = two_atom_setup([1.0, 1.0]);
        let f = FunctionOnAtoms::new(Arc::clone(&mu), vec![1.0, 3.0]);
        let top = grid.top();
        assert_eq!(expectation(&grid, &f, top).unwrap(), 2.0);
        let left = top.left_child(&grid).unwrap();
        assert_eq!(expectation(&grid, &f, left).unwrap(), 1.0);
        // A window carrying no atoms: [0, 0.5) misses both of them.
        let empty = DyadicInterval::new(2, 0);
        assert_eq!(expectation(&grid, &f, empty), Err(Error::ZeroMass));
    }

    #[test]
    fn haar_balanced_masses() {
        let (grid, mu) = two_atom_setup([1.0, 1.0]);
        let h = haar_function(&grid, &mu, grid.top());
        assert!(!h.degenerate);
        let s = 0.5_f64.sqrt();
        assert!((h.function.value(0) + s).abs() < 1e-15);
        assert!((h.function.value(1) - s).abs() < 1e-15);
    }

    #[test]
    fn haar_defining_identities_unbalanced() {
        let (grid, mu) = two_atom_setup([1.0, 3.0]);
        let h = haar_function(&grid, &mu, grid.top());
        assert!(!h.degenerate);
        // Mean zero and unit L^2(mu) norm pin the function up to sign.
        assert!(h.function.integral().abs() < 1e-12);
        assert!((h.function.inner(&h.function) - 1.0).abs() < 1e-12);
        assert!((h.function.value(0) + 3.0_f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn haar_degenerate_child() {
        let grid = Grid::new(1, 4, 1, 1, 8, 2).unwrap();
        // Both atoms in the left child of the top.
        let mu = Arc::new(
            AtomicMeasure::new(vec![
                (Dyadic::new(1, 2), 1.0),
                (Dyadic::new(3, 2), 1.0),
            ])
            .unwrap(),
        );
        let h = haar_function(&grid, &mu, grid.top());
        assert!(h.degenerate);
        assert!(h.function.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn martingale_difference_telescopes() {
        let (grid, mu) = two_atom_setup([1.0, 1.0]);
        let f = FunctionOnAtoms::new(Arc::clone(&mu), vec![1.0, 3.0]);
        let (coeff, delta) = martingale_difference(&grid, &f, grid.top());
        assert!((coeff - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((delta.value(0) + 1.0).abs() < 1e-12);
        assert!((delta.value(1) - 1.0).abs() < 1e-12);
        // Constant functions have vanishing coefficients.
        let c = FunctionOnAtoms::constant(Arc::clone(&mu), 5.0);
        let (cc, _) = martingale_difference(&grid, &c, grid.top());
        assert!(cc.abs() < 1e-12);
    }

    #[test]
    fn orthonormality_and_reconstruction() {
        let grid = Grid::new(3, 6, 3, 1, 8, 4).unwrap();
        let mut rng = crate::rng::SplitMix64::new(11);
        let mut atoms = Vec::new();
        for cell in rng.sample_distinct(1 << grid.l, 12) {
            // Cell centers.
            let pos = Dyadic::new((2 * cell + 1) as i64, (grid.l - grid.m) + 1);
            atoms.push((pos, 0.25 + rng.next_f64()));
        }
        let mu = Arc::new(AtomicMeasure::new(atoms).unwrap());
        let mut haars = Vec::new();
        for q in grid.intervals() {
            if q.level < grid.l {
                let h = haar_function(&grid, &mu, q);
                if !h.degenerate {
                    haars.push(h);
                }
            }
        }
        for a in &haars {
            for b in &haars {
                let ip = a.function.inner(&b.function);
                let expect = if a.interval == b.interval { 1.0 } else { 0.0 };
                assert!(
                    (ip - expect).abs() < 1e-12,
                    "a={:?} b={:?} ip={ip}",
                    a.interval,
                    b.interval
                );
            }
        }
        // Telescoping reconstruction.
        let mut values = Vec::new();
        for i in 0..mu.len() {
            let _ = i;
            values.push(rng.next_gaussian());
        }
        let f = FunctionOnAtoms::new(Arc::clone(&mu), values);
        let mean = expectation(&grid, &f, grid.top()).unwrap();
        let mut recon = vec![mean; mu.len()];
        for h in &haars {
            let c = f.inner(&h.function);
            for i in 0..mu.len() {
                recon[i] += c * h.function.value(i);
            }
        }
        for i in 0..mu.len() {
            assert!((recon[i] - f.value(i)).abs() < 1e-9 * (1.0 + f.value(i).abs()));
        }
    }

    #[test]
    fn projection_singleton_and_completeness() {
        let (grid, mu) = two_atom_setup([1.0, 1.0]);
        let f = FunctionOnAtoms::new(Arc::clone(&mu), vec![1.0, 3.0]);
        let (_, delta) = martingale_difference(&grid, &f, grid.top());
        let proj = project(&grid, &f, &[grid.top()], false);
        for i in 0..2 {
            assert!((proj.value(i) - delta.value(i)).abs() < 1e-15);
        }
        // Full family on a mean-zero function reproduces it.
        let g = FunctionOnAtoms::new(Arc::clone(&mu), vec![-1.0, 1.0]);
        let family: Vec<DyadicInterval> =
            grid.intervals().filter(|q| q.level < grid.l).collect();
        let full = project(&grid, &g, &family, false);
        for i in 0..2 {
            assert!((full.value(i) - g.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_dominated_by_maximal() {
        // |P_Lambda f| <= 2 M(1_S f) pointwise for Lambda a connected band
        // below S.
        let grid = Grid::new(3, 6, 3, 1, 8, 4).unwrap();
        let mut rng = crate::rng::SplitMix64::new(5);
        let mut atoms = Vec::new();
        for cell in rng.sample_distinct(1 << grid.l, 16) {
            let pos = Dyadic::new((2 * cell + 1) as i64, (grid.l - grid.m) + 1);
            atoms.push((pos, 0.25 + rng.next_f64()));
        }
        let mu = Arc::new(AtomicMeasure::new(atoms).unwrap());
        let values: Vec<f64> = (0..mu.len()).map(|_| rng.next_gaussian()).collect();
        let f = FunctionOnAtoms::new(Arc::clone(&mu), values);
        let s = grid.top();
        // Connected family: all strict descendants of S above a level cut.
        for cut in [3u32, 4, 6] {
            let family: Vec<DyadicInterval> = grid
                .intervals()
                .filter(|q| s.strictly_contains(*q) && q.level <= cut && q.level < grid.l)
                .collect();
            let proj = project(&grid, &f, &family, false);
            let maximal = dyadic_maximal(&grid, &[&f]);
            for i in 0..mu.len() {
                assert!(
                    proj.value(i).abs() <= 2.0 * maximal.value(i) + 1e-12,
                    "cut={cut} atom={i}"
                );
            }
        }
    }

    #[test]
    fn square_function_two_atoms() {
        let (grid, mu) = two_atom_setup([1.0, 1.0]);
        let f = FunctionOnAtoms::new(Arc::clone(&mu), vec![1.0, 3.0]);
        let s = square_function(&grid, &f, SquareFunctionKind::Haar);
        assert!((s.value(0) - 1.0).abs() < 1e-12);
        assert!((s.value(1) - 1.0).abs() < 1e-12);
        let mean = expectation(&grid, &f, grid.top()).unwrap();
        let centered = f.minus(&FunctionOnAtoms::constant(Arc::clone(&mu), mean));
        let lhs = s.lp_norm(2.0).powi(2);
        let rhs = centered.lp_norm(2.0).powi(2);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn corona_square_function_single_top() {
        let grid = Grid::new(3, 6, 3, 1, 8, 4).unwrap();
        let mut rng = crate::rng::SplitMix64::new(31);
        let mut atoms = Vec::new();
        for cell in rng.sample_distinct(1 << grid.l, 9) {
            let pos = Dyadic::new((2 * cell + 1) as i64, (grid.l - grid.m) + 1);
            atoms.push((pos, 0.25 + rng.next_f64()));
        }
        let mu = Arc::new(AtomicMeasure::new(atoms).unwrap());
        let values: Vec<f64> = (0..mu.len()).map(|_| rng.next_gaussian()).collect();
        let f = FunctionOnAtoms::new(Arc::clone(&mu), values);
        let forest = crate::corona::StoppingForest::trivial(grid, grid.top());
        let s = square_function(&grid, &f, SquareFunctionKind::Corona(&forest));
        let mean = expectation(&grid, &f, grid.top()).unwrap();
        for i in 0..mu.len() {
            let expect = (f.value(i) - mean).abs();
            assert!((s.value(i) - expect).abs() < 1e-9 * (1.0 + expect));
        }
    }

    #[test]
    fn nearby_square_function_collapses() {
        let grid = Grid::new(3, 6, 3, 1, 8, 4).unwrap();
        let mut rng = crate::rng::SplitMix64::new(9);
        let mut atoms = Vec::new();
        for cell in rng.sample_distinct(1 << grid.l, 10) {
            let pos = Dyadic::new((2 * cell + 1) as i64, (grid.l - grid.m) + 1);
            atoms.push((pos, 0.25 + rng.next_f64()));
        }
        let mu = Arc::new(AtomicMeasure::new(atoms).unwrap());
        let values: Vec<f64> = (0..mu.len()).map(|_| rng.next_gaussian()).collect();
        let f = FunctionOnAtoms::new(Arc::clone(&mu), values);
        let near = square_function(&grid, &f, SquareFunctionKind::Nearby { band: 2, delta: 200.0 });
        let haar = square_function(&grid, &f, SquareFunctionKind::Haar);
        for i in 0..mu.len() {
            assert!((near.value(i) - haar.value(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn maximal_examples() {
        let (grid, mu) = two_atom_setup([1.0, 1.0]);
        let f = FunctionOnAtoms::new(Arc::clone(&mu), vec![1.0, 3.0]);
        let m = dyadic_maximal(&grid, &[&f]);
        assert!((m.value(0) - 2.0).abs() < 1e-12);
        assert!((m.value(1) - 3.0).abs() < 1e-12);
        // Nonnegative constants are fixed points.
        let c = FunctionOnAtoms::constant(Arc::clone(&mu), 4.0);
        let mc = dyadic_maximal(&grid, &[&c]);
        assert!((mc.value(0) - 4.0).abs() < 1e-12);
        // A single-entry family equals the scalar operator.
        let vec_m = dyadic_maximal(&grid, &[&f]);
        for i in 0..2 {
            assert!((vec_m.value(i) - m.value(i)).abs() < 1e-15);
        }
    }
}
