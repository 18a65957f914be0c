//! Dyadic grid over a top interval `[0, 2^m)`, atomic measures living on it,
//! and the goodness / deep-embedding predicates.
//!
//! Interval endpoints are integers scaled by `2^{m-l}`, atom positions are
//! dyadic rationals, and every geometric predicate is decided in exact
//! integer arithmetic.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

/// Dyadic rational `num / 2^neg_exp`, kept normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i64,
    neg_exp: u32,
}

impl Dyadic {
    pub fn new(num: i64, neg_exp: u32) -> Self {
        let mut d = Dyadic { num, neg_exp };
        d.normalize();
        d
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic { num: n, neg_exp: 0 }
    }

    pub fn zero() -> Self {
        Dyadic { num: 0, neg_exp: 0 }
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.neg_exp = 0;
            return;
        }
        while self.neg_exp > 0 && self.num % 2 == 0 {
            self.num /= 2;
            self.neg_exp -= 1;
        }
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn log2_denominator(&self) -> u32 {
        self.neg_exp
    }

    /// Exact as long as the numerator fits in the f64 mantissa, which the
    /// constructors guarantee.
    pub fn to_f64(&self) -> f64 {
        self.num as f64 * (-(self.neg_exp as f64)).exp2()
    }

    pub fn to_rational(&self) -> BigRational {
        let den = BigUint::one() << self.neg_exp as usize;
        BigRational::new(self.num.into(), den.into())
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        let e = self.neg_exp.max(other.neg_exp);
        let a = (self.num as i128) << (e - self.neg_exp);
        let b = (other.num as i128) << (e - other.neg_exp);
        let num = a - b;
        assert!(num >= i64::MIN as i128 && num <= i64::MAX as i128);
        Dyadic::new(num as i64, e)
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        self.sub(&Dyadic::new(-other.num, other.neg_exp))
    }

    /// Parse the exact "num/den" encoding; plain integers are accepted too.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad dyadic rational: {text}"));
        let (num_s, den_s) = match text.split_once('/') {
            Some((n, d)) => (n, d),
            None => (text, "1"),
        };
        let num: i64 = num_s.trim().parse().map_err(|_| bad())?;
        let den: u64 = den_s.trim().parse().map_err(|_| bad())?;
        if den == 0 || !den.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "denominator must be a power of two: {text}"
            )));
        }
        if num.unsigned_abs() >= (1u64 << 53) {
            return Err(Error::InvalidInput(format!(
                "numerator too large for exact arithmetic: {text}"
            )));
        }
        Ok(Dyadic::new(num, den.trailing_zeros()))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.neg_exp.max(other.neg_exp);
        let a = (self.num as i128) << (e - self.neg_exp);
        let b = (other.num as i128) << (e - other.neg_exp);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.neg_exp == 0 {
            write!(f, "{}/1", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1u128 << self.neg_exp)
        }
    }
}

/// Grid parameters: top interval `[0, 2^m)`, atom resolution level `l`,
/// goodness integer `r`, boundary exponent `eps = eps_num/eps_den`, and the
/// comparability threshold `tau = r + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub m: u32,
    pub l: u32,
    pub r: u32,
    pub eps_num: u32,
    pub eps_den: u32,
    pub tau: u32,
}

impl Grid {
    pub fn new(m: u32, l: u32, r: u32, eps_num: u32, eps_den: u32, tau: u32) -> Result<Self> {
        if tau != r + 1 {
            return Err(Error::InvalidInput(format!("tau must equal r + 1, got {tau}")));
        }
        if eps_num == 0 || 4 * eps_num >= eps_den {
            return Err(Error::InvalidInput(format!(
                "eps must lie in (0, 1/4), got {eps_num}/{eps_den}"
            )));
        }
        if l < r + 3 {
            return Err(Error::InvalidInput(format!("need l >= r + 3, got l={l}, r={r}")));
        }
        if l > 24 {
            return Err(Error::InvalidInput(format!("grid depth l={l} too large")));
        }
        Ok(Grid { m, l, r, eps_num, eps_den, tau })
    }

    /// Default parameters: `eps = 1/5` with `r = 4` on grids deep enough to
    /// allow it, `r = 3` otherwise.
    ///
    /// The goodness parameters matter more than they look: with `r = 3`
    /// (at any admissible eps) or with `eps = 1/8`, the deep-embedding
    /// windows of successive ancestors are arithmetically incompatible on
    /// the standard grid, the child-good class dies within four levels of
    /// the top, and every deeply-nested frequency pair vanishes.  With
    /// `r = 4, eps = 1/5` eight child-good positions per level survive to
    /// any depth.
    pub fn with_defaults(m: u32, l: u32) -> Result<Self> {
        if l >= 7 {
            Grid::new(m, l, 4, 1, 5, 5)
        } else {
            Grid::new(m, l, 3, 1, 5, 4)
        }
    }

    pub fn top(&self) -> DyadicInterval {
        DyadicInterval { level: 0, offset: 0 }
    }

    /// Side length `2^{m-k}` of a level-`k` interval.
    pub fn len_at_level(&self, level: u32) -> f64 {
        (self.m as f64 - level as f64).exp2()
    }

    /// One atom cell width `2^{m-l}` as a dyadic rational.
    pub fn unit(&self) -> Dyadic {
        if self.m >= self.l {
            Dyadic::from_int(1i64 << (self.m - self.l))
        } else {
            Dyadic::new(1, self.l - self.m)
        }
    }

    /// Dyadic value of `units * 2^{m-l}`.
    pub fn units_to_dyadic(&self, units: i64) -> Dyadic {
        if self.m >= self.l {
            Dyadic::from_int(units << (self.m - self.l))
        } else {
            Dyadic::new(units, self.l - self.m)
        }
    }

    /// All grid intervals, coarse to fine.
    pub fn intervals(&self) -> impl Iterator<Item = DyadicInterval> + '_ {
        (0..=self.l).flat_map(|level| {
            (0u64..(1u64 << level)).map(move |offset| DyadicInterval { level, offset })
        })
    }

    pub fn interval_count(&self) -> usize {
        (1usize << (self.l + 1)) - 1
    }

    /// Exact test of `(steps, eps)`-deep embedding of `j` in `i`:
    /// `len(j) <= 2^{-steps} len(i)` and
    /// `dist(j, boundary of i) >= (1/2) len(j)^eps len(i)^{1-eps}`.
    pub fn deep_embedded(&self, j: DyadicInterval, i: DyadicInterval, steps: u32) -> bool {
        if !i.contains(j) {
            return false;
        }
        if j.level < i.level + steps {
            return false;
        }
        let d = (j.lo_units(self) - i.lo_units(self)).min(i.hi_units(self) - j.hi_units(self));
        self.boundary_gap_ok(d, j.level, i.level)
    }

    /// Exact comparison `d * 2^{m-l} >= 2^{-1} * 2^{eps(m-kj)} * 2^{(1-eps)(m-ki)}`
    /// for nonnegative integer `d` in units of `2^{m-l}`.
    fn boundary_gap_ok(&self, d: u64, kj: u32, ki: u32) -> bool {
        if d == 0 {
            return false;
        }
        let a = self.eps_num as i64;
        let b = self.eps_den as i64;
        // b*log2(d) >= b*(l - 1 - ki) + a*(ki - kj)
        let e = b * (self.l as i64 - 1 - ki as i64) + a * (ki as i64 - kj as i64);
        if e <= 0 {
            return true;
        }
        let lhs = BigUint::from(d).pow(b as u32);
        let rhs = BigUint::one() << (e as usize);
        lhs >= rhs
    }

    /// A good interval is deeply embedded in every much larger superinterval.
    pub fn is_good(&self, j: DyadicInterval) -> bool {
        let mut i = j;
        while let Ok(parent) = i.parent() {
            i = parent;
            if j.level > i.level + self.r && !self.deep_embedded(j, i, self.r) {
                return false;
            }
        }
        true
    }

    /// Good together with both dyadic children; intervals at the atom
    /// resolution level have no in-grid children and fail.
    pub fn is_child_good(&self, j: DyadicInterval) -> bool {
        if j.level >= self.l {
            return false;
        }
        self.is_good(j)
            && self.is_good(j.left_child(self).unwrap())
            && self.is_good(j.right_child(self).unwrap())
    }
}

/// Half-open dyadic interval `[offset*2^{m-level}, (offset+1)*2^{m-level})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    pub level: u32,
    pub offset: u64,
}

impl DyadicInterval {
    pub fn new(level: u32, offset: u64) -> Self {
        debug_assert!(offset < (1u64 << level));
        DyadicInterval { level, offset }
    }

    pub fn parent(&self) -> Result<DyadicInterval> {
        if self.level == 0 {
            return Err(Error::OutOfGrid);
        }
        Ok(DyadicInterval { level: self.level - 1, offset: self.offset / 2 })
    }

    pub fn left_child(&self, grid: &Grid) -> Result<DyadicInterval> {
        if self.level >= grid.l {
            return Err(Error::OutOfGrid);
        }
        Ok(DyadicInterval { level: self.level + 1, offset: 2 * self.offset })
    }

    pub fn right_child(&self, grid: &Grid) -> Result<DyadicInterval> {
        if self.level >= grid.l {
            return Err(Error::OutOfGrid);
        }
        Ok(DyadicInterval { level: self.level + 1, offset: 2 * self.offset + 1 })
    }

    pub fn sibling(&self) -> Result<DyadicInterval> {
        if self.level == 0 {
            return Err(Error::OutOfGrid);
        }
        Ok(DyadicInterval { level: self.level, offset: self.offset ^ 1 })
    }

    /// Left endpoint in units of `2^{m-l}`.
    pub fn lo_units(&self, grid: &Grid) -> u64 {
        self.offset << (grid.l - self.level)
    }

    pub fn hi_units(&self, grid: &Grid) -> u64 {
        (self.offset + 1) << (grid.l - self.level)
    }

    pub fn len_units(&self, grid: &Grid) -> u64 {
        1u64 << (grid.l - self.level)
    }

    pub fn lo(&self, grid: &Grid) -> Dyadic {
        grid.units_to_dyadic(self.lo_units(grid) as i64)
    }

    pub fn hi(&self, grid: &Grid) -> Dyadic {
        grid.units_to_dyadic(self.hi_units(grid) as i64)
    }

    pub fn len(&self, grid: &Grid) -> f64 {
        grid.len_at_level(self.level)
    }

    pub fn center(&self, grid: &Grid) -> f64 {
        (self.lo_units(grid) + self.hi_units(grid)) as f64 * 0.5 * grid.unit().to_f64()
    }

    pub fn contains(&self, other: DyadicInterval) -> bool {
        other.level >= self.level && (other.offset >> (other.level - self.level)) == self.offset
    }

    pub fn strictly_contains(&self, other: DyadicInterval) -> bool {
        other.level > self.level && self.contains(other)
    }

    pub fn intersects(&self, other: DyadicInterval) -> bool {
        self.contains(other) || other.contains(*self)
    }

    /// Euclidean gap between disjoint intervals, in units of `2^{m-l}`;
    /// zero for touching or intersecting intervals.
    pub fn gap_units(&self, other: DyadicInterval, grid: &Grid) -> u64 {
        let (alo, ahi) = (self.lo_units(grid), self.hi_units(grid));
        let (blo, bhi) = (other.lo_units(grid), other.hi_units(grid));
        if ahi <= blo {
            blo - ahi
        } else if bhi <= alo {
            alo - bhi
        } else {
            0
        }
    }

    pub fn contains_position(&self, pos: &Dyadic, grid: &Grid) -> bool {
        let lo = self.lo(grid);
        let hi = self.hi(grid);
        *pos >= lo && *pos < hi
    }

    /// Heap layout index: level by level, left to right.
    pub fn heap_index(&self) -> usize {
        ((1usize << self.level) - 1) + self.offset as usize
    }

    /// Ancestors from parent up to the top interval.
    pub fn ancestors(&self) -> impl Iterator<Item = DyadicInterval> {
        let mut cur = *self;
        std::iter::from_fn(move || match cur.parent() {
            Ok(p) => {
                cur = p;
                Some(p)
            }
            Err(_) => None,
        })
    }

    /// Relation navigation with grid bounds checking.
    pub fn navigate(&self, relation: Relation, grid: &Grid) -> Result<DyadicInterval> {
        match relation {
            Relation::Parent => self.parent(),
            Relation::LeftChild => self.left_child(grid),
            Relation::RightChild => self.right_child(grid),
            Relation::Sibling => self.sibling(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Parent,
    LeftChild,
    RightChild,
    Sibling,
}

/// Finite positive atomic measure with strictly increasing dyadic positions.
#[derive(Debug, Clone)]
pub struct AtomicMeasure {
    positions: Vec<Dyadic>,
    pos_f64: Vec<f64>,
    masses: Vec<f64>,
    prefix: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(mut atoms: Vec<(Dyadic, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        for w in atoms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidInput(format!(
                    "duplicate atom position {}",
                    w[0].0
                )));
            }
        }
        for (p, m) in &atoms {
            if !(m.is_finite() && *m > 0.0) {
                return Err(Error::InvalidInput(format!("mass at {p} must be positive")));
            }
        }
        let positions: Vec<Dyadic> = atoms.iter().map(|a| a.0).collect();
        let pos_f64: Vec<f64> = positions.iter().map(|p| p.to_f64()).collect();
        let masses: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let mut prefix = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for m in &masses {
            acc += m;
            prefix.push(acc);
        }
        Ok(AtomicMeasure { positions, pos_f64, masses, prefix })
    }

    pub fn empty() -> Self {
        AtomicMeasure {
            positions: Vec::new(),
            pos_f64: Vec::new(),
            masses: Vec::new(),
            prefix: vec![0.0],
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn position(&self, i: usize) -> Dyadic {
        self.positions[i]
    }

    pub fn position_f64(&self, i: usize) -> f64 {
        self.pos_f64[i]
    }

    pub fn positions_f64(&self) -> &[f64] {
        &self.pos_f64
    }

    pub fn mass_of(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// Index range of atoms with `a <= position < b`.
    pub fn range_between(&self, a: &Dyadic, b: &Dyadic) -> std::ops::Range<usize> {
        let lo = self.positions.partition_point(|p| p < a);
        let hi = self.positions.partition_point(|p| p < b);
        lo..hi
    }

    /// Mass of the half-open window `[a, b)`, summed left to right.
    pub fn mass_between(&self, a: &Dyadic, b: &Dyadic) -> f64 {
        let range = self.range_between(a, b);
        let mut acc = 0.0;
        for i in range {
            acc += self.masses[i];
        }
        acc
    }

    pub fn atom_range(&self, interval: DyadicInterval, grid: &Grid) -> std::ops::Range<usize> {
        self.range_between(&interval.lo(grid), &interval.hi(grid))
    }

    pub fn interval_mass(&self, interval: DyadicInterval, grid: &Grid) -> f64 {
        let r = self.atom_range(interval, grid);
        self.prefix[r.end] - self.prefix[r.start]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (Dyadic, f64)> + '_ {
        self.positions.iter().copied().zip(self.masses.iter().copied())
    }
}

/// A grid together with the two measures under study.
#[derive(Debug, Clone)]
pub struct MeasurePair {
    pub grid: Grid,
    pub sigma: Arc<AtomicMeasure>,
    pub omega: Arc<AtomicMeasure>,
}

impl MeasurePair {
    pub fn new(grid: Grid, sigma: AtomicMeasure, omega: AtomicMeasure) -> Result<Self> {
        let top_hi = grid.units_to_dyadic(1i64 << grid.l);
        for m in [&sigma, &omega] {
            for (p, _) in m.atoms() {
                if p < Dyadic::zero() || p >= top_hi {
                    return Err(Error::InvalidInput(format!("atom {p} outside top interval")));
                }
            }
        }
        let mut i = 0;
        let mut j = 0;
        while i < sigma.len() && j < omega.len() {
            match sigma.position(i).cmp(&omega.position(j)) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => return Err(Error::CommonAtom),
            }
        }
        Ok(MeasurePair { grid, sigma: Arc::new(sigma), omega: Arc::new(omega) })
    }

    pub fn swapped(&self) -> MeasurePair {
        MeasurePair {
            grid: self.grid,
            sigma: Arc::clone(&self.omega),
            omega: Arc::clone(&self.sigma),
        }
    }
}

/// Which family `whitney` should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhitneyKind {
    /// Maximal `W` strictly inside `F` with `W` `(steps, eps)`-deeply embedded.
    Deep { steps: u32 },
    /// Maximal good `K` inside `F` whose triple `3K` stays inside `F`.
    GoodTrip,
    /// Maximal good `K` that is `(tau, eps)`-deeply embedded in `F`.
    GoodTau,
    /// Every `J` inside `F` with `len(J) >= 2^{-tau} len(F)`.
    NearbyTau,
}

/// Whitney-type families inside `f`.  An empty result is a valid outcome.
pub fn whitney(grid: &Grid, f: DyadicInterval, kind: WhitneyKind) -> Vec<DyadicInterval> {
    let mut out = Vec::new();
    match kind {
        WhitneyKind::Deep { steps } => collect_maximal(grid, f, &mut out, &|g, w| {
            g.deep_embedded(w, f, steps)
        }),
        WhitneyKind::GoodTrip => collect_maximal(grid, f, &mut out, &|g, k| {
            if !g.is_good(k) {
                return false;
            }
            let len = k.len_units(g);
            let lo = k.lo_units(g);
            let hi = k.hi_units(g);
            lo >= f.lo_units(g) + len && hi + len <= f.hi_units(g)
        }),
        WhitneyKind::GoodTau => collect_maximal(grid, f, &mut out, &|g, k| {
            g.is_good(k) && g.deep_embedded(k, f, g.tau)
        }),
        WhitneyKind::NearbyTau => {
            let max_level = (f.level + grid.tau).min(grid.l);
            for level in f.level..=max_level {
                let shift = level - f.level;
                for off in 0..(1u64 << shift) {
                    out.push(DyadicInterval { level, offset: (f.offset << shift) + off });
                }
            }
        }
    }
    out.sort();
    out
}

fn collect_maximal(
    grid: &Grid,
    node: DyadicInterval,
    out: &mut Vec<DyadicInterval>,
    accept: &dyn Fn(&Grid, DyadicInterval) -> bool,
) {
    // Top-down scan: take a node when it qualifies, otherwise recurse.
    // The starting interval itself is never a candidate.
    if node.level >= grid.l {
        return;
    }
    for child in [node.left_child(grid).unwrap(), node.right_child(grid).unwrap()] {
        collect_maximal_inner(grid, child, out, accept);
    }
}

fn collect_maximal_inner(
    grid: &Grid,
    node: DyadicInterval,
    out: &mut Vec<DyadicInterval>,
    accept: &dyn Fn(&Grid, DyadicInterval) -> bool,
) {
    if accept(grid, node) {
        out.push(node);
        return;
    }
    if node.level >= grid.l {
        return;
    }
    for child in [node.left_child(grid).unwrap(), node.right_child(grid).unwrap()] {
        collect_maximal_inner(grid, child, out, accept);
    }
}
