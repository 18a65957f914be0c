//! Stopping times, coronas, Calderon-Zygmund / Poisson-energy stopping
//! construction, Carleson and quasiorthogonality statistics, and iterated
//! coronas with their regularized distance.

use crate::error::{Error, Result};
use crate::grid::{AtomicMeasure, DyadicInterval, Grid, MeasurePair};
use crate::haar::{expectation, FunctionOnAtoms};
use crate::hilbert::poisson_on_complement;
use std::sync::Arc;

/// A collection of stopping tops with parent links and per-top stopping
/// values; coronas partition the grid below the top interval.
#[derive(Debug, Clone)]
pub struct StoppingForest {
    grid: Grid,
    tops: Vec<DyadicInterval>,
    parent: Vec<Option<usize>>,
    alpha: Vec<f64>,
    top_index: Vec<Option<usize>>,
    /// Coronas whose stopping ratio was formally infinite (zero sigma mass
    /// with a positive numerator); reported, and excluded from suprema that
    /// the construction cannot control.
    pub flagged_infinite: Vec<usize>,
}

impl StoppingForest {
    /// Build from a set of tops containing `top`; parents are the smallest
    /// strictly containing tops.  Alphas default to zero.
    pub fn from_tops(grid: Grid, top: DyadicInterval, mut tops: Vec<DyadicInterval>) -> Result<Self> {
        if !tops.contains(&top) {
            tops.push(top);
        }
        tops.sort();
        tops.dedup();
        for t in &tops {
            if !top.contains(*t) {
                return Err(Error::InvalidInput(format!("top {t:?} outside forest root")));
            }
        }
        // Root first, then by (level, offset).
        tops.sort_by_key(|t| (t.level, t.offset));
        let mut top_index = vec![None; grid.interval_count()];
        for (i, t) in tops.iter().enumerate() {
            top_index[t.heap_index()] = Some(i);
        }
        let mut parent = vec![None; tops.len()];
        for (i, t) in tops.iter().enumerate() {
            if *t == top {
                continue;
            }
            let mut cur = *t;
            while let Ok(p) = cur.parent() {
                cur = p;
                if let Some(j) = top_index[cur.heap_index()] {
                    parent[i] = Some(j);
                    break;
                }
                if cur == top {
                    break;
                }
            }
            if parent[i].is_none() {
                // Root is always an ancestor inside the forest.
                parent[i] = Some(0);
            }
        }
        let n = tops.len();
        Ok(StoppingForest {
            grid,
            tops,
            parent,
            alpha: vec![0.0; n],
            top_index,
            flagged_infinite: Vec::new(),
        })
    }

    pub fn trivial(grid: Grid, top: DyadicInterval) -> Self {
        StoppingForest::from_tops(grid, top, vec![top]).unwrap()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn top(&self) -> DyadicInterval {
        self.tops[0]
    }

    pub fn tops(&self) -> &[DyadicInterval] {
        &self.tops
    }

    pub fn alpha(&self, idx: usize) -> f64 {
        self.alpha[idx]
    }

    pub fn set_alpha(&mut self, alphas: Vec<f64>) {
        assert_eq!(alphas.len(), self.tops.len());
        self.alpha = alphas;
    }

    pub fn parent_of(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    pub fn is_top(&self, i: DyadicInterval) -> bool {
        self.top_index[i.heap_index()].is_some()
    }

    pub fn index_of(&self, i: DyadicInterval) -> Option<usize> {
        self.top_index[i.heap_index()]
    }

    /// Index of the smallest top containing `i` (the corona `i` belongs to).
    pub fn corona_top_index(&self, i: DyadicInterval) -> Option<usize> {
        if !self.top().contains(i) {
            return None;
        }
        if let Some(idx) = self.top_index[i.heap_index()] {
            return Some(idx);
        }
        let mut cur = i;
        while let Ok(p) = cur.parent() {
            cur = p;
            if let Some(idx) = self.top_index[cur.heap_index()] {
                return Some(idx);
            }
        }
        None
    }

    /// Every grid interval whose smallest containing top is `tops[idx]`.
    pub fn corona_intervals(&self, idx: usize) -> Vec<DyadicInterval> {
        let mut out = Vec::new();
        let mut stack = vec![self.tops[idx]];
        while let Some(node) = stack.pop() {
            if node != self.tops[idx] && self.is_top(node) {
                continue;
            }
            out.push(node);
            if node.level < self.grid.l {
                stack.push(node.left_child(&self.grid).unwrap());
                stack.push(node.right_child(&self.grid).unwrap());
            }
        }
        out.sort();
        out
    }

    pub fn children_of(&self, idx: usize) -> Vec<usize> {
        (0..self.tops.len()).filter(|&i| self.parent[i] == Some(idx)).collect()
    }

    /// Tops at forest distance `n` below `idx`.
    pub fn generation(&self, idx: usize, n: usize) -> Vec<usize> {
        let mut cur = vec![idx];
        for _ in 0..n {
            let mut next = Vec::new();
            for &i in &cur {
                next.extend(self.children_of(i));
            }
            cur = next;
        }
        cur
    }

    /// Forest distance from the root top.
    pub fn dist_from_root(&self, idx: usize) -> usize {
        let mut d = 0;
        let mut cur = idx;
        while let Some(p) = self.parent[cur] {
            d += 1;
            cur = p;
        }
        d
    }

    pub fn depth(&self) -> usize {
        (0..self.tops.len()).map(|i| self.dist_from_root(i)).max().unwrap_or(0)
    }

    /// Measured Carleson norm: `sup_F sum_{F' below F} |F'|_mu / |F|_mu`.
    pub fn carleson_norm(&self, mu: &AtomicMeasure) -> f64 {
        let masses: Vec<f64> =
            self.tops.iter().map(|t| mu.interval_mass(*t, &self.grid)).collect();
        let mut best: f64 = 1.0;
        for (i, t) in self.tops.iter().enumerate() {
            let total: f64 = self
                .tops
                .iter()
                .enumerate()
                .filter(|(_, s)| t.contains(**s))
                .map(|(j, _)| masses[j])
                .sum();
            if masses[i] > 0.0 {
                best = best.max(total / masses[i]);
            }
        }
        best
    }
}

/// Calderon-Zygmund / Poisson-energy stopping times for `f` below `top`.
///
/// A maximal good proper descendant `I'` of a top `I` becomes a new top when
/// either its Poisson-energy ratio exceeds `gamma^p`, or its average of
/// `|P_{D[I]} f|` exceeds four times the parent average.  Zero sigma-mass
/// ratios count as infinite when the numerator is positive (flagged), and
/// zero otherwise.
pub fn build_cz_energy_forest(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    p: f64,
    gamma: f64,
    top: DyadicInterval,
) -> Result<StoppingForest> {
    let grid = &pair.grid;
    let mut tops = vec![top];
    let mut flagged = Vec::new();
    let mut queue = vec![top];
    let mut steps: u64 = 0;
    let cap = (grid.interval_count() as u64 + 1) * 4;
    while let Some(parent_top) = queue.pop() {
        steps += 1;
        if steps > cap {
            return Err(Error::GammaTooSmall);
        }
        let found = select_stopping_children(pair, f, p, gamma, parent_top, &mut flagged);
        for child in found {
            tops.push(child);
            queue.push(child);
        }
    }
    let mut forest = StoppingForest::from_tops(*grid, top, tops)?;
    forest.flagged_infinite = flagged
        .iter()
        .filter_map(|t| forest.index_of(*t))
        .collect();
    // Stopping value: running sup of corona averages of |P_{D[parent]} f|
    // along the forest chain; the root uses f - E_top f.
    let mut alphas = vec![0.0; forest.tops().len()];
    for idx in 0..forest.tops().len() {
        let own = corona_average_term(pair, f, &forest, idx);
        let inherited: f64 = forest.parent_of(idx).map(|p| alphas[p]).unwrap_or(0.0);
        alphas[idx] = inherited.max(own);
    }
    forest.set_alpha(alphas);
    Ok(forest)
}

fn select_stopping_children(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    p: f64,
    gamma: f64,
    parent_top: DyadicInterval,
    flagged: &mut Vec<DyadicInterval>,
) -> Vec<DyadicInterval> {
    let grid = &pair.grid;
    let parent_range = pair.sigma.atom_range(parent_top, grid);
    let parent_mass = pair.sigma.interval_mass(parent_top, grid);
    // Projection of f onto the tree below the parent: f - E_parent f there.
    let parent_avg_abs = if parent_mass > 0.0 {
        let mean = expectation(grid, f, parent_top).unwrap();
        let mut acc = 0.0;
        for i in parent_range.clone() {
            acc += (f.value(i) - mean).abs() * pair.sigma.mass_of(i);
        }
        acc / parent_mass
    } else {
        0.0
    };
    let parent_mean = if parent_mass > 0.0 {
        expectation(grid, f, parent_top).unwrap()
    } else {
        0.0
    };
    let mut out = Vec::new();
    let mut stack: Vec<DyadicInterval> = Vec::new();
    if parent_top.level < grid.l {
        stack.push(parent_top.left_child(grid).unwrap());
        stack.push(parent_top.right_child(grid).unwrap());
    }
    while let Some(node) = stack.pop() {
        let fires = grid.is_good(node)
            && stopping_criterion(
                pair,
                f,
                p,
                gamma,
                parent_top,
                node,
                parent_avg_abs,
                parent_mean,
                flagged,
            );
        if fires {
            out.push(node);
            continue;
        }
        if node.level < grid.l {
            stack.push(node.left_child(grid).unwrap());
            stack.push(node.right_child(grid).unwrap());
        }
    }
    out.sort();
    out
}

#[allow(clippy::too_many_arguments)]
fn stopping_criterion(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    p: f64,
    gamma: f64,
    parent_top: DyadicInterval,
    node: DyadicInterval,
    parent_avg_abs: f64,
    parent_mean: f64,
    flagged: &mut Vec<DyadicInterval>,
) -> bool {
    let grid = &pair.grid;
    let node_sigma = pair.sigma.interval_mass(node, grid);
    // Poisson-energy criterion.
    let energy = crate::chars::p_energy_value(&pair.omega, grid, node, p);
    let omega_mass = pair.omega.interval_mass(node, grid);
    let numerator = if energy > 0.0 && omega_mass > 0.0 {
        let pois = poisson_on_complement(
            grid,
            node,
            &pair.sigma,
            pair.sigma.atom_range(parent_top, grid),
            pair.sigma.atom_range(node, grid),
        );
        (pois / node.len(grid)).powf(p) * energy.powf(p) * omega_mass
    } else {
        0.0
    };
    if numerator > 0.0 {
        if node_sigma <= 0.0 {
            flagged.push(node);
            return true;
        }
        if numerator / node_sigma > gamma.powf(p) {
            return true;
        }
    }
    // Average criterion relative to the parent top.
    if node_sigma > 0.0 && parent_avg_abs > 0.0 {
        let mut acc = 0.0;
        for i in pair.sigma.atom_range(node, grid) {
            acc += (f.value(i) - parent_mean).abs() * pair.sigma.mass_of(i);
        }
        if acc / node_sigma > 4.0 * parent_avg_abs {
            return true;
        }
    }
    false
}

fn corona_average_term(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    forest: &StoppingForest,
    idx: usize,
) -> f64 {
    let grid = forest.grid();
    let g = forest.tops()[idx];
    let reference = match forest.parent_of(idx) {
        Some(p) => forest.tops()[p],
        None => forest.top(),
    };
    let ref_mass = pair.sigma.interval_mass(reference, grid);
    if ref_mass <= 0.0 {
        return 0.0;
    }
    let ref_mean = expectation(grid, f, reference).unwrap();
    let g_mass = pair.sigma.interval_mass(g, grid);
    if g_mass <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in pair.sigma.atom_range(g, grid) {
        acc += (f.value(i) - ref_mean).abs() * pair.sigma.mass_of(i);
    }
    acc / g_mass
}

/// Stopping-data statistics of a forest for a function.
#[derive(Debug, Clone)]
pub struct StoppingDataReport {
    /// (1) worst `E_I |f| / alpha(F)` over coronas with positive alpha.
    pub max_corona_average_ratio: f64,
    /// (2) measured Carleson norm.
    pub carleson_norm: f64,
    /// (3) `sum alpha^p |F|_mu / ||f||_p^p`.
    pub quasiorth_power_ratio: f64,
    /// `||sum alpha 1_F||_p^p / ||f||_p^p`.
    pub quasiorth_sum_ratio: f64,
    /// (4) alphas never decrease along descending forest chains.
    pub alpha_monotone: bool,
    /// For each top: generation mass ratios `sum_{G in gen n} |G| / |F|`.
    pub decay_profile: Vec<Vec<f64>>,
    /// Geometric decay `2^{-n/ceil(2 C0)}` holds for every `n >= ceil(2 C0)`.
    pub decay_ok: bool,
    /// `int (sum_F alpha^2 1_{F^kappa})^{p/2} dmu` for `kappa = 0..=kappa_max`.
    pub alpha_kappa_norms: Vec<f64>,
    /// Same, divided by `sum alpha^p |F|_mu`.
    pub alpha_kappa_ratios: Vec<f64>,
    /// At `kappa = 0` and `p >= 2` the ratio is at least one (termwise
    /// comparison of the square sum with the p-th power sum).
    pub reverse_at_zero_ok: Option<bool>,
}

pub fn stopping_data_report(
    forest: &StoppingForest,
    f: &FunctionOnAtoms,
    mu: &Arc<AtomicMeasure>,
    p: f64,
    kappa_max: usize,
) -> StoppingDataReport {
    let grid = forest.grid();
    let tops = forest.tops();
    let masses: Vec<f64> = tops.iter().map(|t| mu.interval_mass(*t, grid)).collect();

    // (1) corona averages against alpha.
    let mut max_ratio: f64 = 0.0;
    for idx in 0..tops.len() {
        let alpha = forest.alpha(idx);
        for i in forest.corona_intervals(idx) {
            if mu.interval_mass(i, grid) <= 0.0 {
                continue;
            }
            let mut acc = 0.0;
            let mut m = 0.0;
            for a in mu.atom_range(i, grid) {
                acc += f.value(a).abs() * mu.mass_of(a);
                m += mu.mass_of(a);
            }
            let avg = acc / m;
            if alpha > 0.0 {
                max_ratio = max_ratio.max(avg / alpha);
            } else if avg > 0.0 {
                max_ratio = f64::INFINITY;
            }
        }
    }

    let carleson = forest.carleson_norm(mu);
    let fnorm_p = f.lp_norm(p).powf(p);
    let quasi_power: f64 = (0..tops.len())
        .map(|i| forest.alpha(i).powf(p) * masses[i])
        .sum();
    // || sum_F alpha(F) 1_F ||_p^p pointwise over atoms.
    let mut sum_alpha = vec![0.0; mu.len()];
    for (idx, t) in tops.iter().enumerate() {
        for a in mu.atom_range(*t, grid) {
            sum_alpha[a] += forest.alpha(idx);
        }
    }
    let quasi_sum: f64 = sum_alpha
        .iter()
        .enumerate()
        .map(|(a, v)| v.abs().powf(p) * mu.mass_of(a))
        .sum();

    let alpha_monotone = (0..tops.len()).all(|i| match forest.parent_of(i) {
        Some(par) => forest.alpha(i) >= forest.alpha(par) - 1e-12 * forest.alpha(par).abs(),
        None => true,
    });

    // Generation decay per top.
    let mut decay_profile = Vec::with_capacity(tops.len());
    let mut decay_ok = true;
    let n_big = (2.0 * carleson).ceil().max(1.0);
    for idx in 0..tops.len() {
        let mut rows = Vec::new();
        let mut n = 0usize;
        loop {
            let gen = forest.generation(idx, n);
            if gen.is_empty() {
                break;
            }
            let total: f64 = gen.iter().map(|&g| masses[g]).sum();
            let ratio = if masses[idx] > 0.0 {
                total / masses[idx]
            } else if total > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            rows.push(ratio);
            if n as f64 >= n_big {
                let bound = (-(n as f64) / n_big).exp2();
                if ratio > bound * (1.0 + 1e-12) {
                    decay_ok = false;
                }
            }
            n += 1;
        }
        decay_profile.push(rows);
    }

    // Depth of every atom's top chain, for the F^kappa indicator sums.
    let mut alpha_kappa_norms = Vec::with_capacity(kappa_max + 1);
    let mut alpha_kappa_ratios = Vec::with_capacity(kappa_max + 1);
    for kappa in 0..=kappa_max {
        let mut total = 0.0;
        for a in 0..mu.len() {
            // Chain of tops containing this atom, root first.
            let pos = mu.position(a);
            let cell = crate::haar::cell_of(grid, &pos);
            let mut chain = Vec::new();
            if let Some(mut idx) = forest.corona_top_index(cell) {
                chain.push(idx);
                while let Some(par) = forest.parent_of(idx) {
                    chain.push(par);
                    idx = par;
                }
            }
            chain.reverse();
            // x lies in F^kappa exactly when F sits kappa steps above some
            // chain element, i.e. for chain prefixes of length len - kappa.
            let mut sq = 0.0;
            if chain.len() > kappa {
                for &fidx in &chain[..chain.len() - kappa] {
                    let al = forest.alpha(fidx);
                    sq += al * al;
                }
            }
            total += sq.powf(p / 2.0) * mu.mass_of(a);
        }
        alpha_kappa_norms.push(total);
        alpha_kappa_ratios.push(if quasi_power > 0.0 { total / quasi_power } else { 0.0 });
    }

    let reverse_at_zero_ok = if p >= 2.0 {
        Some(quasi_power <= alpha_kappa_norms[0] * (1.0 + 1e-12) + 1e-300)
    } else {
        None
    };

    StoppingDataReport {
        max_corona_average_ratio: max_ratio,
        carleson_norm: carleson,
        quasiorth_power_ratio: if fnorm_p > 0.0 { quasi_power / fnorm_p } else { 0.0 },
        quasiorth_sum_ratio: if fnorm_p > 0.0 { quasi_sum / fnorm_p } else { 0.0 },
        alpha_monotone,
        decay_profile,
        decay_ok,
        alpha_kappa_norms,
        alpha_kappa_ratios,
        reverse_at_zero_ok,
    }
}

/// Iterated corona structure: an outer forest with one inner forest per
/// outer corona, and the regularized distance of every inner top.
#[derive(Debug, Clone)]
pub struct IteratedForest {
    pub outer: StoppingForest,
    pub inner: Vec<StoppingForest>,
    /// Block sizes per outer depth: one more than the largest inner depth
    /// found at that outer level.
    pub depth_profile: Vec<u64>,
    /// `(outer index, inner top index) -> regularized distance`.
    pub xdist: Vec<Vec<u64>>,
}

impl IteratedForest {
    /// Tops grouped by their regularized distance: entry `t` lists the
    /// `(outer index, inner index)` pairs with `xdist = t`.
    pub fn level_groups(&self) -> Vec<Vec<(usize, usize)>> {
        let max = self
            .xdist
            .iter()
            .flat_map(|row| row.iter())
            .copied()
            .max()
            .unwrap_or(0);
        let mut groups = vec![Vec::new(); (max + 1) as usize];
        for (q, row) in self.xdist.iter().enumerate() {
            for (a, &t) in row.iter().enumerate() {
                groups[t as usize].push((q, a));
            }
        }
        groups
    }

    /// Distance tuple `(inner distance, outer depth)` of the level `t`.
    pub fn level_pair(&self, t: u64) -> Option<(u64, u64)> {
        let mut offset = 0u64;
        for (m, block) in self.depth_profile.iter().enumerate() {
            if t < offset + block {
                return Some((t - offset, m as u64));
            }
            offset += block;
        }
        None
    }
}

/// Compose an outer forest with per-corona inner forests.
///
/// The regularized distance of an inner top `A` under the outer top `Q` at
/// outer depth `m` is the total size of the blocks above plus the inner
/// distance: `xdist(A) = block_0 + ... + block_{m-1} + inner distance`,
/// where each block is one more than the largest inner depth at its outer
/// level.  With trivial inner forests this is the outer forest distance.
pub fn compose_xdist(outer: &StoppingForest, inner: Vec<StoppingForest>) -> Result<IteratedForest> {
    if inner.len() != outer.tops().len() {
        return Err(Error::MismatchedTops);
    }
    for (idx, inf) in inner.iter().enumerate() {
        if inf.top() != outer.tops()[idx] {
            return Err(Error::MismatchedTops);
        }
        for t in inf.tops() {
            if outer.corona_top_index(*t) != Some(idx) && !outer.is_top(*t) {
                return Err(Error::MismatchedTops);
            }
            // Inner tops other than the shared root must lie inside the
            // outer corona of their root.
            if *t != inf.top() && outer.corona_top_index(*t) != Some(idx) {
                return Err(Error::MismatchedTops);
            }
        }
    }
    let outer_depth = outer.depth();
    let mut depth_profile = vec![0u64; outer_depth + 1];
    for idx in 0..outer.tops().len() {
        let m = outer.dist_from_root(idx);
        depth_profile[m] = depth_profile[m].max(1 + inner[idx].depth() as u64);
    }
    let mut xdist = Vec::with_capacity(inner.len());
    for (idx, inf) in inner.iter().enumerate() {
        let m = outer.dist_from_root(idx);
        let offset: u64 = depth_profile[..m].iter().sum();
        let dists: Vec<u64> = (0..inf.tops().len())
            .map(|a| offset + inf.dist_from_root(a) as u64)
            .collect();
        xdist.push(dists);
    }
    Ok(IteratedForest { outer: outer.clone(), inner, depth_profile, xdist })
}
