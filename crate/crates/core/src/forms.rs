//! Exact hierarchical decomposition of the bilinear form into the named
//! pieces, with residual verification and the per-form bound table.

use crate::chars::{CharacteristicReport, Mode};
use crate::corona::StoppingForest;
use crate::error::{Error, Result};
use crate::exact;
use crate::grid::{DyadicInterval, Grid, MeasurePair};
use crate::haar::{haar_function, FunctionOnAtoms, HaarDecomposition};
use crate::hilbert::check_disjoint;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Frequency-pair categories of the six-way split.  Disjoint pairs of equal
/// length land in `Disjoint`; nested non-deep pairs land in the comparable
/// classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Below,
    Above,
    Disjoint,
    DisjointDual,
    Comparable,
    ComparableDual,
}

pub fn classify_pair(i: DyadicInterval, j: DyadicInterval, grid: &Grid) -> Category {
    if i.contains(j) {
        if grid.deep_embedded(j, i, grid.tau) {
            return Category::Below;
        }
        return Category::Comparable;
    }
    if j.contains(i) {
        if grid.deep_embedded(i, j, grid.tau) {
            return Category::Above;
        }
        return Category::ComparableDual;
    }
    // Disjoint; ties on length go to the forward class.
    if j.level >= i.level {
        Category::Disjoint
    } else {
        Category::DisjointDual
    }
}

/// Residuals of the partition identities (absolute values), and whether they
/// were certified exactly zero in rational arithmetic.
#[derive(Debug, Clone, Default)]
pub struct Residuals {
    pub six_way: f64,
    pub home_neigh: f64,
    pub diag_far: f64,
    pub para_stop: f64,
    pub far_inter: f64,
    pub exact_zero: bool,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.six_way
            .max(self.home_neigh)
            .max(self.diag_far)
            .max(self.para_stop)
            .max(self.far_inter)
    }
}

#[derive(Debug, Clone)]
pub struct FormDecomposition {
    pub total: f64,
    pub b_below: f64,
    pub b_above: f64,
    pub b_disj: f64,
    pub b_disj_long: f64,
    pub b_disj_mid: f64,
    pub b_disj_dual: f64,
    pub b_comp: f64,
    pub b_comp_dual: f64,
    pub b_home: f64,
    pub b_neigh: f64,
    pub b_diag: f64,
    pub b_far: f64,
    pub b_para: f64,
    pub b_stop: f64,
    pub b_inter: f64,
    /// Independent recomputation of `b_far - b_inter` as the boundary sum.
    pub far_minus_inter_direct: f64,
    pub residuals: Residuals,
    /// Norm of the part of `f - E f` cut away by the child-good projection.
    pub projection_defect_f: f64,
    pub projection_defect_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Float,
    Rational,
}

/// Sum of `<H D_I f, D_J g>` over an explicit set of frequency pairs.
pub fn form_value(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    g: &FunctionOnAtoms,
    pairs: &[(DyadicInterval, DyadicInterval)],
) -> Result<f64> {
    check_disjoint(&pair.sigma, &pair.omega)?;
    let mut acc = 0.0;
    for &(i, j) in pairs {
        acc += crate::hilbert::pair_inner_product(pair, f, g, i, j);
    }
    Ok(acc)
}

struct Engine<'a> {
    pair: &'a MeasurePair,
    grid: Grid,
    supp_f: Vec<DyadicInterval>,
    supp_g: Vec<DyadicInterval>,
    /// Delta values of the projected functions restricted to atom ranges.
    df: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
    f_cg: FunctionOnAtoms,
    g_cg: FunctionOnAtoms,
    /// Adjoint table: `t[gj][y] = sum_{x in J} D_J g(x) omega_x / (y - x)`
    /// per sigma atom, so every windowed pairing is a linear scan in `y`.
    t: Vec<Vec<f64>>,
    // Exact twins, populated in rational mode.
    exact_on: bool,
    sigma_mass: Vec<BigRational>,
    omega_mass: Vec<BigRational>,
    df_exact: Vec<Vec<BigRational>>,
    t_exact: Vec<Vec<BigRational>>,
}

impl<'a> Engine<'a> {
    fn new(
        pair: &'a MeasurePair,
        f: &FunctionOnAtoms,
        g: &FunctionOnAtoms,
        mode: Arithmetic,
    ) -> (Engine<'a>, f64, f64) {
        let grid = pair.grid;
        let dec_f = HaarDecomposition::compute(&grid, f);
        let dec_g = HaarDecomposition::compute(&grid, g);
        let supp_f: Vec<DyadicInterval> = dec_f
            .support(&grid)
            .into_iter()
            .filter(|i| grid.is_child_good(*i))
            .collect();
        let supp_g: Vec<DyadicInterval> = dec_g
            .support(&grid)
            .into_iter()
            .filter(|j| grid.is_child_good(*j))
            .collect();
        let mut f_cg = FunctionOnAtoms::zero(Arc::clone(&pair.sigma));
        let mut df = Vec::with_capacity(supp_f.len());
        for &i in &supp_f {
            let h = haar_function(&grid, &pair.sigma, i);
            let coeff = f.inner(&h.function);
            let delta = h.function.scaled(coeff);
            f_cg = f_cg.plus(&delta);
            df.push(delta.values().to_vec());
        }
        let mut g_cg = FunctionOnAtoms::zero(Arc::clone(&pair.omega));
        let mut dg = Vec::with_capacity(supp_g.len());
        for &j in &supp_g {
            let h = haar_function(&grid, &pair.omega, j);
            let coeff = g.inner(&h.function);
            let delta = h.function.scaled(coeff);
            g_cg = g_cg.plus(&delta);
            dg.push(delta.values().to_vec());
        }
        // Projection defects against the mean-free parts.
        let f_mean = if pair.sigma.total_mass() > 0.0 { f.integral() / pair.sigma.total_mass() } else { 0.0 };
        let g_mean = if pair.omega.total_mass() > 0.0 { g.integral() / pair.omega.total_mass() } else { 0.0 };
        let f0 = f.minus(&FunctionOnAtoms::constant(Arc::clone(&pair.sigma), f_mean));
        let g0 = g.minus(&FunctionOnAtoms::constant(Arc::clone(&pair.omega), g_mean));
        let defect_f = f0.minus(&f_cg).lp_norm(2.0);
        let defect_g = g0.minus(&g_cg).lp_norm(2.0);

        let exact_on = mode == Arithmetic::Rational;
        // Adjoint transform tables: one pass over (J, x, y) rather than a
        // kernel sum per frequency pair.
        let n_sigma = pair.sigma.len();
        let mut t: Vec<Vec<f64>> = Vec::with_capacity(supp_g.len());
        for (gj, &j) in supp_g.iter().enumerate() {
            let tgt = pair.omega.atom_range(j, &grid);
            let mut row = vec![0.0; n_sigma];
            for x in tgt {
                let weight = dg[gj][x] * pair.omega.mass_of(x);
                let xf = pair.omega.position_f64(x);
                for (y, slot) in row.iter_mut().enumerate() {
                    *slot += weight / (pair.sigma.position_f64(y) - xf);
                }
            }
            t.push(row);
        }
        let (sigma_mass, omega_mass, df_exact, t_exact) = if exact_on {
            let sp = exact::exact_positions(&pair.sigma);
            let op = exact::exact_positions(&pair.omega);
            let sm = exact::exact_masses(&pair.sigma);
            let om = exact::exact_masses(&pair.omega);
            // Exact deltas of the projected functions: the projection is
            // itself a rational object built from exact single-interval
            // deltas of f, so compute deltas of f_cg directly.
            let fv = exact_projection(&pair.sigma, &sm, &grid, f, &supp_f);
            let gv = exact_projection(&pair.omega, &om, &grid, g, &supp_g);
            let dfe: Vec<Vec<BigRational>> = supp_f
                .iter()
                .map(|i| exact::exact_delta(&pair.sigma, &sm, &grid, *i, &fv))
                .collect();
            let mut te: Vec<Vec<BigRational>> = Vec::with_capacity(supp_g.len());
            for (gj, &j) in supp_g.iter().enumerate() {
                let dge = exact::exact_delta(&pair.omega, &om, &grid, j, &gv);
                let _ = gj;
                let tgt = pair.omega.atom_range(j, &grid);
                let mut row = vec![BigRational::zero(); n_sigma];
                for x in tgt {
                    if dge[x].is_zero() {
                        continue;
                    }
                    let weight = &dge[x] * &om[x];
                    for (y, slot) in row.iter_mut().enumerate() {
                        let diff = &sp[y] - &op[x];
                        *slot += &weight / diff;
                    }
                }
                te.push(row);
            }
            (sm, om, dfe, te)
        } else {
            (Vec::new(), Vec::new(), Vec::new(), Vec::new())
        };
        (
            Engine {
                pair,
                grid,
                supp_f,
                supp_g,
                df,
                dg,
                f_cg,
                g_cg,
                t,
                exact_on,
                sigma_mass,
                omega_mass,
                df_exact,
                t_exact,
            },
            defect_f,
            defect_g,
        )
    }

    /// `<H (window . D_I f), D_J g>` where the source window restricts the
    /// sigma atoms; `None` means all of `I`.
    fn windowed_value(
        &self,
        fi: usize,
        gj: usize,
        window: Option<std::ops::Range<usize>>,
    ) -> f64 {
        let i = self.supp_f[fi];
        let src = window.unwrap_or_else(|| self.pair.sigma.atom_range(i, &self.grid));
        let mut acc = 0.0;
        for y in src {
            acc += self.df[fi][y] * self.pair.sigma.mass_of(y) * self.t[gj][y];
        }
        acc
    }

    fn windowed_value_exact(
        &self,
        fi: usize,
        gj: usize,
        window: Option<std::ops::Range<usize>>,
    ) -> BigRational {
        let i = self.supp_f[fi];
        let src = window.unwrap_or_else(|| self.pair.sigma.atom_range(i, &self.grid));
        let mut acc = BigRational::zero();
        for y in src {
            if self.df_exact[fi][y].is_zero() || self.t_exact[gj][y].is_zero() {
                continue;
            }
            acc += &self.df_exact[fi][y] * &self.sigma_mass[y] * &self.t_exact[gj][y];
        }
        acc
    }

    /// `<H_sigma (window indicator), D_J g>` against a constant source
    /// weight.
    fn indicator_value(&self, window: std::ops::Range<usize>, gj: usize) -> f64 {
        let mut acc = 0.0;
        for y in window {
            acc += self.pair.sigma.mass_of(y) * self.t[gj][y];
        }
        acc
    }

    fn indicator_value_exact(&self, window: std::ops::Range<usize>, gj: usize) -> BigRational {
        let mut acc = BigRational::zero();
        for y in window {
            if self.t_exact[gj][y].is_zero() {
                continue;
            }
            acc += &self.sigma_mass[y] * &self.t_exact[gj][y];
        }
        acc
    }
}

/// Exact values of the child-good projection of `f`.
fn exact_projection(
    mu: &crate::grid::AtomicMeasure,
    masses: &[BigRational],
    grid: &Grid,
    f: &FunctionOnAtoms,
    support: &[DyadicInterval],
) -> Vec<BigRational> {
    let raw = exact::exact_values(f);
    let mut acc = vec![BigRational::zero(); mu.len()];
    for &i in support {
        let d = exact::exact_delta(mu, masses, grid, i, &raw);
        for (slot, v) in acc.iter_mut().zip(d) {
            *slot += v;
        }
    }
    acc
}

/// Full decomposition of the bilinear form for child-good projected
/// functions, against a stopping forest for `f`.
pub fn decompose(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    g: &FunctionOnAtoms,
    forest: &StoppingForest,
    mode: Arithmetic,
) -> Result<FormDecomposition> {
    check_disjoint(&pair.sigma, &pair.omega)?;
    let grid = pair.grid;
    if forest.top() != grid.top() {
        // The corona splits assume every frequency lies in some corona.
        return Err(Error::InvalidInput(
            "decompose needs a forest rooted at the top interval".into(),
        ));
    }
    let (engine, defect_f, defect_g) = Engine::new(pair, f, g, mode);
    verify_forest_controls(pair, f, forest)?;

    let nf = engine.supp_f.len();
    let ng = engine.supp_g.len();

    // Category accumulators (float always; exact mirrors in rational mode).
    let mut cat = [0.0f64; 6];
    let mut cat_exact = vec![BigRational::zero(); 6];
    let mut b_disj_long = 0.0;
    let mut b_disj_mid = 0.0;
    let mut b_home = 0.0;
    let mut b_neigh = 0.0;
    let mut b_diag = 0.0;
    let mut b_far = 0.0;
    let mut b_para = 0.0;
    let mut b_stop = 0.0;
    let mut home_exact = BigRational::zero();
    let mut neigh_exact = BigRational::zero();
    let mut below_exact = BigRational::zero();
    let mut diag_exact = BigRational::zero();
    let mut far_exact = BigRational::zero();
    let mut para_exact = BigRational::zero();
    let mut stop_exact = BigRational::zero();

    for fi in 0..nf {
        let i = engine.supp_f[fi];
        let f_top = forest.corona_top_index(i);
        for gj in 0..ng {
            let j = engine.supp_g[gj];
            let category = classify_pair(i, j, &grid);
            let value = engine.windowed_value(fi, gj, None);
            let cidx = match category {
                Category::Below => 0,
                Category::Above => 1,
                Category::Disjoint => 2,
                Category::DisjointDual => 3,
                Category::Comparable => 4,
                Category::ComparableDual => 5,
            };
            cat[cidx] += value;
            let value_exact = if engine.exact_on {
                let v = engine.windowed_value_exact(fi, gj, None);
                cat_exact[cidx] += &v;
                v
            } else {
                BigRational::zero()
            };
            match category {
                Category::Disjoint => {
                    // Long range: separated by more than the larger length.
                    let gap = i.gap_units(j, &grid) as f64 * grid.unit().to_f64();
                    if gap > i.len(&grid) {
                        b_disj_long += value;
                    } else {
                        b_disj_mid += value;
                    }
                }
                Category::Below => {
                    // Child of I containing J and its sibling.
                    let i_j = child_containing(&grid, i, j);
                    let theta = i_j.sibling().unwrap();
                    let home_window = pair.sigma.atom_range(i_j, &grid);
                    let neigh_window = pair.sigma.atom_range(theta, &grid);
                    let home_v = engine.windowed_value(fi, gj, Some(home_window.clone()));
                    let neigh_v = engine.windowed_value(fi, gj, Some(neigh_window.clone()));
                    b_home += home_v;
                    b_neigh += neigh_v;
                    let home_exact_v = if engine.exact_on {
                        let he = engine.windowed_value_exact(fi, gj, Some(home_window.clone()));
                        below_exact += &value_exact;
                        neigh_exact += engine.windowed_value_exact(fi, gj, Some(neigh_window));
                        home_exact += &he;
                        he
                    } else {
                        BigRational::zero()
                    };
                    // Corona co-membership split of the home part.
                    let g_top = forest.corona_top_index(j);
                    let same = f_top.is_some() && f_top == g_top;
                    if same {
                        b_diag += home_v;
                    } else {
                        b_far += home_v;
                    }
                    if engine.exact_on {
                        if same {
                            diag_exact += &home_exact_v;
                        } else {
                            far_exact += &home_exact_v;
                        }
                    }
                    if same {
                        // Paraproduct and stopping pieces: factor the child
                        // average of the difference and split the top
                        // indicator.
                        let fidx = f_top.unwrap();
                        let top = forest.tops()[fidx];
                        let e_ij = child_average(&engine, fi, i_j);
                        let top_range = pair.sigma.atom_range(top, &grid);
                        let para_v = e_ij * engine.indicator_value(top_range.clone(), gj);
                        b_para += para_v;
                        b_stop += home_v - para_v;
                        if engine.exact_on {
                            let e_exact = child_average_exact(&engine, fi, i_j);
                            let ind = engine.indicator_value_exact(top_range, gj);
                            let pe = e_exact * ind;
                            stop_exact += &home_exact_v - &pe;
                            para_exact += pe;
                        }
                    }
                }
                _ => {}
            }
        }
    }

    // Intertwining form and the direct boundary recomputation of
    // far - inter.
    let mut b_inter = 0.0;
    let mut boundary = 0.0;
    for (fidx, top) in forest.tops().iter().enumerate() {
        if fidx == 0 {
            continue; // the root has no strict ancestors in the grid
        }
        for fi in 0..nf {
            let i = engine.supp_f[fi];
            if !i.strictly_contains(*top) {
                continue;
            }
            let i_f = child_containing(&grid, i, *top);
            let window = pair.sigma.atom_range(i_f, &grid);
            for gj in 0..ng {
                let j = engine.supp_g[gj];
                if forest.corona_top_index(j) != Some(fidx) {
                    continue;
                }
                let v = engine.windowed_value(fi, gj, Some(window.clone()));
                b_inter += v;
                if !grid.deep_embedded(j, i, grid.tau) {
                    boundary -= v;
                }
            }
        }
    }

    let total = if engine.exact_on {
        exact::to_f64(&cat_exact.iter().sum::<BigRational>())
    } else {
        cat.iter().sum()
    };
    // Reference totals for the residuals.
    let full = crate::hilbert::bilinear_form(pair, &engine.f_cg, &engine.g_cg, None)?;
    let scale = 1.0_f64.max(cat.iter().map(|v| v.abs()).sum());
    let residuals = if engine.exact_on {
        // Exact reference via the kernel double sum of the projections.
        let sp = exact::exact_positions(&pair.sigma);
        let op = exact::exact_positions(&pair.omega);
        let fv = exact_projection(&pair.sigma, &engine.sigma_mass, &grid, f, &engine.supp_f);
        let gv = exact_projection(&pair.omega, &engine.omega_mass, &grid, g, &engine.supp_g);
        let a: Vec<(usize, BigRational)> = fv.into_iter().enumerate().collect();
        let b: Vec<(usize, BigRational)> = gv.into_iter().enumerate().collect();
        let full_exact = exact::exact_kernel_sum(
            pair,
            &sp,
            &engine.sigma_mass,
            &op,
            &engine.omega_mass,
            &a,
            &b,
        );
        let six = &cat_exact.iter().sum::<BigRational>() - &full_exact;
        let hn = &below_exact - &home_exact - &neigh_exact;
        let df_res = &home_exact - &diag_exact - &far_exact;
        let ps = &diag_exact - &para_exact - &stop_exact;
        let exact_zero =
            six.is_zero() && hn.is_zero() && df_res.is_zero() && ps.is_zero();
        Residuals {
            six_way: exact::magnitude(&six),
            home_neigh: exact::magnitude(&hn),
            diag_far: exact::magnitude(&df_res),
            para_stop: exact::magnitude(&ps),
            far_inter: ((b_far - b_inter) - boundary).abs() / scale,
            exact_zero,
        }
    } else {
        Residuals {
            six_way: (cat.iter().sum::<f64>() - full).abs() / scale,
            home_neigh: (cat[0] - b_home - b_neigh).abs() / scale,
            diag_far: (b_home - b_diag - b_far).abs() / scale,
            para_stop: (b_diag - b_para - b_stop).abs() / scale,
            far_inter: ((b_far - b_inter) - boundary).abs() / scale,
            exact_zero: false,
        }
    };

    Ok(FormDecomposition {
        total,
        b_below: cat[0],
        b_above: cat[1],
        b_disj: cat[2],
        b_disj_long,
        b_disj_mid,
        b_disj_dual: cat[3],
        b_comp: cat[4],
        b_comp_dual: cat[5],
        b_home,
        b_neigh,
        b_diag,
        b_far,
        b_para,
        b_stop,
        b_inter,
        far_minus_inter_direct: boundary,
        residuals,
        projection_defect_f: defect_f,
        projection_defect_g: defect_g,
    })
}

fn child_containing(grid: &Grid, i: DyadicInterval, j: DyadicInterval) -> DyadicInterval {
    debug_assert!(i.strictly_contains(j));
    let left = i.left_child(grid).unwrap();
    if left.contains(j) {
        left
    } else {
        i.right_child(grid).unwrap()
    }
}

fn child_average(engine: &Engine, fi: usize, child: DyadicInterval) -> f64 {
    let range = engine.pair.sigma.atom_range(child, &engine.grid);
    let mut mass = 0.0;
    let mut acc = 0.0;
    for y in range {
        mass += engine.pair.sigma.mass_of(y);
        acc += engine.df[fi][y] * engine.pair.sigma.mass_of(y);
    }
    if mass > 0.0 {
        acc / mass
    } else {
        0.0
    }
}

fn child_average_exact(engine: &Engine, fi: usize, child: DyadicInterval) -> BigRational {
    let range = engine.pair.sigma.atom_range(child, &engine.grid);
    let mut mass = BigRational::zero();
    let mut acc = BigRational::zero();
    for y in range {
        mass += &engine.sigma_mass[y];
        acc += &engine.df_exact[fi][y] * &engine.sigma_mass[y];
    }
    if mass.is_zero() {
        BigRational::zero()
    } else {
        acc / mass
    }
}

/// The forest must control corona averages of the function it was built
/// for: inside every corona, good intervals see at most four times the top
/// average of the mean-free part.
fn verify_forest_controls(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    forest: &StoppingForest,
) -> Result<()> {
    let grid = &pair.grid;
    for idx in 0..forest.tops().len() {
        let top = forest.tops()[idx];
        let top_mass = pair.sigma.interval_mass(top, grid);
        if top_mass <= 0.0 {
            continue;
        }
        let mean = {
            let mut acc = 0.0;
            for y in pair.sigma.atom_range(top, grid) {
                acc += f.value(y) * pair.sigma.mass_of(y);
            }
            acc / top_mass
        };
        let mut top_avg = 0.0;
        for y in pair.sigma.atom_range(top, grid) {
            top_avg += (f.value(y) - mean).abs() * pair.sigma.mass_of(y);
        }
        top_avg /= top_mass;
        if top_avg <= 0.0 {
            continue;
        }
        for i in forest.corona_intervals(idx) {
            if i == top || !grid.is_good(i) {
                continue;
            }
            let mass = pair.sigma.interval_mass(i, grid);
            if mass <= 0.0 {
                continue;
            }
            let mut avg = 0.0;
            for y in pair.sigma.atom_range(i, grid) {
                avg += (f.value(y) - mean).abs() * pair.sigma.mass_of(y);
            }
            avg /= mass;
            if avg > 4.0 * top_avg * (1.0 + 1e-9) {
                return Err(Error::NotAForestForF);
            }
        }
    }
    Ok(())
}

/// The stopping form of a forest, and its separated / top-only / no-top
/// split against a refinement.
#[derive(Debug, Clone, Copy)]
pub struct StoppingFormSplit {
    pub total: f64,
    pub separated: f64,
    pub separated_dual: f64,
    pub top_only: f64,
    pub no_top: f64,
}

/// `sum_F sum_{(I,J) in corona(F)^2, J deeply inside I}
///  (E_{I_J} D_I f) <H 1_{F minus I_J}, D_J g>`.
pub fn stopping_form_value(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    g: &FunctionOnAtoms,
    forest: &StoppingForest,
) -> Result<f64> {
    let split = stopping_form_split(pair, f, g, forest, forest)?;
    Ok(split.total)
}

/// Split the stopping form of `forest` by corona co-membership in the
/// `refinement` (which must contain the forest tops): pairs in distinct
/// refinement coronas are separated, pairs in one corona split by whether
/// the source interval is the corona top.
pub fn stopping_form_split(
    pair: &MeasurePair,
    f: &FunctionOnAtoms,
    g: &FunctionOnAtoms,
    forest: &StoppingForest,
    refinement: &StoppingForest,
) -> Result<StoppingFormSplit> {
    check_disjoint(&pair.sigma, &pair.omega)?;
    let grid = pair.grid;
    let (engine, _, _) = Engine::new(pair, f, g, Arithmetic::Float);
    let mut total = 0.0;
    let mut separated = 0.0;
    let mut separated_dual = 0.0;
    let mut top_only = 0.0;
    let mut no_top = 0.0;
    for fi in 0..engine.supp_f.len() {
        let i = engine.supp_f[fi];
        let fc = forest.corona_top_index(i);
        for gj in 0..engine.supp_g.len() {
            let j = engine.supp_g[gj];
            if !grid.deep_embedded(j, i, grid.tau) {
                continue;
            }
            if fc.is_none() || forest.corona_top_index(j) != fc {
                continue;
            }
            let top = forest.tops()[fc.unwrap()];
            let i_j = child_containing(&grid, i, j);
            let e_ij = child_average(&engine, fi, i_j);
            // <H 1_{F minus I_J}, D_J g> as a pure kernel sum.
            let top_range = pair.sigma.atom_range(top, &grid);
            let ij_range = pair.sigma.atom_range(i_j, &grid);
            let tgt = pair.omega.atom_range(j, &grid);
            let mut v = 0.0;
            for x in tgt {
                let xf = pair.omega.position_f64(x);
                let mut h = 0.0;
                for y in top_range.clone() {
                    if ij_range.contains(&y) {
                        continue;
                    }
                    h += pair.sigma.mass_of(y) / (pair.sigma.position_f64(y) - xf);
                }
                v += h * engine.dg[gj][x] * pair.omega.mass_of(x);
            }
            let term = e_ij * v;
            total += term;
            let a = refinement.corona_top_index(i);
            let b = refinement.corona_top_index(j);
            match (a, b) {
                (Some(ai), Some(bi)) if ai == bi => {
                    if refinement.tops()[ai] == i {
                        top_only += term;
                    } else {
                        no_top += term;
                    }
                }
                (Some(ai), Some(bi)) => {
                    let ta = refinement.tops()[ai];
                    let tb = refinement.tops()[bi];
                    if ta.strictly_contains(tb) {
                        separated += term;
                    } else {
                        separated_dual += term;
                    }
                }
                _ => separated += term,
            }
        }
    }
    Ok(StoppingFormSplit { total, separated, separated_dual, top_only, no_top })
}

/// One row of the bound table.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub index: usize,
    pub form: &'static str,
    pub form_value: f64,
    pub characteristics: Vec<String>,
    pub char_sum: f64,
    /// `|form| / (char_sum * f_norm * g_norm)`; zero denominators give 0
    /// (flagged) so that vanishing characteristics never hide a regression.
    pub ratio: f64,
    /// At least one referenced characteristic is a lower bound, making the
    /// ratio an upper estimate of the true one.
    pub upper_estimate: bool,
    pub zero_denominator: bool,
}

/// The nine per-form bound ratios.
pub fn bound_report(
    decomp: &FormDecomposition,
    reports: &BTreeMap<String, CharacteristicReport>,
    f_norm: f64,
    g_norm: f64,
) -> Result<Vec<BoundRow>> {
    let table: [(&'static str, f64, &[&str]); 9] = [
        ("comparable", decomp.b_comp, &["testing.quad_local", "muckenhoupt.offset_quad", "wbp"]),
        ("disjoint_long", decomp.b_disj_long, &["muckenhoupt.triple_quad"]),
        ("disjoint_long", decomp.b_disj_long, &["testing.quad_global"]),
        ("disjoint_mid", decomp.b_disj_mid, &["muckenhoupt.offset_quad"]),
        ("neighbour", decomp.b_neigh, &["muckenhoupt.offset_quad"]),
        (
            "far",
            decomp.b_far,
            &["testing.quad_local", "muckenhoupt.triple_quad", "muckenhoupt.punctured_scalar"],
        ),
        ("far", decomp.b_far, &["testing.quad_global"]),
        ("paraproduct", decomp.b_para, &["testing.quad_local"]),
        ("stopping", decomp.b_stop, &["testing.scalar_local"]),
    ];
    let mut rows = Vec::with_capacity(9);
    for (idx, (form, value, names)) in table.into_iter().enumerate() {
        let mut sum = 0.0;
        let mut upper = false;
        let mut list = Vec::new();
        for name in names {
            let report = reports
                .get(*name)
                .ok_or_else(|| Error::MissingCharacteristic((*name).into()))?;
            sum += report.value;
            upper |= report.mode == Mode::LowerBound;
            list.push((*name).to_string());
        }
        let den = sum * f_norm * g_norm;
        let (ratio, zero) = if den > 0.0 {
            (value.abs() / den, false)
        } else {
            (if value.abs() > 0.0 { f64::INFINITY } else { 0.0 }, true)
        };
        rows.push(BoundRow {
            index: idx + 1,
            form,
            form_value: value,
            characteristics: list,
            char_sum: sum,
            ratio,
            upper_estimate: upper,
            zero_denominator: zero,
        });
    }
    Ok(rows)
}
