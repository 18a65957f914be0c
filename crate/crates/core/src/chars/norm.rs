//! Operator norm of the transform as a map `L^p(sigma) -> L^p(omega)`.

use super::{CharacteristicReport, Mode, Witness};
use crate::error::{Error, Result};
use crate::grid::MeasurePair;
use crate::linalg::top_singular_value;
use crate::rng::SplitMix64;
use crate::{conjugate, lp_norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMethod {
    /// Top singular value of the mass-weighted kernel matrix; `p = 2` only.
    ExactP2,
    /// Dense sphere search; at most three source atoms.
    BruteSmall,
    /// Alternating dual-vector power iteration with seeded restarts.
    Ascent { restarts: u32 },
}

const BRUTE_CAP: usize = 3;
const BRUTE_ACCURACY: f64 = 1e-3;

/// Kernel matrix row per omega atom: `sigma({y}) / (y - x)`.
fn kernel_matrix(pair: &MeasurePair) -> Vec<Vec<f64>> {
    let n_omega = pair.omega.len();
    let n_sigma = pair.sigma.len();
    let mut k = vec![vec![0.0; n_sigma]; n_omega];
    for i in 0..n_omega {
        let x = pair.omega.position_f64(i);
        for j in 0..n_sigma {
            k[i][j] = pair.sigma.mass_of(j) / (pair.sigma.position_f64(j) - x);
        }
    }
    k
}

fn apply(k: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
    k.iter().map(|row| row.iter().zip(f).map(|(a, b)| a * b).sum()).collect()
}

/// Adjoint pairing: `<Kf, g>_omega = <f, K* g>_sigma`.
fn apply_adjoint(pair: &MeasurePair, k: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let n_sigma = pair.sigma.len();
    let mut out = vec![0.0; n_sigma];
    for (i, row) in k.iter().enumerate() {
        let gw = g[i] * pair.omega.mass_of(i);
        for (j, slot) in out.iter_mut().enumerate() {
            // K[i][j] = sigma_j/(y_j - x_i); the adjoint divides the sigma
            // weight back out.
            *slot += row[j] / pair.sigma.mass_of(j) * gw;
        }
    }
    out
}

fn ratio(pair: &MeasurePair, k: &[Vec<f64>], f: &[f64], p: f64) -> f64 {
    let den = lp_norm(f, pair.sigma.masses(), p);
    if den <= 0.0 {
        return 0.0;
    }
    lp_norm(&apply(k, f), pair.omega.masses(), p) / den
}

pub fn operator_norm(pair: &MeasurePair, p: f64, method: NormMethod) -> Result<CharacteristicReport> {
    match method {
        NormMethod::ExactP2 => {
            if (p - 2.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "exact singular value method requires p = 2, got {p}"
                )));
            }
            let mut b = kernel_matrix(pair);
            for (i, row) in b.iter_mut().enumerate() {
                let wi = pair.omega.mass_of(i).sqrt();
                for (j, v) in row.iter_mut().enumerate() {
                    // Unweight the sigma mass, then weight both sides by
                    // square roots: B = sqrt(omega) K sqrt(sigma)^{-1} ... the
                    // matrix of the map between weighted little-l2 spaces.
                    *v = wi * *v / pair.sigma.mass_of(j).sqrt();
                }
            }
            let value = top_singular_value(&b);
            Ok(CharacteristicReport::exact("operator_norm.exact_p2", p, value, Witness::None))
        }
        NormMethod::BruteSmall => brute_small(pair, p),
        NormMethod::Ascent { restarts } => Ok(ascent(pair, p, restarts)),
    }
}

struct SearchState {
    best: f64,
    best_f: Vec<f64>,
}

impl SearchState {
    fn consider(&mut self, pair: &MeasurePair, k: &[Vec<f64>], p: f64, f: &[f64]) {
        let v = ratio(pair, k, f, p);
        if v > self.best {
            self.best = v;
            self.best_f = f.to_vec();
        }
    }
}

fn brute_small(pair: &MeasurePair, p: f64) -> Result<CharacteristicReport> {
    let n = pair.sigma.len();
    if n > BRUTE_CAP {
        return Err(Error::TooLarge { atoms: n, cap: BRUTE_CAP });
    }
    let k = kernel_matrix(pair);
    let mut state = SearchState { best: 0.0, best_f: vec![0.0; n] };
    match n {
        0 => {}
        1 => state.consider(pair, &k, p, &[1.0]),
        2 => {
            // Unit sphere of L^p(sigma) parametrized by the mass split s.
            let steps = 4000;
            for sign in [1.0, -1.0] {
                for si in 0..=steps {
                    let s = si as f64 / steps as f64;
                    let f = two_atom_point(pair, p, s, sign);
                    state.consider(pair, &k, p, &f);
                }
            }
            // Ternary refinement around the basin of the best sign.
            for sign in [1.0, -1.0] {
                let mut lo = 0.0_f64;
                let mut hi = 1.0_f64;
                for _ in 0..80 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    let f1 = two_atom_point(pair, p, m1, sign);
                    let f2 = two_atom_point(pair, p, m2, sign);
                    let v1 = ratio(pair, &k, &f1, p);
                    let v2 = ratio(pair, &k, &f2, p);
                    state.consider(pair, &k, p, &f1);
                    state.consider(pair, &k, p, &f2);
                    if v1 < v2 {
                        lo = m1;
                    } else {
                        hi = m2;
                    }
                }
            }
        }
        3 => {
            let steps = 160;
            for signs in [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [1.0, -1.0, -1.0]] {
                for i in 0..=steps {
                    for j in 0..=(steps - i) {
                        let s1 = i as f64 / steps as f64;
                        let s2 = j as f64 / steps as f64;
                        let f = three_atom_point(pair, p, s1, s2, signs);
                        state.consider(pair, &k, p, &f);
                    }
                }
            }
            // Coordinate-wise refinement from the grid optimum.
            let mut current = state.best_f.clone();
            for _ in 0..60 {
                for dim in 0..3 {
                    let mut lo = -1.0;
                    let mut hi = 1.0;
                    for _ in 0..40 {
                        let m1 = lo + (hi - lo) / 3.0;
                        let m2 = hi - (hi - lo) / 3.0;
                        let mut f1 = current.clone();
                        let mut f2 = current.clone();
                        f1[dim] = m1;
                        f2[dim] = m2;
                        let v1 = ratio(pair, &k, &f1, p);
                        let v2 = ratio(pair, &k, &f2, p);
                        state.consider(pair, &k, p, &f1);
                        state.consider(pair, &k, p, &f2);
                        if v1 < v2 {
                            lo = m1;
                        } else {
                            hi = m2;
                        }
                    }
                    current[dim] = (lo + hi) / 2.0;
                }
            }
        }
        _ => unreachable!(),
    }
    let (best, best_f) = (state.best, state.best_f);
    let mut report = CharacteristicReport {
        name: "operator_norm.brute_small".into(),
        p,
        value: best,
        mode: Mode::LowerBound,
        witness: Witness::FunctionValues(best_f),
        tolerance: Some(BRUTE_ACCURACY),
        seed: 0,
        iterations: 0,
        flags: Vec::new(),
    };
    report.flags.push("dense_search".into());
    Ok(report)
}

fn two_atom_point(pair: &MeasurePair, p: f64, s: f64, sign: f64) -> Vec<f64> {
    let m0 = pair.sigma.mass_of(0);
    let m1 = pair.sigma.mass_of(1);
    vec![(s / m0).powf(1.0 / p), sign * ((1.0 - s) / m1).powf(1.0 / p)]
}

fn three_atom_point(pair: &MeasurePair, p: f64, s1: f64, s2: f64, signs: [f64; 3]) -> Vec<f64> {
    let s3 = (1.0 - s1 - s2).max(0.0);
    let mut f = vec![0.0; 3];
    for (i, s) in [s1, s2, s3].into_iter().enumerate() {
        f[i] = signs[i] * (s / pair.sigma.mass_of(i)).powf(1.0 / p);
    }
    f
}

fn ascent(pair: &MeasurePair, p: f64, restarts: u32) -> CharacteristicReport {
    let k = kernel_matrix(pair);
    let n = pair.sigma.len();
    let q = conjugate(p);
    let mut best = 0.0_f64;
    let mut best_f = vec![0.0; n];
    let mut iterations = 0u64;
    let mut rng = SplitMix64::new(0x5eed);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        starts.push(e);
    }
    starts.push(vec![1.0; n]);
    for _ in 0..restarts {
        starts.push((0..n).map(|_| rng.next_gaussian()).collect());
    }
    for start in starts {
        let mut f = start;
        let norm = lp_norm(&f, pair.sigma.masses(), p);
        if norm <= 0.0 {
            continue;
        }
        for v in &mut f {
            *v /= norm;
        }
        let mut current = ratio(pair, &k, &f, p);
        if current > best {
            best = current;
            best_f = f.clone();
        }
        for _ in 0..200 {
            iterations += 1;
            // Nonlinear power iteration: dualize the image in L^p(omega),
            // pull back, dualize in L^{p'}(sigma).
            let u = apply(&k, &f);
            let g: Vec<f64> = u.iter().map(|v| v.abs().powf(p - 1.0) * v.signum()).collect();
            let z = apply_adjoint(pair, &k, &g);
            let mut fnext: Vec<f64> =
                z.iter().map(|v| v.abs().powf(q - 1.0) * v.signum()).collect();
            let nn = lp_norm(&fnext, pair.sigma.masses(), p);
            if nn <= 0.0 || !nn.is_finite() {
                break;
            }
            for v in &mut fnext {
                *v /= nn;
            }
            let value = ratio(pair, &k, &fnext, p);
            if value > best {
                best = value;
                best_f = fnext.clone();
            }
            let gain = value - current;
            f = fnext;
            if gain.abs() < 1e-12 * current.max(1e-30) {
                break;
            }
            current = value;
        }
    }
    let mut report = CharacteristicReport::lower_bound(
        "operator_norm.ascent",
        p,
        best,
        Witness::FunctionValues(best_f),
    );
    report.seed = 0x5eed;
    report.iterations = iterations;
    report
}

/// Direct evaluation of a stored ascent witness.
pub fn reevaluate_ascent(pair: &MeasurePair, report: &CharacteristicReport) -> Option<f64> {
    if let Witness::FunctionValues(f) = &report.witness {
        if f.len() != pair.sigma.len() {
            return None;
        }
        let k = kernel_matrix(pair);
        Some(ratio(pair, &k, f, report.p))
    } else {
        None
    }
}
