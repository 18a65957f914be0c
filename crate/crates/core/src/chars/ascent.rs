//! Shared ascent machinery for lower-bound estimators.
//!
//! Every quadratic characteristic here is a supremum of a ratio
//! `N(x)^{1/p} / D(x)^{1/p}` of positively homogeneous functionals over a
//! finite-dimensional parameter.  The estimators run seeded multiplicative
//! or gradient ascent with restarts and report the best honestly evaluated
//! ratio, so every output is a valid lower bound regardless of convergence.

use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy)]
pub struct AscentConfig {
    pub restarts: u32,
    pub max_iterations: u32,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { restarts: 32, max_iterations: 10_000, tolerance: 1e-10, seed: 1 }
    }
}

impl AscentConfig {
    pub fn light(seed: u64) -> Self {
        AscentConfig { restarts: 4, max_iterations: 600, tolerance: 1e-10, seed }
    }
}

/// Ratio of two forms `sum_row w_row (sum_i b_i m[row][i])^{p/2}` in a
/// nonnegative coefficient vector `b` (squared family coefficients).
#[derive(Debug, Clone)]
pub struct QuadForm {
    /// Row weights (atom masses).
    pub weights: Vec<f64>,
    /// Per row, the sparse nonzero columns `(index, value)`; values are the
    /// squared family profiles at that atom.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub half_p: f64,
}

impl QuadForm {
    pub fn value(&self, b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (row, w) in self.rows.iter().zip(&self.weights) {
            let mut s = 0.0;
            for &(i, v) in row {
                s += b[i] * v;
            }
            if s > 0.0 {
                acc += s.powf(self.half_p) * w;
            }
        }
        acc
    }

    /// Gradient divided by `p/2` (the constant cancels in ratio updates).
    pub fn gradient(&self, b: &[f64], out: &mut [f64]) {
        for g in out.iter_mut() {
            *g = 0.0;
        }
        for (row, w) in self.rows.iter().zip(&self.weights) {
            let mut s = 0.0;
            for &(i, v) in row {
                s += b[i] * v;
            }
            if s > 0.0 {
                let factor = s.powf(self.half_p - 1.0) * w;
                for &(i, v) in row {
                    out[i] += factor * v;
                }
            }
        }
    }
}

/// Result of an ascent run.
#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub value: f64,
    pub argument: Vec<f64>,
    pub iterations: u64,
}

/// Maximize `(num(b)/den(b))^{1/p}` over `b >= 0` by multiplicative updates
/// with seeded restarts; single-column candidates are always scanned first,
/// which makes the estimator exact whenever the optimum concentrates on one
/// family member (as it does for every quadratic testing problem at p = 2).
pub fn quad_ratio_ascent(
    num: &QuadForm,
    den: &QuadForm,
    dim: usize,
    p: f64,
    config: &AscentConfig,
) -> AscentOutcome {
    let mut best = AscentOutcome { value: 0.0, argument: vec![0.0; dim], iterations: 0 };
    if dim == 0 {
        return best;
    }
    let ratio = |b: &[f64]| -> f64 {
        let d = den.value(b);
        if d <= 0.0 {
            return 0.0;
        }
        (num.value(b) / d).powf(1.0 / p)
    };
    // Vertex scan.
    let mut b = vec![0.0; dim];
    for i in 0..dim {
        b[i] = 1.0;
        let v = ratio(&b);
        if v > best.value {
            best.value = v;
            best.argument = b.clone();
        }
        b[i] = 0.0;
    }
    let mut iterations = 0u64;
    let mut rng = SplitMix64::new(config.seed);
    let mut gnum = vec![0.0; dim];
    let mut gden = vec![0.0; dim];
    for restart in 0..config.restarts {
        let mut b: Vec<f64> = if restart == 0 {
            vec![1.0; dim]
        } else {
            (0..dim).map(|_| rng.next_f64() + 1e-3).collect()
        };
        let mut current = ratio(&b);
        for _ in 0..config.max_iterations {
            iterations += 1;
            let n = num.value(&b);
            let d = den.value(&b);
            if n <= 0.0 || d <= 0.0 {
                break;
            }
            num.gradient(&b, &mut gnum);
            den.gradient(&b, &mut gden);
            // b_i <- b_i * (grad_N_i / N) / (grad_D_i / D): fixed points are
            // the stationary points of the ratio.
            let mut next = b.clone();
            let mut moved = false;
            for i in 0..dim {
                let push = gnum[i] / n;
                let pull = gden[i] / d;
                if pull > 0.0 && push >= 0.0 {
                    let factor = push / pull;
                    if factor.is_finite() {
                        next[i] = b[i] * factor;
                        moved = true;
                    }
                } else if push == 0.0 {
                    next[i] = 0.0;
                }
            }
            if !moved {
                break;
            }
            // Rescale to keep magnitudes sane; the ratio is scale invariant.
            let maxc = next.iter().cloned().fold(0.0_f64, f64::max);
            if maxc > 0.0 {
                for v in &mut next {
                    *v /= maxc;
                }
            }
            let nv = ratio(&next);
            if nv > best.value {
                best.value = nv;
                best.argument = next.clone();
            }
            let improved = nv - current;
            b = next;
            if improved.abs() < config.tolerance * current.abs().max(1e-30) {
                break;
            }
            current = nv;
        }
    }
    best.iterations = iterations;
    best
}

/// Generic projected gradient ascent on a smooth ratio `value(x)` with
/// gradient callback, keeping the best honestly evaluated iterate.
pub fn gradient_ascent(
    dim: usize,
    inits: &[Vec<f64>],
    value: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64], &mut [f64]),
    config: &AscentConfig,
) -> AscentOutcome {
    let mut best = AscentOutcome { value: 0.0, argument: vec![0.0; dim], iterations: 0 };
    if dim == 0 {
        return best;
    }
    let mut rng = SplitMix64::new(config.seed.wrapping_add(0x9e37));
    let mut starts: Vec<Vec<f64>> = inits.to_vec();
    while starts.len() < inits.len() + config.restarts as usize {
        starts.push((0..dim).map(|_| rng.next_gaussian()).collect());
    }
    let mut grad = vec![0.0; dim];
    let mut iterations = 0u64;
    for start in starts {
        let mut x = start;
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut x {
                *v /= norm;
            }
        } else {
            continue;
        }
        let mut current = value(&x);
        if current > best.value {
            best.value = current;
            best.argument = x.clone();
        }
        let mut step = 0.5;
        for _ in 0..config.max_iterations {
            iterations += 1;
            gradient(&x, &mut grad);
            let gnorm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm <= 1e-300 {
                break;
            }
            let mut advanced = false;
            for _ in 0..20 {
                let mut cand: Vec<f64> =
                    x.iter().zip(&grad).map(|(xi, gi)| xi + step * gi / gnorm).collect();
                let cnorm: f64 = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
                if cnorm > 0.0 {
                    for v in &mut cand {
                        *v /= cnorm;
                    }
                }
                let cv = value(&cand);
                if cv > current {
                    if cv > best.value {
                        best.value = cv;
                        best.argument = cand.clone();
                    }
                    let gain = cv - current;
                    x = cand;
                    current = cv;
                    advanced = true;
                    step *= 1.5;
                    if gain < config.tolerance * current.abs().max(1e-30) {
                        advanced = false;
                    }
                    break;
                }
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    best.iterations = iterations;
    best
}
