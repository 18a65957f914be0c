//! Dense symmetric eigensolver used for exact `p = 2` operator norms.

/// Largest eigenvalue of a symmetric matrix by the cyclic Jacobi method.
///
/// Matrices here are small (one row per atom), so full quadratic-convergence
/// sweeps to machine precision are cheap and deterministic.
pub fn symmetric_max_eigenvalue(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    if n == 0 {
        return 0.0;
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-300 || off < 1e-30 * frobenius_sq(&a) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p][p];
                let aqq = a[q][q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        best = best.max(a[i][i]);
    }
    best
}

fn frobenius_sq(a: &[Vec<f64>]) -> f64 {
    a.iter().flat_map(|row| row.iter()).map(|x| x * x).sum()
}

/// Top singular value of a rectangular matrix via the Gram matrix.
pub fn top_singular_value(matrix: &[Vec<f64>]) -> f64 {
    let rows = matrix.len();
    if rows == 0 {
        return 0.0;
    }
    let cols = matrix[0].len();
    if cols == 0 {
        return 0.0;
    }
    // Work with the smaller Gram matrix of the two.
    let gram = if cols <= rows {
        let mut g = vec![vec![0.0; cols]; cols];
        for i in 0..cols {
            for j in i..cols {
                let mut s = 0.0;
                for row in matrix {
                    s += row[i] * row[j];
                }
                g[i][j] = s;
                g[j][i] = s;
            }
        }
        g
    } else {
        let mut g = vec![vec![0.0; rows]; rows];
        for i in 0..rows {
            for j in i..rows {
                let mut s = 0.0;
                for k in 0..cols {
                    s += matrix[i][k] * matrix[j][k];
                }
                g[i][j] = s;
                g[j][i] = s;
            }
        }
        g
    };
    symmetric_max_eigenvalue(&gram).max(0.0).sqrt()
}
