//! Exact rational arithmetic for the bilinear partition identities.
//!
//! Measure masses and function values are IEEE doubles, hence dyadic
//! rationals; kernel values `1/(y-x)` on dyadic positions are rational.  The
//! p-independent partition identities of the form decomposition are checked
//! here with `BigRational` arithmetic, where every residual is exactly zero.

use crate::grid::{AtomicMeasure, DyadicInterval, Grid, MeasurePair};
use crate::haar::FunctionOnAtoms;
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational value of a finite double.
pub fn big(x: f64) -> BigRational {
    assert!(x.is_finite());
    if x == 0.0 {
        return BigRational::zero();
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1.0 } else { 1.0 };
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = if exponent == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    let e = exponent - 1075; // value = mantissa * 2^e
    let m = BigInt::from(mantissa) * BigInt::from(sign as i64);
    if e >= 0 {
        BigRational::from_integer(m << (e as usize))
    } else {
        BigRational::new(m, BigInt::one() << ((-e) as usize))
    }
}

pub fn to_f64(x: &BigRational) -> f64 {
    use num_integer::Integer;
    if x.is_zero() {
        return 0.0;
    }
    let negative = x.numer().sign() == Sign::Minus;
    let num = x.numer().abs();
    let den = x.denom().clone();
    // Integer part plus a 64-bit binary expansion of the remainder; exact to
    // one unit in the 64th fractional bit regardless of operand size.
    let (q, r) = num.div_rem(&den);
    let qf = bigint_to_f64(&q);
    let shift = (den.bits() as i64 - r.bits() as i64).max(0) as usize + 64;
    let frac_bits = (r << shift) / &den;
    let frac = bigint_to_f64(&frac_bits) * (-(shift as f64)).exp2();
    let v = qf + frac;
    if negative {
        -v
    } else {
        v
    }
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    let (sign, digits) = x.to_u64_digits();
    let mut acc = 0.0f64;
    for d in digits.iter().rev() {
        acc = acc * 1.8446744073709552e19 + *d as f64;
    }
    if sign == Sign::Minus {
        -acc
    } else {
        acc
    }
}

/// Exact per-atom values of a function.
pub fn exact_values(f: &FunctionOnAtoms) -> Vec<BigRational> {
    f.values().iter().map(|v| big(*v)).collect()
}

pub fn exact_masses(mu: &AtomicMeasure) -> Vec<BigRational> {
    mu.masses().iter().map(|m| big(*m)).collect()
}

pub fn exact_positions(mu: &AtomicMeasure) -> Vec<BigRational> {
    (0..mu.len()).map(|i| mu.position(i).to_rational()).collect()
}

/// Exact martingale difference of `f` at `q` via child averages; zero when a
/// child carries no mass.
pub fn exact_delta(
    mu: &AtomicMeasure,
    masses: &[BigRational],
    grid: &Grid,
    q: DyadicInterval,
    values: &[BigRational],
) -> Vec<BigRational> {
    let n = mu.len();
    let mut out = vec![BigRational::zero(); n];
    if q.level >= grid.l {
        return out;
    }
    let left = q.left_child(grid).unwrap();
    let right = q.right_child(grid).unwrap();
    let lrange = mu.atom_range(left, grid);
    let rrange = mu.atom_range(right, grid);
    let sum_over = |r: std::ops::Range<usize>| -> (BigRational, BigRational) {
        let mut mass = BigRational::zero();
        let mut acc = BigRational::zero();
        for i in r {
            mass += &masses[i];
            acc += &values[i] * &masses[i];
        }
        (mass, acc)
    };
    let (lm, la) = sum_over(lrange.clone());
    let (rm, ra) = sum_over(rrange.clone());
    if lm.is_zero() || rm.is_zero() {
        return out;
    }
    let total_mass = &lm + &rm;
    let total_acc = &la + &ra;
    let parent_mean = &total_acc / &total_mass;
    let left_delta = &la / &lm - &parent_mean;
    let right_delta = &ra / &rm - &parent_mean;
    for i in lrange {
        out[i] = left_delta.clone();
    }
    for i in rrange {
        out[i] = right_delta.clone();
    }
    out
}

/// Exact kernel inner product
/// `sum_{y in src_window} sum_{x in tgt_window} a(y) sigma_y / (y - x) b(x) omega_x`.
#[allow(clippy::too_many_arguments)]
pub fn exact_kernel_sum(
    pair: &MeasurePair,
    sigma_pos: &[BigRational],
    sigma_mass: &[BigRational],
    omega_pos: &[BigRational],
    omega_mass: &[BigRational],
    a: &[(usize, BigRational)],
    b: &[(usize, BigRational)],
) -> BigRational {
    let _ = pair;
    let mut acc = BigRational::zero();
    for (y, av) in a {
        if av.is_zero() {
            continue;
        }
        let ya = av * &sigma_mass[*y];
        for (x, bv) in b {
            if bv.is_zero() {
                continue;
            }
            let diff = &sigma_pos[*y] - &omega_pos[*x];
            debug_assert!(!diff.is_zero());
            acc += &ya * bv * &omega_mass[*x] / diff;
        }
    }
    acc
}

/// Magnitude of a rational for residual reporting.
pub fn magnitude(x: &BigRational) -> f64 {
    to_f64(&x.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_roundtrip_is_exact() {
        for x in [0.1, -3.75, 1.0 / 3.0, 1e-20, 123456.789] {
            let r = big(x);
            assert!((to_f64(&r) - x).abs() <= f64::EPSILON * x.abs());
        }
        assert!(big(0.5) == BigRational::new(BigInt::from(1), BigInt::from(2)));
    }
}
