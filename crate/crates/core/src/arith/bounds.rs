//! Coefficient-size bounds used by termination arguments.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed};

use super::Rational;
use crate::error::ArithError;

/// Lower bound `(η·μ)^(−2η)` on the gap between two distinct values that
/// arise as ratios of determinants of `η×η` matrices with entries bounded by
/// `μ` in absolute value.
pub fn hadamard_bit_bound(max_abs_coeff: &Rational, dimension: usize) -> Result<Rational, ArithError> {
    if dimension == 0 {
        return Err(ArithError::Domain("dimension must be at least 1".into()));
    }
    if *max_abs_coeff < Rational::one() {
        return Err(ArithError::Domain(format!(
            "coefficient bound {max_abs_coeff} is below 1; scale coefficients to integers first"
        )));
    }
    let base = max_abs_coeff * Rational::from(dimension);
    let exp = 2 * dimension;
    Ok((0..exp).map(|_| base.clone()).product::<Rational>().recip())
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |l, v| l.lcm(&v.denom()))
}

/// `⌈log₂ x⌉` for `x > 0`.
pub fn ceil_log2(x: &Rational) -> i64 {
    assert!(x.is_positive(), "log of non-positive value");
    let (p, q) = (x.numer().abs(), x.denom());
    // 2^k ≥ p/q  ⇔  q·2^k ≥ p
    let mut k = p.bits() as i64 - q.bits() as i64 - 1;
    loop {
        let lhs = if k >= 0 { &q << (k as u64) } else { q.clone() };
        let rhs = if k >= 0 { p.clone() } else { &p << ((-k) as u64) };
        if lhs >= rhs {
            return k;
        }
        k += 1;
    }
}
