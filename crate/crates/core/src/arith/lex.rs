//! First-order symbolic perturbation `r + s·ε` with `ε → 0⁺`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_traits::Zero;

use super::Rational;
use crate::error::ArithError;

/// The pair `standard + epsilon·ε`, ordered lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct LexRational {
    pub standard: Rational,
    pub epsilon: Rational,
}

impl LexRational {
    pub fn new(standard: Rational, epsilon: Rational) -> Self {
        LexRational { standard, epsilon }
    }

    pub fn standard(standard: Rational) -> Self {
        LexRational { standard, epsilon: Rational::zero() }
    }

    /// `(r, s)·(r', s')`; fails when both perturbation parts are nonzero,
    /// since that would produce an `ε²` term.
    pub fn checked_mul(&self, other: &LexRational) -> Result<LexRational, ArithError> {
        if !self.epsilon.is_zero() && !other.epsilon.is_zero() {
            return Err(ArithError::SecondOrderPerturbation);
        }
        Ok(LexRational {
            standard: &self.standard * &other.standard,
            epsilon: &self.epsilon * &other.standard + &self.standard * &other.epsilon,
        })
    }

    pub fn scale(&self, k: &Rational) -> LexRational {
        LexRational { standard: &self.standard * k, epsilon: &self.epsilon * k }
    }

    pub fn is_zero(&self) -> bool {
        self.standard.is_zero() && self.epsilon.is_zero()
    }

    /// Strictly positive in the `ε → 0⁺` limit.
    pub fn is_positive(&self) -> bool {
        *self > LexRational::default()
    }
}

impl Ord for LexRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.standard.cmp(&other.standard).then_with(|| self.epsilon.cmp(&other.epsilon))
    }
}

impl PartialOrd for LexRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &LexRational {
    type Output = LexRational;
    fn add(self, rhs: &LexRational) -> LexRational {
        LexRational {
            standard: &self.standard + &rhs.standard,
            epsilon: &self.epsilon + &rhs.epsilon,
        }
    }
}

impl Sub for &LexRational {
    type Output = LexRational;
    fn sub(self, rhs: &LexRational) -> LexRational {
        LexRational {
            standard: &self.standard - &rhs.standard,
            epsilon: &self.epsilon - &rhs.epsilon,
        }
    }
}

impl Neg for &LexRational {
    type Output = LexRational;
    fn neg(self) -> LexRational {
        LexRational { standard: -&self.standard, epsilon: -&self.epsilon }
    }
}

impl fmt::Debug for LexRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}ε)", self.standard, self.epsilon)
    }
}
