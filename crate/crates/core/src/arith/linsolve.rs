//! Exact solving of square rational systems.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use super::Rational;
use crate::error::ArithError;

/// Result of [`solve_linear_system`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearSolve {
    Unique(Vec<Rational>),
    /// The matrix is singular; `kernel` is a nonzero vector with `A·kernel = 0`.
    Singular { kernel: Vec<Rational> },
}

fn check_square(a: &[Vec<Rational>], b: &[Rational]) -> Result<usize, ArithError> {
    let n = a.len();
    if b.len() != n {
        return Err(ArithError::Dimension(format!("matrix has {n} rows, rhs has {}", b.len())));
    }
    if let Some((i, row)) = a.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(ArithError::Dimension(format!("row {i} has {} entries, expected {n}", row.len())));
    }
    Ok(n)
}

/// Solves `A x = b` exactly.
///
/// Rows are scaled to integers and reduced with fraction-free (Bareiss)
/// elimination; the first nonzero entry of a column is taken as pivot.
pub fn solve_linear_system(a: &[Vec<Rational>], b: &[Rational]) -> Result<LinearSolve, ArithError> {
    let n = check_square(a, b)?;
    // Integer augmented matrix.
    let mut m: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let l = row.iter().chain(std::iter::once(rhs)).fold(BigInt::one(), |l, v| l.lcm(&v.denom()));
            row.iter()
                .chain(std::iter::once(rhs))
                .map(|v| v.numer() * (&l / v.denom()))
                .collect()
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&r| !m[r][k].is_zero()) else {
            return Ok(LinearSolve::Singular { kernel: kernel_vector(a).expect("rank deficient") });
        };
        m.swap(k, p);
        for i in k + 1..n {
            for j in k + 1..=n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let mut x = vec![Rational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = Rational::from_integer(m[i][n].clone());
        for j in i + 1..n {
            acc -= Rational::from_integer(m[i][j].clone()) * &x[j];
        }
        x[i] = acc / Rational::from_integer(m[i][i].clone());
    }
    Ok(LinearSolve::Unique(x))
}

/// Row echelon form over the rationals, skipping zero entries.
struct Echelon {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    /// `(row, column)` of each pivot.
    pivots: Vec<(usize, usize)>,
    ncols: usize,
}

impl Echelon {
    fn new(mut rows: Vec<Vec<Rational>>, mut rhs: Vec<Rational>, ncols: usize) -> Echelon {
        let nrows = rows.len();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..ncols {
            if r == nrows {
                break;
            }
            let Some(p) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else { continue };
            rows.swap(r, p);
            rhs.swap(r, p);
            let inv = rows[r][c].recip();
            let nz: Vec<usize> = (c..ncols).filter(|&j| !rows[r][j].is_zero()).collect();
            for j in &nz {
                rows[r][*j] *= &inv;
            }
            rhs[r] *= &inv;
            for i in r + 1..nrows {
                if rows[i][c].is_zero() {
                    continue;
                }
                let f = rows[i][c].clone();
                for &j in &nz {
                    let delta = &f * &rows[r][j];
                    rows[i][j] -= delta;
                }
                let delta = &f * &rhs[r];
                rhs[i] -= delta;
            }
            pivots.push((r, c));
            r += 1;
        }
        Echelon { rows, rhs, pivots, ncols }
    }

    fn consistent(&self) -> bool {
        self.rhs[self.pivots.len()..].iter().all(Zero::is_zero)
    }

    /// Back substitution with all free variables fixed to `free`.
    fn back_substitute(&self, rhs: &[Rational], free: &[Rational]) -> Vec<Rational> {
        let mut x = free.to_vec();
        for &(r, c) in self.pivots.iter().rev() {
            let mut acc = rhs[r].clone();
            for j in c + 1..self.ncols {
                if !self.rows[r][j].is_zero() && !x[j].is_zero() {
                    acc -= &self.rows[r][j] * &x[j];
                }
            }
            x[c] = acc;
        }
        x
    }

    fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.ncols];
        for &(_, c) in &self.pivots {
            is_pivot[c] = true;
        }
        (0..self.ncols).filter(|&c| !is_pivot[c]).collect()
    }

    fn kernel_basis_vector(&self, free_col: usize) -> Vec<Rational> {
        let mut free = vec![Rational::zero(); self.ncols];
        free[free_col] = Rational::one();
        let zeros = vec![Rational::zero(); self.rows.len()];
        self.back_substitute(&zeros, &free)
    }
}

/// Greedy column basis: scans columns in `order` and keeps each one that is
/// independent of those kept before it.
pub fn pivot_columns(a: &[Vec<Rational>], order: &[usize]) -> Vec<usize> {
    let permuted: Vec<Vec<Rational>> = a.iter().map(|row| order.iter().map(|&c| row[c].clone()).collect()).collect();
    let ech = Echelon::new(permuted, vec![Rational::zero(); a.len()], order.len());
    ech.pivots.iter().map(|&(_, c)| order[c]).collect()
}

/// A nonzero vector in the right kernel of `a`, if any.
pub fn kernel_vector(a: &[Vec<Rational>]) -> Option<Vec<Rational>> {
    let ncols = a.first().map_or(0, Vec::len);
    let ech = Echelon::new(a.to_vec(), vec![Rational::zero(); a.len()], ncols);
    ech.free_columns().first().map(|&f| ech.kernel_basis_vector(f))
}

/// Result of [`solve_symmetric`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymmetricSolve {
    /// Some solution of `K z = r` (free variables set to zero).
    Solution(Vec<Rational>),
    /// `K z = r` has no solution; `w` satisfies `K w = 0` and `wᵀ r ≠ 0`.
    Inconsistent(Vec<Rational>),
}

/// Solves `K z = r` for a symmetric, possibly singular `K`.
///
/// For symmetric `K` the kernel is also the left kernel, so an inconsistent
/// system always has a kernel basis vector that is not orthogonal to `r`.
pub fn solve_symmetric(k: Vec<Vec<Rational>>, r: &[Rational]) -> SymmetricSolve {
    let n = r.len();
    let ech = Echelon::new(k, r.to_vec(), n);
    if ech.consistent() {
        return SymmetricSolve::Solution(ech.back_substitute(&ech.rhs, &vec![Rational::zero(); n]));
    }
    for f in ech.free_columns() {
        let w = ech.kernel_basis_vector(f);
        let dot: Rational = w.iter().zip(r).filter(|(a, _)| !a.is_zero()).map(|(a, b)| a * b).sum();
        if !dot.is_zero() {
            return SymmetricSolve::Inconsistent(w);
        }
    }
    unreachable!("inconsistent symmetric system without a separating kernel vector")
}
