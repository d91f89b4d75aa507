//! Primal active-set method for convex QPs with a diagonal Hessian:
//!
//! min ½ zᵀHz + gᵀz  s.t.  A z = b,  0 ≤ z ≤ u.
//!
//! Multipliers follow `Hz + g + Aᵀν = μ` with `μ_j ≥ 0` at a lower bound,
//! `μ_j ≤ 0` at an upper bound and `μ_j = 0` in between.

use num_traits::{One, Zero};

use crate::arith::{pivot_columns, solve_symmetric, Rational, SymmetricSolve};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Qp {
    pub hessian: Vec<Rational>,
    pub linear: Vec<Rational>,
    pub rows: Vec<Vec<(usize, Rational)>>,
    pub rhs: Vec<Rational>,
    pub upper: Vec<Option<Rational>>,
    /// Variables held at their start value.
    pub fixed: Vec<bool>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpPoint {
    pub z: Vec<Rational>,
    /// One multiplier per row; rows found redundant get zero.
    pub duals: Vec<Rational>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Free,
    Lower,
    Upper,
    Fixed,
}

impl Qp {
    pub(crate) fn num_vars(&self) -> usize {
        self.hessian.len()
    }

    fn dense_rows(&self, keep: &[usize]) -> Vec<Vec<Rational>> {
        let n = self.num_vars();
        keep.iter()
            .map(|&r| {
                let mut row = vec![Rational::zero(); n];
                for (j, a) in &self.rows[r] {
                    row[*j] += a;
                }
                row
            })
            .collect()
    }

    fn check_start(&self, z: &[Rational]) -> Result<()> {
        for (j, v) in z.iter().enumerate() {
            if v.is_negative() || self.upper[j].as_ref().is_some_and(|u| v > u) {
                return Err(Error::Internal(format!("QP start violates the bounds of variable {j}")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let a: Rational = row.iter().map(|(j, c)| c * &z[*j]).sum();
            if a != self.rhs[r] {
                return Err(Error::Internal(format!("QP start violates row {r}")));
            }
        }
        Ok(())
    }
}

/// Runs the active-set method from the feasible point `start`.
pub(crate) fn minimize(qp: &Qp, start: Vec<Rational>) -> Result<QpPoint> {
    qp.check_start(&start)?;
    let n = qp.num_vars();
    let mut z = start;
    let movable: Vec<usize> = (0..n).filter(|&j| !qp.fixed[j]).collect();

    // Rows that stay independent once fixed columns are removed.
    let all_rows: Vec<usize> = (0..qp.rows.len()).collect();
    let dense = qp.dense_rows(&all_rows);
    let transposed: Vec<Vec<Rational>> = movable.iter().map(|&j| dense.iter().map(|row| row[j].clone()).collect()).collect();
    let mut keep = pivot_columns(&transposed, &all_rows);
    keep.sort_unstable();
    let a = qp.dense_rows(&keep);
    let m = keep.len();

    let mut status: Vec<Status> = (0..n)
        .map(|j| {
            if qp.fixed[j] {
                Status::Fixed
            } else if z[j].is_zero() {
                Status::Lower
            } else if qp.upper[j].as_ref() == Some(&z[j]) {
                Status::Upper
            } else {
                Status::Free
            }
        })
        .collect();

    // Free enough bounded columns for the face to have full row rank.
    let mut order: Vec<usize> = movable.iter().copied().filter(|&j| status[j] == Status::Free).collect();
    order.extend(movable.iter().copied().filter(|&j| status[j] != Status::Free));
    for j in pivot_columns(&a, &order) {
        status[j] = Status::Free;
    }

    let guard = 64 * (n + m) + 1000;
    let mut pending_nu: Option<Vec<Rational>> = None;
    for _ in 0..guard {
        let grad: Vec<Rational> = (0..n).map(|j| &qp.hessian[j] * &z[j] + &qp.linear[j]).collect();

        let nu = match pending_nu.take() {
            Some(nu) => Some(nu),
            None => {
                let free: Vec<usize> = (0..n).filter(|&j| status[j] == Status::Free).collect();
                let nf = free.len();
                let dim = nf + m;
                let mut k = vec![vec![Rational::zero(); dim]; dim];
                let mut r = vec![Rational::zero(); dim];
                for (p, &j) in free.iter().enumerate() {
                    k[p][p] = qp.hessian[j].clone();
                    r[p] = -&grad[j];
                    for q in 0..m {
                        if !a[q][j].is_zero() {
                            k[p][nf + q] = a[q][j].clone();
                            k[nf + q][p] = a[q][j].clone();
                        }
                    }
                }
                match solve_symmetric(k, &r) {
                    SymmetricSolve::Solution(sol) => {
                        let delta = &sol[..nf];
                        let curvature: Rational =
                            free.iter().zip(delta).filter(|(_, d)| !d.is_zero()).map(|(&j, d)| &qp.hessian[j] * d * d).sum();
                        let nu = sol[nf..].to_vec();
                        if curvature.is_zero() {
                            Some(nu)
                        } else {
                            match ratio_test(qp, &z, &free, delta, true) {
                                None => {
                                    for (&j, d) in free.iter().zip(delta) {
                                        if !d.is_zero() {
                                            z[j] += d;
                                        }
                                    }
                                    pending_nu = Some(nu);
                                }
                                Some((alpha, j, st)) => {
                                    step(&mut z, &free, delta, &alpha);
                                    block(qp, &mut z, &mut status, j, st);
                                }
                            }
                            None
                        }
                    }
                    SymmetricSolve::Inconsistent(w) => {
                        let mut dir = w[..nf].to_vec();
                        let slope: Rational = free.iter().zip(&dir).map(|(&j, d)| &grad[j] * d).sum();
                        if slope.is_positive() {
                            for d in dir.iter_mut() {
                                *d = -&*d;
                            }
                        }
                        match ratio_test(qp, &z, &free, &dir, false) {
                            None => return Err(Error::Internal("QP objective unbounded below".into())),
                            Some((alpha, j, st)) => {
                                step(&mut z, &free, &dir, &alpha);
                                block(qp, &mut z, &mut status, j, st);
                            }
                        }
                        None
                    }
                }
            }
        };

        let Some(nu) = nu else { continue };
        // Stationary on the current face: check bound multipliers.
        let mut aty = vec![Rational::zero(); n];
        for (q, nq) in nu.iter().enumerate() {
            if nq.is_zero() {
                continue;
            }
            for j in 0..n {
                if !a[q][j].is_zero() {
                    aty[j] += &a[q][j] * nq;
                }
            }
        }
        let drop = (0..n).find(|&j| {
            let mu = &grad[j] + &aty[j];
            match status[j] {
                Status::Lower => mu.is_negative(),
                Status::Upper => mu.is_positive(),
                Status::Free | Status::Fixed => false,
            }
        });
        match drop {
            Some(j) => status[j] = Status::Free,
            None => {
                let mut duals = vec![Rational::zero(); qp.rows.len()];
                for (q, &r) in keep.iter().enumerate() {
                    duals[r] = nu[q].clone();
                }
                return Ok(QpPoint { z, duals });
            }
        }
    }
    Err(Error::Internal(format!("active-set iteration guard of {guard} exhausted")))
}

/// Largest step along `dir` (capped at 1 if `capped`) before a free variable
/// hits a bound. Returns the step, the blocking variable with least index
/// among ties, and the bound it hits.
fn ratio_test(
    qp: &Qp,
    z: &[Rational],
    free: &[usize],
    dir: &[Rational],
    capped: bool,
) -> Option<(Rational, usize, Status)> {
    let mut best: Option<(Rational, usize, Status)> = None;
    for (&j, d) in free.iter().zip(dir) {
        let (limit, st) = if d.is_negative() {
            (&z[j] / &(-d), Status::Lower)
        } else if d.is_positive() {
            match &qp.upper[j] {
                Some(u) => ((u - &z[j]) / d, Status::Upper),
                None => continue,
            }
        } else {
            continue;
        };
        if best.as_ref().is_none_or(|(t, _, _)| limit < *t) {
            best = Some((limit, j, st));
        }
    }
    match best {
        Some((t, _, _)) if capped && t >= Rational::one() => None,
        other => other,
    }
}

fn step(z: &mut [Rational], free: &[usize], dir: &[Rational], alpha: &Rational) {
    for (&j, d) in free.iter().zip(dir) {
        if !d.is_zero() {
            z[j] += d * alpha;
        }
    }
}

fn block(qp: &Qp, z: &mut [Rational], status: &mut [Status], j: usize, st: Status) {
    z[j] = match st {
        Status::Upper => qp.upper[j].clone().expect("upper bound"),
        _ => Rational::zero(),
    };
    status[j] = st;
}
