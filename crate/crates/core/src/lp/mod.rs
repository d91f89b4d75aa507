//! Exact linear programming.

mod simplex;

use std::sync::atomic::{AtomicBool, Ordering};

use num_traits::Zero;

use crate::arith::Rational;

pub use simplex::solve_lp;

static TRACE: AtomicBool = AtomicBool::new(false);

/// Turns pivot tracing to stderr on or off for the whole process.
pub fn set_trace(on: bool) {
    TRACE.store(on, Ordering::Relaxed);
}

pub(crate) fn tracing() -> bool {
    TRACE.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

/// A sparse constraint row `Σ coeffs · x  (kind)  rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<(usize, Rational)>,
    pub kind: RowKind,
    pub rhs: Rational,
}

/// `opt cᵀx` subject to rows and per-variable bounds; `None` is infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub rows: Vec<Row>,
    pub lower: Vec<Option<Rational>>,
    pub upper: Vec<Option<Rational>>,
}

impl LinearProgram {
    /// All variables start in `[0, ∞)`.
    pub fn new(sense: Sense, objective: Vec<Rational>) -> LinearProgram {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            rows: Vec::new(),
            lower: vec![Some(Rational::zero()); n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, Rational)>, kind: RowKind, rhs: Rational) -> usize {
        self.rows.push(Row { coeffs, kind, rhs });
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<Rational>, upper: Option<Rational>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// `A_i · x` for row `i`.
    pub fn row_activity(&self, i: usize, x: &[Rational]) -> Rational {
        self.rows[i].coeffs.iter().map(|(j, a)| a * &x[*j]).sum()
    }

    /// `cᵀx`.
    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `Aᵀy`.
    pub fn transpose_times(&self, y: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.num_vars()];
        for (row, yi) in self.rows.iter().zip(y) {
            if yi.is_zero() {
                continue;
            }
            for (j, a) in &row.coeffs {
                out[*j] += a * yi;
            }
        }
        out
    }
}

/// Result of [`solve_lp`].
///
/// Duals are shadow prices: `dual[i]` is the rate of change of the optimal
/// objective per unit increase of `rows[i].rhs`, for either sense.
///
/// An infeasibility `certificate` `y` has `y_i ≥ 0` on `≤` rows and `y_i ≤ 0`
/// on `≥` rows, so every feasible `x` satisfies `yᵀAx ≤ yᵀb`, while the
/// minimum of `yᵀAx` over the variable box exceeds `yᵀb`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { primal: Vec<Rational>, dual: Vec<Rational>, objective: Rational },
    Infeasible { certificate: Vec<Rational> },
    /// `point` is feasible and `point + t·ray` stays feasible for all `t ≥ 0`
    /// while strictly improving the objective.
    Unbounded { point: Vec<Rational>, ray: Vec<Rational> },
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }
}
