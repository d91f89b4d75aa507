//! Exact arithmetic: rationals, first-order perturbations, linear solves and
//! coefficient bounds.

mod bounds;
mod lex;
mod linsolve;
mod rational;

pub use bounds::{ceil_log2, common_denominator, hadamard_bit_bound};
pub use lex::LexRational;
pub use linsolve::{kernel_vector, pivot_columns, solve_linear_system, solve_symmetric, LinearSolve, SymmetricSolve};
pub use rational::{rat, ParseRationalError, Rational};
