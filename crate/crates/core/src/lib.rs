//! Exact Wardrop equilibria and externality pricing on networks with
//! separable piecewise-affine travel times.

pub mod arith;
pub mod curve;
pub mod equilibrium;
pub mod error;
pub mod lp;
pub mod model;
pub mod pricing;

pub use error::{Error, Result};
