//! Numerical laboratory for the σ_k-Yamabe equation on truncated cylinders.
//!
//! The crate assembles the fully nonlinear operator
//! `N(u) = σ_k(B_{g_u}) − C(n,k)((n−2k)/4k)^k u^{2kn/(n−2k)}` for conformal
//! factors on `ℝ × S^{n−1}` that depend on `t` and one polar angle, builds the
//! approximate neck solution `u_ε`, analyses its linearization mode by mode,
//! and drives a Newton iteration to an exact discrete solution.
//!
//! Module overview:
//!
//! * [`symfun`]: elementary symmetric functions, Newton transforms, cones.
//! * [`grid`]: uniform grids, exact rational stencils and zonal fields.
//! * [`schouten`]: the endomorphism `B` and the operator `N` on the cylinder.
//! * [`schwarzschild`]: the σ_k-Schwarzschild neck family.
//! * [`neck`]: cutoffs, the approximate solution `u_ε`, weights and norms.
//! * [`linop`]: analytic linearization, mode operators and decay rates.
//! * [`dtn`]: half-neck Dirichlet problems and Dirichlet-to-Neumann maps.
//! * [`solver`]: proper error, quadratic remainder and Newton schemes.
//! * [`models`]: product metrics and non-degeneracy scans.

// Comparisons are written as `!(x > 0.0)` so that NaN is rejected, and the
// banded kernels index several arrays with one loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
// Solve errors carry the full iteration history for diagnostics.
#![allow(clippy::result_large_err)]

pub mod banded;
pub mod dtn;
pub mod error;
pub mod fit;
pub mod grid;
pub mod linop;
pub mod models;
pub mod neck;
pub mod quadrature;
pub mod scalar;
pub mod schouten;
pub mod schwarzschild;
pub mod solver;
pub mod symfun;

pub use error::{Error, Result};
pub use scalar::Real;
