//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two fields or grids that must agree do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// A requested feature is outside the supported range.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A discrete linear system could not be factored.
    #[error("singular system at pivot {pivot} (|pivot| = {magnitude:e})")]
    Singular { pivot: usize, magnitude: f64 },
    /// The interface operator `T − S` is too small to invert.
    #[error("singular interface operator for mode {mode}: T - S = {value:e}")]
    SingularInterface { mode: usize, value: f64 },
    /// An iterate left the positive cone, so the linearization lost ellipticity.
    #[error("iterate {iteration} lost ellipticity or left the positive cone (margin {margin:e})")]
    ConeExit { iteration: usize, margin: f64 },
    /// An iterate produced a non-positive conformal factor.
    #[error("iterate {iteration} lost positivity (min u = {min_u:e})")]
    PositivityLoss { iteration: usize, min_u: f64 },
    /// The iteration budget was exhausted before reaching the tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIter { iterations: usize, residual: f64 },
    /// A fit or measurement had no usable data.
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
