use thiserror::Error;

/// Errors raised by the field, operator, solver and quadrature layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hermitian symmetry violated: imaginary residue {residue:e} exceeds {limit:e}")]
    Symmetry { residue: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("picard iteration did not converge after {iterations} iterations (last relative change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("quadrature failed: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
