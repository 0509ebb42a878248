use thiserror::Error;

/// Errors raised by the solver and certifier toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("exponent p = {p} is not mass supercritical for N = {dim} (need p > {bound})")]
    Supercriticality { dim: usize, p: f64, bound: f64 },

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("residual {residual:e} above tolerance {tol:e} after {iterations} iterations")]
    Residual {
        residual: f64,
        tol: f64,
        iterations: usize,
    },

    #[error("mass constraint violated: |u|_2 = {mass}, expected {rho}")]
    MassConstraint { mass: f64, rho: f64 },

    #[error("certificate failed: {0}")]
    Certificate(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("search exceeded bounds: {0}")]
    SearchBounds(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
