//! Crate error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("diverged at iteration {t}: residual {residual:e} exceeds guard {limit:e}")]
    Diverged { t: usize, residual: f64, limit: f64 },

    #[error(
        "Newton solver stalled after {steps} steps: |grad| = {grad_norm:e} > tolerance {tol:e}"
    )]
    NewtonStalled {
        steps: usize,
        grad_norm: f64,
        tol: f64,
    },

    #[error(
        "cross-smoothness inadmissible: 4*eps = {lhs:e} exceeds min(1, kappa_minus/T)*mu = {rhs:e} \
         for every usable period; reduce the coupling strength"
    )]
    InadmissibleCoupling { lhs: f64, rhs: f64 },

    #[error("trace is missing period boundary t={0}")]
    MissingBoundary(usize),

    #[error("initial residual is zero: relative ratios are undefined")]
    ZeroInitialResidual,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
