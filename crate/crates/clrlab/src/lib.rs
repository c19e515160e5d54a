//! clrlab - a desk-scale laboratory for two-rate cyclical learning-rate
//! schedules on problems with a bimodal Hessian spectrum.
//!
//! The library builds synthetic strongly convex problems whose Hessian
//! eigenvalues form two separated clusters, derives the schedule parameters
//! (period `T`, stable rate `eta_plus`, unstable rate `eta_minus`) that make
//! a per-period contraction provable, runs gradient descent and Nesterov
//! baselines against them, and verifies the predicted contraction factors
//! on the recorded traces.
//!
//! Modules:
//! - [`spectra`]: bimodal eigenvalue layouts and condition numbers
//! - [`problems`]: exact least-squares and log-cosh nonlinear testbeds
//! - [`schedules`]: the cyclical schedule and its prescribed parameters
//! - [`optimizers`]: schedule-driven GD and Nesterov AGD with full traces
//! - [`analysis`]: contraction bounds, bound verification, Hessian band estimates
//! - [`config`], [`svg`], [`cli`]: experiment configs, plotting, command surface

// Comparisons written as `!(x > 0.0)` are deliberate: they reject NaN,
// which the un-negated form would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod diff;
pub mod error;
pub mod linalg;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod spectra;
pub mod svg;
pub mod util;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
