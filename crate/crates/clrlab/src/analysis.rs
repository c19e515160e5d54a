//! Theoretical contraction bounds, verification against traces, and block
//! spectrum estimation.
//!
//! The verification contract is multiplicative: an observed residual ratio
//! passes when `ratio <= bound * (1 + 1e-8)`. The bounds hold in exact
//! arithmetic; the slack absorbs double-precision rounding over runs of up
//! to ~1e5 iterations.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::linalg::{operator_norm, sym_eig_range};
use crate::optimizers::Trace;
use crate::problems::Problem;
use crate::rng::Rng;
use crate::schedules::{Regime, ScheduleParams};
use crate::util::{atomic_write, fmt_g17};
use crate::Result;

/// Multiplicative slack applied to every bound comparison.
pub const BOUND_SLACK: f64 = 1e-8;

fn check_boundary(t: usize, period: usize) -> Result<()> {
    if period == 0 || !t.is_multiple_of(period) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} is not a multiple of the period {period}"
        )));
    }
    Ok(())
}

/// Linear-regression bound at a period boundary:
/// `(1 - 1/(2 kappa_minus))^(t/T)`.
pub fn thm1_bound(t: usize, period: usize, kappa_minus: f64) -> Result<f64> {
    check_boundary(t, period)?;
    let base = 1.0 - 1.0 / (2.0 * kappa_minus);
    Ok(base.powi((t / period) as i32))
}

/// Nonlinear bound at a period boundary:
/// `sqrt(2) * (1 - 1/(4 kappa_minus))^(t/T)`.
pub fn thm2_bound(t: usize, period: usize, kappa_minus: f64) -> Result<f64> {
    check_boundary(t, period)?;
    let base = 1.0 - 1.0 / (4.0 * kappa_minus);
    Ok(std::f64::consts::SQRT_2 * base.powi((t / period) as i32))
}

/// Which residual bound to check a trace against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundSpec {
    /// Per-period bound of the linear setting, checked at `t mod T = 0`.
    Thm1 { period: usize, kappa_minus: f64 },
    /// Per-period bound of the nonlinear setting, checked at `t mod T = 0`.
    Thm2 { period: usize, kappa_minus: f64 },
    /// Classical stable-rate guarantee `(1 - eta mu)^(t/2)` on residual
    /// norms (the square root of the squared-norm statement), checked at
    /// every recorded iteration.
    Prop1 { eta: f64, strong_convexity: f64 },
}

impl BoundSpec {
    /// The bound matching a derived parameter set.
    pub fn from_params(params: &ScheduleParams, kappa_minus: f64) -> Self {
        match params.regime {
            Regime::LinearThm1 => BoundSpec::Thm1 {
                period: params.period,
                kappa_minus,
            },
            Regime::NonlinearThm2 => BoundSpec::Thm2 {
                period: params.period,
                kappa_minus,
            },
        }
    }

    pub fn regime(&self) -> &'static str {
        match self {
            BoundSpec::Thm1 { .. } => "thm1",
            BoundSpec::Thm2 { .. } => "thm2",
            BoundSpec::Prop1 { .. } => "prop1",
        }
    }

    fn period(&self) -> Option<usize> {
        match self {
            BoundSpec::Thm1 { period, .. } | BoundSpec::Thm2 { period, .. } => Some(*period),
            BoundSpec::Prop1 { .. } => None,
        }
    }

    fn bound_at(&self, t: usize) -> Result<f64> {
        match *self {
            BoundSpec::Thm1 {
                period,
                kappa_minus,
            } => thm1_bound(t, period, kappa_minus),
            BoundSpec::Thm2 {
                period,
                kappa_minus,
            } => thm2_bound(t, period, kappa_minus),
            BoundSpec::Prop1 {
                eta,
                strong_convexity,
            } => Ok((1.0 - eta * strong_convexity).powf(0.5 * t as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Outcome of checking one trace against one bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub regime: &'static str,
    pub rows: Vec<BoundRow>,
    pub all_pass: bool,
    /// Largest observed `ratio / bound` over the checkpoints.
    pub max_violation: f64,
}

impl BoundReport {
    /// One-line summary, e.g. `PASS max_violation=6.91e-1`.
    pub fn summary(&self) -> String {
        format!(
            "{} max_violation={}",
            if self.all_pass { "PASS" } else { "FAIL" },
            fmt_g17(self.max_violation)
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# regime: {}\n", self.regime));
        out.push_str("t,ratio,bound,pass\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.t,
                fmt_g17(row.ratio),
                fmt_g17(row.bound),
                row.pass
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        atomic_write(path, &self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Checks the residual ratios of a trace against a bound at its checkpoints
/// (period boundaries, or every recorded row for the stable-rate bound).
pub fn verify_bound(trace: &Trace, spec: &BoundSpec) -> Result<BoundReport> {
    let init = trace.initial_residual();
    if init == 0.0 {
        return Err(Error::ZeroInitialResidual);
    }
    let final_t = trace.final_row().t;
    let mut rows = Vec::new();
    let mut all_pass = true;
    let mut max_violation: f64 = 0.0;

    let mut check = |t: usize, residual: f64| -> Result<()> {
        let ratio = residual / init;
        let bound = spec.bound_at(t)?;
        let pass = ratio <= bound * (1.0 + BOUND_SLACK);
        all_pass &= pass;
        max_violation = max_violation.max(ratio / bound);
        rows.push(BoundRow {
            t,
            ratio,
            bound,
            pass,
        });
        Ok(())
    };

    match spec.period() {
        Some(period) => {
            let mut t = 0;
            while t <= final_t {
                let row = trace.row_at(t).ok_or(Error::MissingBoundary(t))?;
                check(t, row.residual)?;
                t += period;
            }
        }
        None => {
            for row in trace.rows() {
                check(row.t, row.residual)?;
            }
        }
    }
    Ok(BoundReport {
        regime: spec.regime(),
        rows,
        all_pass,
        max_violation,
    })
}

/// The headline iteration-count asymptotic
/// `kappa_plus * kappa_minus * ln(kappa) * ln(1/eps)`; for reporting only.
pub fn required_iterations(
    kappa: f64,
    kappa_plus: f64,
    kappa_minus: f64,
    eps: f64,
) -> Result<f64> {
    if kappa_plus < 1.0 || kappa_minus < 1.0 || kappa < kappa_plus * kappa_minus {
        return Err(Error::InvalidArgument(format!(
            "need kappa >= kappa_plus * kappa_minus >= 1, got {kappa}, {kappa_plus}, {kappa_minus}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} must lie in (0, 1)")));
    }
    Ok(kappa_plus * kappa_minus * kappa.ln() * (1.0 / eps).ln())
}

/// Extreme eigenvalues of the Hessian blocks over sampled points, plus the
/// worst sampled cross-block operator norm.
///
/// Blocks are the compressions `B' H B` onto the stored orthonormal bases,
/// not the rank-deficient projected matrices, so the extremes are those of
/// the restriction to each subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBandEstimate {
    /// (min, max) eigenvalue of the upper-subspace block across samples.
    pub upper: (f64, f64),
    /// (min, max) eigenvalue of the complement block across samples.
    pub lower: (f64, f64),
    /// Largest sampled cross-block operator norm.
    pub cross_norm: f64,
    pub sample_count: usize,
}

/// Samples `n_samples` points uniformly in a ball of `sample_radius` around
/// the problem's minimizer and accumulates block-spectrum extrema.
pub fn estimate_hessian_bands<P: Problem + ?Sized>(
    problem: &P,
    n_samples: usize,
    sample_radius: f64,
    seed: u64,
) -> Result<HessianBandEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(sample_radius >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample radius {sample_radius} must be non-negative"
        )));
    }
    let p = problem.dim();
    let basis_upper = problem.basis().upper_matrix();
    let basis_lower = problem.basis().complement_matrix();
    let center = problem.theta_star().clone();
    let mut rng = Rng::seed_from_u64(seed);

    let mut upper = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lower = (f64::INFINITY, f64::NEG_INFINITY);
    let mut cross_norm: f64 = 0.0;
    for _ in 0..n_samples {
        let direction = rng.unit_vector(p);
        let radius = sample_radius * rng.next_f64().powf(1.0 / p as f64);
        let theta = &center + radius * direction;
        let hess: DMatrix<f64> = problem.hessian(&theta).ok_or_else(|| {
            Error::InvalidArgument("problem does not expose a Hessian oracle".into())
        })?;
        let (lo, hi) = sym_eig_range(basis_upper.transpose() * &hess * &basis_upper)?;
        upper = (upper.0.min(lo), upper.1.max(hi));
        let (lo, hi) = sym_eig_range(basis_lower.transpose() * &hess * &basis_lower)?;
        lower = (lower.0.min(lo), lower.1.max(hi));
        let cross = basis_upper.transpose() * &hess * &basis_lower;
        cross_norm = cross_norm.max(operator_norm(&cross)?);
    }
    Ok(HessianBandEstimate {
        upper,
        lower,
        cross_norm,
        sample_count: n_samples,
    })
}
