//! The two-value cyclical learning-rate schedule and its prescribed
//! parameters.
//!
//! A period of length `T` consists of `T - 1` stable steps at `eta_plus`
//! followed by one unstable step at `eta_minus`. The parameter derivations
//! guarantee that one full period contracts the residual by a fixed factor
//! even though the single large step may expand the upper-cluster
//! directions.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::spectra::ConditionNumbers;
use crate::util::fmt_g17;
use crate::Result;

/// Two-value periodic schedule: `eta_minus` on the last step of each period,
/// `eta_plus` on all others.
#[derive(Debug, Clone, PartialEq)]
pub struct ClrSchedule {
    period: usize,
    eta_plus: f64,
    eta_minus: f64,
}

impl ClrSchedule {
    pub fn new(period: usize, eta_plus: f64, eta_minus: f64) -> Result<Self> {
        if period <= 1 {
            return Err(Error::InvalidSchedule(format!("period {period} must be > 1")));
        }
        if !(eta_plus > 0.0) || !(eta_minus > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "rates must be positive, got eta_plus={eta_plus}, eta_minus={eta_minus}"
            )));
        }
        Ok(ClrSchedule {
            period,
            eta_plus,
            eta_minus,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn eta_plus(&self) -> f64 {
        self.eta_plus
    }

    pub fn eta_minus(&self) -> f64 {
        self.eta_minus
    }

    /// Learning rate at iteration `t`: the unstable step closes each period.
    pub fn rate_at(&self, t: usize) -> f64 {
        if t % self.period == self.period - 1 {
            self.eta_minus
        } else {
            self.eta_plus
        }
    }

    /// A schedule is unstable when its large rate exceeds the stability
    /// threshold `2 / L` of the problem it is applied to.
    pub fn is_unstable(&self, smoothness: f64) -> bool {
        self.eta_minus > 2.0 / smoothness
    }
}

impl fmt::Display for ClrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "clr T={} eta_plus={} eta_minus={}",
            self.period,
            fmt_g17(self.eta_plus),
            fmt_g17(self.eta_minus)
        )
    }
}

/// Learning-rate policy for a gradient-descent run.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    Cyclical(ClrSchedule),
}

impl Schedule {
    pub fn rate_at(&self, t: usize) -> f64 {
        match self {
            Schedule::Constant(eta) => *eta,
            Schedule::Cyclical(s) => s.rate_at(t),
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::Cyclical(s) => Some(s.period()),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant(eta) => write!(f, "constant eta={}", fmt_g17(*eta)),
            Schedule::Cyclical(s) => s.fmt(f),
        }
    }
}

/// Which contraction guarantee a parameter set was derived for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    LinearThm1,
    NonlinearThm2,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::LinearThm1 => "linear-thm1",
            Regime::NonlinearThm2 => "nonlinear-thm2",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-thm1" => Ok(Regime::LinearThm1),
            "nonlinear-thm2" => Ok(Regime::NonlinearThm2),
            other => Err(Error::InvalidArgument(format!(
                "unknown regime {other:?} (expected linear-thm1 or nonlinear-thm2)"
            ))),
        }
    }
}

/// Derived schedule parameters plus the guaranteed per-period contraction
/// factor at period boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub period: usize,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub contraction_base: f64,
    pub regime: Regime,
}

impl ScheduleParams {
    pub fn schedule(&self) -> ClrSchedule {
        ClrSchedule {
            period: self.period,
            eta_plus: self.eta_plus,
            eta_minus: self.eta_minus,
        }
    }

    /// Returns a copy with the period multiplied by `scale` (floored at 2).
    /// Useful for probing how much slack the period prescription has.
    pub fn with_period_scale(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidSchedule(format!(
                "period scale {scale} must be positive and finite"
            )));
        }
        let scaled = ((self.period as f64 * scale).ceil() as usize).max(2);
        Ok(ScheduleParams {
            period: scaled,
            ..self.clone()
        })
    }
}

impl fmt::Display for ScheduleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "T={} eta_plus={} eta_minus={} base={}",
            self.period,
            fmt_g17(self.eta_plus),
            fmt_g17(self.eta_minus),
            fmt_g17(self.contraction_base)
        )
    }
}

/// Smallest integer period that is > 1 and >= `x`.
fn minimal_period(x: f64) -> usize {
    x.ceil().max(2.0) as usize
}

/// Schedule parameters for exact least squares:
/// `T = ceil(kappa_plus * ln(2 kappa / (2 kappa_minus - 1)) + 1)`,
/// `eta_plus = 1/L`, `eta_minus = 1/(kappa_minus * mu)`, per-period base
/// `1 - 1/(2 kappa_minus)`. Logarithms are natural.
pub fn thm1_params(c: &ConditionNumbers) -> Result<ScheduleParams> {
    if c.kappa_plus < 1.0 || c.kappa_minus < 1.0 {
        return Err(Error::InvalidSchedule(format!(
            "local condition numbers must be >= 1, got kappa_plus={}, kappa_minus={}",
            c.kappa_plus, c.kappa_minus
        )));
    }
    let lower_bound = c.kappa_plus * (2.0 * c.kappa / (2.0 * c.kappa_minus - 1.0)).ln() + 1.0;
    Ok(ScheduleParams {
        period: minimal_period(lower_bound),
        eta_plus: 1.0 / c.smoothness,
        eta_minus: 1.0 / (c.kappa_minus * c.strong_convexity),
        contraction_base: 1.0 - 1.0 / (2.0 * c.kappa_minus),
        regime: Regime::LinearThm1,
    })
}

/// Schedule parameters for the nonlinear bimodal-Hessian setting:
/// `T = ceil(2 kappa_plus * ln(2L / (kappa_minus * mu)) + 1)`, same rates as
/// the linear case, per-period base `1 - 1/(4 kappa_minus)`.
pub fn thm2_params(
    kappa_plus: f64,
    kappa_minus: f64,
    smoothness: f64,
    strong_convexity: f64,
) -> Result<ScheduleParams> {
    if kappa_plus < 1.0 || kappa_minus < 1.0 {
        return Err(Error::InvalidSchedule(format!(
            "local condition numbers must be >= 1, got kappa_plus={kappa_plus}, kappa_minus={kappa_minus}"
        )));
    }
    if 2.0 * smoothness <= kappa_minus * strong_convexity {
        return Err(Error::InvalidSchedule(format!(
            "2L = {} <= kappa_minus * mu = {}: the period formula degenerates; \
             the problem does not need a cyclical schedule",
            2.0 * smoothness,
            kappa_minus * strong_convexity
        )));
    }
    let lower_bound =
        2.0 * kappa_plus * (2.0 * smoothness / (kappa_minus * strong_convexity)).ln() + 1.0;
    Ok(ScheduleParams {
        period: minimal_period(lower_bound),
        eta_plus: 1.0 / smoothness,
        eta_minus: 1.0 / (kappa_minus * strong_convexity),
        contraction_base: 1.0 - 1.0 / (4.0 * kappa_minus),
        regime: Regime::NonlinearThm2,
    })
}

/// The nonlinear guarantee holds when `4 eps <= min(1, kappa_minus / T) * mu`.
pub fn cross_smoothness_admissible(eps: f64, mu: f64, kappa_minus: f64, period: usize) -> bool {
    4.0 * eps <= (1.0f64).min(kappa_minus / period as f64) * mu
}

/// Smallest multiple of the period that is at least
/// `2 T kappa_minus ln(1/eps_target)` iterations, after which the residual
/// ratio is guaranteed to be below `eps_target`.
pub fn iterations_to_accuracy(
    params: &ScheduleParams,
    kappa_minus: f64,
    eps_target: f64,
) -> Result<usize> {
    if !(eps_target > 0.0 && eps_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps_target {eps_target} must lie in (0, 1)"
        )));
    }
    let periods_needed = 2.0 * kappa_minus * (1.0 / eps_target).ln();
    let periods = periods_needed.ceil().max(1.0) as usize;
    Ok(periods * params.period)
}
