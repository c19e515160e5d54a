//! First-order optimizers with full residual traces.
//!
//! Both optimizers record, per iteration: the learning rate, the residual
//! norm `|theta_t - theta_star|`, its projections onto the upper subspace
//! and its complement (`a_norm`, `b_norm`), and the objective value. Rows at
//! period boundaries are always recorded regardless of `record_every`, since
//! every contraction claim is stated at `t mod T = 0`.

use nalgebra::DVector;

use crate::error::Error;
use crate::problems::Problem;
use crate::schedules::{ClrSchedule, Schedule};
use crate::util::{atomic_write, fmt_g17};
use crate::Result;

/// Residual growth factor beyond which a run is declared divergent. Unstable
/// steps legitimately overshoot within a period, so the guard sits far above
/// the per-period growth factor kappa / kappa_minus.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub max_iterations: usize,
    pub target_relative_residual: f64,
    pub record_every: usize,
    pub theta0: DVector<f64>,
}

impl RunConfig {
    /// Defaults: start at the origin, stop at 1e-8 relative residual or
    /// 200000 iterations, record every step.
    pub fn origin(dim: usize) -> Self {
        RunConfig {
            max_iterations: 200_000,
            target_relative_residual: 1e-8,
            record_every: 1,
            theta0: DVector::zeros(dim),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        if !(self.target_relative_residual > 0.0 && self.target_relative_residual <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target_relative_residual {} must lie in (0, 1]",
                self.target_relative_residual
            )));
        }
        if self.theta0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.theta0.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub eta: f64,
    pub residual: f64,
    pub a_norm: f64,
    pub b_norm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub optimizer: String,
    pub schedule: String,
    pub problem_hash: u64,
    pub seed: u64,
}

/// Per-iteration record of a single optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn initial_residual(&self) -> f64 {
        self.rows[0].residual
    }

    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("traces always hold the t=0 row")
    }

    pub fn row_at(&self, t: usize) -> Option<&TraceRow> {
        self.rows
            .binary_search_by_key(&t, |row| row.t)
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Earliest recorded iteration whose residual is at or below
    /// `rel * initial_residual`.
    pub fn iterations_to_target(&self, rel: f64) -> Option<usize> {
        let cutoff = rel * self.initial_residual();
        self.rows.iter().find(|row| row.residual <= cutoff).map(|row| row.t)
    }

    /// CSV with `#`-prefixed metadata lines and 17-significant-digit floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# optimizer: {}\n", self.meta.optimizer));
        out.push_str(&format!("# schedule: {}\n", self.meta.schedule));
        out.push_str(&format!("# problem: {:016x}\n", self.meta.problem_hash));
        out.push_str(&format!("# seed: {}\n", self.meta.seed));
        out.push_str("t,eta,residual,a_norm,b_norm,value\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.t,
                fmt_g17(row.eta),
                fmt_g17(row.residual),
                fmt_g17(row.a_norm),
                fmt_g17(row.b_norm),
                fmt_g17(row.value),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        atomic_write(path, &self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Runs `theta_{t+1} = theta_t - eta_t grad f(theta_t)` until the target
/// relative residual, the iteration cap, or the divergence guard fires.
pub fn gradient_descent<P: Problem + ?Sized>(
    problem: &P,
    schedule: &Schedule,
    cfg: &RunConfig,
) -> Result<Trace> {
    let name = match schedule {
        Schedule::Constant(_) => "GD",
        Schedule::Cyclical(_) => "CLR",
    };
    run_iteration(
        problem,
        cfg,
        name,
        &schedule.to_string(),
        schedule.period(),
        &|t| schedule.rate_at(t),
        |_t, eta, theta, problem| theta - eta * problem.gradient(theta),
    )
}

/// Constant-momentum Nesterov for strongly convex problems:
/// `y_t = theta_t + beta (theta_t - theta_{t-1})`,
/// `theta_{t+1} = y_t - (1/L) grad f(y_t)`, `beta = (sqrt(k)-1)/(sqrt(k)+1)`.
pub fn nesterov_agd<P: Problem + ?Sized>(
    problem: &P,
    smoothness: f64,
    strong_convexity: f64,
    cfg: &RunConfig,
) -> Result<Trace> {
    if !(strong_convexity > 0.0) || smoothness < strong_convexity {
        return Err(Error::InvalidArgument(format!(
            "need L >= mu > 0, got L={smoothness}, mu={strong_convexity}"
        )));
    }
    let kappa = smoothness / strong_convexity;
    let beta = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
    let eta = 1.0 / smoothness;
    let mut theta_prev = cfg.theta0.clone();
    run_iteration(
        problem,
        cfg,
        "AGD",
        &format!("agd beta={} eta={}", fmt_g17(beta), fmt_g17(eta)),
        None,
        &|_t| eta,
        move |_t, eta, theta, problem| {
            let y = theta + beta * (theta - &theta_prev);
            theta_prev = theta.clone();
            &y - eta * problem.gradient(&y)
        },
    )
}

/// Shared stepping loop. `rate_of` is the schedule (a row's `eta` column is
/// the rate the schedule assigns to that iteration index); `step` maps
/// `(t, eta_t, theta_t)` to `theta_{t+1}`. Rows are recorded at t = 0, every
/// `record_every` iterations, at every period boundary, and at the stopping
/// iteration.
fn run_iteration<P, F>(
    problem: &P,
    cfg: &RunConfig,
    optimizer: &str,
    schedule_desc: &str,
    period: Option<usize>,
    rate_of: &dyn Fn(usize) -> f64,
    mut step: F,
) -> Result<Trace>
where
    P: Problem + ?Sized,
    F: FnMut(usize, f64, &DVector<f64>, &P) -> DVector<f64>,
{
    cfg.validate(problem.dim())?;
    let theta_star = problem.theta_star().clone();
    let init = (&cfg.theta0 - &theta_star).norm();
    let guard = DIVERGENCE_GUARD * init;
    let cutoff = cfg.target_relative_residual * init;

    let mut rows: Vec<TraceRow> = Vec::new();
    let record = |rows: &mut Vec<TraceRow>, t: usize, theta: &DVector<f64>, residual: f64| {
        let (a_norm, b_norm) = problem.basis().component_norms(&(theta - &theta_star));
        rows.push(TraceRow {
            t,
            eta: rate_of(t),
            residual,
            a_norm,
            b_norm,
            value: problem.value(theta),
        });
    };

    let mut theta = cfg.theta0.clone();
    let mut residual = init;
    let mut t = 0;
    record(&mut rows, 0, &theta, residual);
    while residual > cutoff && t < cfg.max_iterations {
        if residual > guard {
            return Err(Error::Diverged {
                t,
                residual,
                limit: guard,
            });
        }
        let eta = rate_of(t);
        theta = step(t, eta, &theta, problem);
        t += 1;
        residual = (&theta - &theta_star).norm();
        let boundary = period.is_some_and(|p| t % p == 0);
        let stopping = residual <= cutoff || t >= cfg.max_iterations;
        if t % cfg.record_every == 0 || boundary || stopping {
            record(&mut rows, t, &theta, residual);
        }
    }
    Ok(Trace {
        meta: TraceMeta {
            optimizer: optimizer.to_string(),
            schedule: schedule_desc.to_string(),
            problem_hash: problem.config_hash(),
            seed: problem.seed(),
        },
        rows,
    })
}

#[cfg(test)]
impl Trace {
    /// Unit-test constructor for hand-built traces.
    pub(crate) fn synthetic_for_test(rows: Vec<TraceRow>) -> Trace {
        Trace {
            meta: TraceMeta {
                optimizer: "synthetic".into(),
                schedule: "synthetic".into(),
                problem_hash: 0,
                seed: 0,
            },
            rows,
        }
    }
}

/// Which optimizer to run in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Gd,
    Agd,
    Clr,
}

impl OptimizerKind {
    /// Legend label.
    pub fn label(&self) -> &'static str {
        match self {
            OptimizerKind::Gd => "GD",
            OptimizerKind::Agd => "AGD",
            OptimizerKind::Clr => "Unstable CLR",
        }
    }

    /// Short identifier used in file names and CLI flags.
    pub fn id(&self) -> &'static str {
        match self {
            OptimizerKind::Gd => "gd",
            OptimizerKind::Agd => "agd",
            OptimizerKind::Clr => "clr",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(OptimizerKind::Gd),
            "agd" => Ok(OptimizerKind::Agd),
            "clr" => Ok(OptimizerKind::Clr),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer {other:?} (expected gd, agd or clr)"
            ))),
        }
    }
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub kind: OptimizerKind,
    pub result: Result<Trace>,
}

/// Runs each requested optimizer from the same start on the same problem.
/// Per-optimizer failures are captured, not propagated.
pub fn compare_run<P: Problem + ?Sized>(
    problem: &P,
    kinds: &[OptimizerKind],
    clr: &ClrSchedule,
    cfg: &RunConfig,
) -> Vec<CompareOutcome> {
    let (smoothness, strong_convexity) = problem.smoothness_bounds();
    kinds
        .iter()
        .map(|&kind| {
            let result = match kind {
                OptimizerKind::Gd => {
                    gradient_descent(problem, &Schedule::Constant(1.0 / smoothness), cfg)
                }
                OptimizerKind::Agd => nesterov_agd(problem, smoothness, strong_convexity, cfg),
                OptimizerKind::Clr => {
                    gradient_descent(problem, &Schedule::Cyclical(clr.clone()), cfg)
                }
            }
            .map(|mut trace| {
                trace.meta.optimizer = kind.label().to_string();
                trace
            });
            CompareOutcome { kind, result }
        })
        .collect()
}
