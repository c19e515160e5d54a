//! Command implementations behind the `clrlab` binary.
//!
//! Exit-code contract: 0 = success and bounds pass, 1 = numerical failure or
//! bound violation, 2 = usage/config error.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::analysis::{required_iterations, verify_bound, BoundReport, BoundSpec};
use crate::config::ExperimentConfig;
use crate::error::Error;
use crate::optimizers::{
    compare_run, gradient_descent, CompareOutcome, OptimizerKind, RunConfig, Trace,
};
use crate::problems::{
    build_nonlinear, build_quadratic, choose_admissible_coupling, GradientOracle, Problem,
    QuadraticProblem, NonlinearProblem, SubspaceBasis, ThetaStarMode,
};
use crate::schedules::{thm1_params, thm2_params, Regime, Schedule, ScheduleParams};
use crate::spectra::{make_bimodal_spectrum, Spectrum};
use crate::svg::{emit_svg, write_svg, Panel};
use crate::util::atomic_write;
use crate::Result;

/// Maps errors onto the exit-code contract.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::InvalidLayout(_)
        | Error::InvalidSpectrum(_)
        | Error::InvalidSchedule(_)
        | Error::DimensionMismatch { .. }
        | Error::InadmissibleCoupling { .. } => 2,
        Error::Diverged { .. }
        | Error::NewtonStalled { .. }
        | Error::MissingBoundary(_)
        | Error::ZeroInitialResidual
        | Error::Io { .. } => 1,
    }
}

/// Either problem family behind one `Problem` facade.
pub enum BuiltProblem {
    Quadratic(QuadraticProblem),
    Nonlinear(NonlinearProblem),
}

impl GradientOracle for BuiltProblem {
    fn dim(&self) -> usize {
        match self {
            BuiltProblem::Quadratic(p) => p.dim(),
            BuiltProblem::Nonlinear(p) => p.dim(),
        }
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        match self {
            BuiltProblem::Quadratic(p) => p.value(theta),
            BuiltProblem::Nonlinear(p) => p.value(theta),
        }
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            BuiltProblem::Quadratic(p) => p.gradient(theta),
            BuiltProblem::Nonlinear(p) => p.gradient(theta),
        }
    }

    fn hessian(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self {
            BuiltProblem::Quadratic(p) => p.hessian(theta),
            BuiltProblem::Nonlinear(p) => p.hessian(theta),
        }
    }
}

impl Problem for BuiltProblem {
    fn theta_star(&self) -> &DVector<f64> {
        match self {
            BuiltProblem::Quadratic(p) => p.theta_star(),
            BuiltProblem::Nonlinear(p) => p.theta_star(),
        }
    }

    fn basis(&self) -> &SubspaceBasis {
        match self {
            BuiltProblem::Quadratic(p) => p.basis(),
            BuiltProblem::Nonlinear(p) => p.basis(),
        }
    }

    fn smoothness_bounds(&self) -> (f64, f64) {
        match self {
            BuiltProblem::Quadratic(p) => p.smoothness_bounds(),
            BuiltProblem::Nonlinear(p) => p.smoothness_bounds(),
        }
    }

    fn config_hash(&self) -> u64 {
        match self {
            BuiltProblem::Quadratic(p) => p.config_hash(),
            BuiltProblem::Nonlinear(p) => p.config_hash(),
        }
    }

    fn seed(&self) -> u64 {
        match self {
            BuiltProblem::Quadratic(p) => p.seed(),
            BuiltProblem::Nonlinear(p) => p.seed(),
        }
    }
}

/// A problem plus its derived schedule, ready to run.
pub struct Prepared {
    pub problem: BuiltProblem,
    pub spectrum: Spectrum,
    /// Parameters exactly as the derivation prescribes.
    pub prescribed: ScheduleParams,
    /// Parameters after `period_scale` and manual overrides.
    pub effective: ScheduleParams,
    pub kappa_minus: f64,
    /// Non-empty when the effective schedule deviates from the prescription,
    /// in which case bound checks are skipped.
    pub schedule_issues: Vec<String>,
}

fn rel_differs(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-12 * b.abs().max(1.0)
}

/// Builds the problem and schedule a config describes. `spectrum_override`
/// replaces the generated layout (the `--spectrum-file` path).
pub fn prepare(config: &ExperimentConfig, spectrum_override: Option<&Spectrum>) -> Result<Prepared> {
    config.validate()?;
    let spectrum = match spectrum_override {
        Some(s) => s.clone(),
        None => make_bimodal_spectrum(&config.layout(), config.seed)?,
    };

    let (problem, prescribed, kappa_minus) = if config.nonlinear {
        if config.regime != Regime::NonlinearThm2 {
            return Err(Error::Config(
                "nonlinear problems require regime=nonlinear-thm2".into(),
            ));
        }
        let c = if config.coupling_c > 0.0 {
            config.coupling_c
        } else {
            choose_admissible_coupling(&spectrum, config.coupling_m, config.seed, 0.5)?
        };
        let problem = build_nonlinear(&spectrum, config.coupling_m, c, config.seed)?;
        let b = *problem.analytic_bounds();
        let params = thm2_params(b.kappa_plus, b.kappa_minus, b.smoothness, b.strong_convexity)?;
        (BuiltProblem::Nonlinear(problem), params, b.kappa_minus)
    } else {
        let problem =
            build_quadratic(&spectrum, config.rotation, ThetaStarMode::RandomUnit, config.seed)?;
        let conds = spectrum.condition_numbers();
        let params = match config.regime {
            Regime::LinearThm1 => thm1_params(&conds)?,
            Regime::NonlinearThm2 => thm2_params(
                conds.kappa_plus,
                conds.kappa_minus,
                conds.smoothness,
                conds.strong_convexity,
            )?,
        };
        (BuiltProblem::Quadratic(problem), params, conds.kappa_minus)
    };

    let mut effective = prescribed.with_period_scale(config.period_scale)?;
    if let Some(t) = config.override_period {
        effective.period = t;
    }
    if let Some(v) = config.override_eta_plus {
        effective.eta_plus = v;
    }
    if let Some(v) = config.override_eta_minus {
        effective.eta_minus = v;
    }

    let mut schedule_issues = Vec::new();
    if effective.period < prescribed.period {
        schedule_issues.push(format!(
            "period T={} is below the prescribed minimum {}",
            effective.period, prescribed.period
        ));
    }
    if rel_differs(effective.eta_plus, prescribed.eta_plus) {
        schedule_issues.push(format!(
            "eta_plus={} differs from the prescribed 1/L={}",
            effective.eta_plus, prescribed.eta_plus
        ));
    }
    if rel_differs(effective.eta_minus, prescribed.eta_minus) {
        schedule_issues.push(format!(
            "eta_minus={} differs from the prescribed 1/(kappa_minus mu)={}",
            effective.eta_minus, prescribed.eta_minus
        ));
    }

    Ok(Prepared {
        problem,
        spectrum,
        prescribed,
        effective,
        kappa_minus,
        schedule_issues,
    })
}

fn run_config(config: &ExperimentConfig, dim: usize) -> RunConfig {
    RunConfig {
        max_iterations: config.max_iterations,
        target_relative_residual: config.target,
        record_every: config.record_every,
        theta0: DVector::zeros(dim),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn fmt_kappa(kappa: f64) -> String {
    if (kappa - kappa.round()).abs() < 1e-9 && kappa < 1e15 {
        format!("{}", kappa.round() as i64)
    } else {
        format!("{kappa:.4}")
    }
}

/// Builds the problem, runs schedule-driven gradient descent, writes
/// `trace.csv` and `bound_report.csv`, and checks the contraction bound.
pub fn cmd_run(config: &ExperimentConfig, spectrum_override: Option<&Spectrum>) -> i32 {
    match run_inner(config, spectrum_override) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("clrlab run: {e}");
            exit_code_for(&e)
        }
    }
}

fn run_inner(config: &ExperimentConfig, spectrum_override: Option<&Spectrum>) -> Result<i32> {
    let prepared = prepare(config, spectrum_override)?;
    ensure_dir(&config.out_dir)?;
    let cfg = run_config(config, prepared.problem.dim());
    let schedule = Schedule::Cyclical(prepared.effective.schedule());
    let trace = gradient_descent(&prepared.problem, &schedule, &cfg)?;
    trace.write_csv(&config.out_dir.join("trace.csv"))?;
    println!("{}", prepared.effective);

    let (smoothness, _) = prepared.problem.smoothness_bounds();
    if !prepared.effective.schedule().is_unstable(smoothness) {
        eprintln!(
            "note: eta_minus={} does not exceed 2/L={}, schedule is stable",
            prepared.effective.eta_minus,
            2.0 / smoothness
        );
    }

    let mut bound_report: Option<BoundReport> = None;
    let exit = if prepared.schedule_issues.is_empty() {
        let spec = BoundSpec::from_params(&prepared.effective, prepared.kappa_minus);
        let report = verify_bound(&trace, &spec)?;
        report.write_csv(&config.out_dir.join("bound_report.csv"))?;
        println!("{}", report.summary());
        if matches!(spec, BoundSpec::Thm2 { .. }) {
            // The sqrt(2) prefactor looks loose (the bound exceeds 1 at
            // t=0); report whether the bare base would have sufficed.
            let tighter_holds = report.rows.iter().all(|row| {
                row.ratio <= row.bound / std::f64::consts::SQRT_2 * (1.0 + 1e-8)
            });
            println!(
                "observation: bound without the sqrt(2) factor {}",
                if tighter_holds { "also holds" } else { "is violated" }
            );
        }
        let pass = report.all_pass;
        bound_report = Some(report);
        if pass {
            0
        } else {
            1
        }
    } else {
        for issue in &prepared.schedule_issues {
            eprintln!("warning: {issue}");
        }
        eprintln!("warning: bound check skipped (theorem preconditions unmet)");
        0
    };

    if config.emit_svg {
        let conds = prepared.spectrum.condition_numbers();
        emit_svg(
            &format!("kappa={} CLR run", fmt_kappa(conds.kappa)),
            &[&trace],
            bound_report.as_ref(),
            &config.out_dir.join("run.svg"),
        )?;
    }
    Ok(exit)
}

/// Runs the requested optimizers from the same start, writes one CSV per
/// optimizer plus `compare.svg`.
pub fn cmd_compare(config: &ExperimentConfig, kinds: &[OptimizerKind]) -> i32 {
    match compare_inner(config, kinds) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("clrlab compare: {e}");
            exit_code_for(&e)
        }
    }
}

fn compare_outcomes(
    config: &ExperimentConfig,
    kinds: &[OptimizerKind],
    dir: &Path,
) -> Result<(Vec<CompareOutcome>, Panel, String)> {
    let prepared = prepare(config, None)?;
    ensure_dir(dir)?;
    let cfg = run_config(config, prepared.problem.dim());
    let outcomes = compare_run(
        &prepared.problem,
        kinds,
        &prepared.effective.schedule(),
        &cfg,
    );

    let mut traces: Vec<&Trace> = Vec::new();
    let mut notes = Vec::new();
    for outcome in &outcomes {
        match &outcome.result {
            Ok(trace) => {
                trace.write_csv(&dir.join(format!("{}.csv", outcome.kind.id())))?;
                traces.push(trace);
            }
            Err(e) => notes.push(format!("{}: {e}", outcome.kind.label())),
        }
    }
    let conds = prepared.spectrum.condition_numbers();
    let title = format!("kappa={}", fmt_kappa(conds.kappa));
    let mut panel = Panel::from_traces(&title, &traces, None);
    panel.notes = notes;
    Ok((outcomes, panel, title))
}

fn compare_inner(config: &ExperimentConfig, kinds: &[OptimizerKind]) -> Result<i32> {
    let (outcomes, panel, _) = compare_outcomes(config, kinds, &config.out_dir)?;
    if config.emit_svg && !panel.series.is_empty() {
        write_svg(
            std::slice::from_ref(&panel),
            1,
            &config.out_dir.join("compare.svg"),
        )?;
    }
    let mut failed = false;
    for outcome in &outcomes {
        match &outcome.result {
            Ok(trace) => {
                let hit = trace.iterations_to_target(config.target);
                match hit {
                    Some(t) => println!("{}: reached target at t={t}", outcome.kind.label()),
                    None => println!(
                        "{}: target not reached within {} iterations",
                        outcome.kind.label(),
                        config.max_iterations
                    ),
                }
            }
            Err(e) => {
                failed = true;
                eprintln!("{}: {e}", outcome.kind.label());
            }
        }
    }
    Ok(if failed { 1 } else { 0 })
}

/// One comparison per condition number with the Figure-style intervals
/// [1,2] and [kappa/2, kappa]; writes per-panel CSVs, a summary CSV and a
/// two-column SVG grid.
pub fn cmd_sweep(config: &ExperimentConfig, kappas: &[f64]) -> i32 {
    match sweep_inner(config, kappas) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("clrlab sweep: {e}");
            exit_code_for(&e)
        }
    }
}

fn sweep_inner(config: &ExperimentConfig, kappas: &[f64]) -> Result<i32> {
    if kappas.is_empty() {
        return Err(Error::Config("sweep needs at least one kappa".into()));
    }
    // The lower cluster [1,2] fixes kappa_minus = 2; the unstable regime
    // needs kappa > 2 * kappa_minus.
    for &kappa in kappas {
        if !(kappa > 4.0) {
            return Err(Error::Config(format!(
                "kappa = {kappa} must exceed 2 * kappa_minus = 4 for the sweep layout"
            )));
        }
    }
    ensure_dir(&config.out_dir)?;
    let kinds = [OptimizerKind::Gd, OptimizerKind::Agd, OptimizerKind::Clr];
    let mut panels = Vec::new();
    let mut summary = String::from("kappa,optimizer,iters_to_target\n");
    let mut failed = false;
    for &kappa in kappas {
        let sub = config.clone().with_kappa(kappa);
        let dir = config.out_dir.join(format!("kappa_{}", fmt_kappa(kappa)));
        let (outcomes, panel, title) = compare_outcomes(&sub, &kinds, &dir)?;
        let mut line = format!("{title}:");
        for outcome in &outcomes {
            let iters = match &outcome.result {
                Ok(trace) => trace
                    .iterations_to_target(config.target)
                    .unwrap_or(config.max_iterations),
                Err(e) => {
                    failed = true;
                    eprintln!("{title} {}: {e}", outcome.kind.label());
                    config.max_iterations
                }
            };
            summary.push_str(&format!(
                "{},{},{iters}\n",
                fmt_kappa(kappa),
                outcome.kind.id()
            ));
            line.push_str(&format!(" {}={iters}", outcome.kind.id()));
        }
        // Reference: the headline asymptotic for the cyclical schedule.
        let conds = make_bimodal_spectrum(&sub.layout(), sub.seed)?.condition_numbers();
        let asymptotic = required_iterations(
            conds.kappa,
            conds.kappa_plus,
            conds.kappa_minus,
            config.target,
        )?;
        line.push_str(&format!(" clr_asymptotic~{asymptotic:.0}"));
        println!("{line}");
        panels.push(panel);
    }
    let summary_path = config.out_dir.join("summary.csv");
    atomic_write(&summary_path, &summary)
        .map_err(|e| Error::io(summary_path.display().to_string(), e))?;
    if config.emit_svg {
        write_svg(&panels, 2, &config.out_dir.join("sweep.svg"))?;
    }
    Ok(if failed { 1 } else { 0 })
}

/// Runs `trials` seeded instances and verifies the contraction bound on
/// every one; prints the pass count and the worst observed margin.
pub fn cmd_verify(config: &ExperimentConfig, trials: usize) -> i32 {
    match verify_inner(config, trials) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("clrlab verify: {e}");
            exit_code_for(&e)
        }
    }
}

fn verify_inner(config: &ExperimentConfig, trials: usize) -> Result<i32> {
    if trials == 0 {
        return Err(Error::Config("verify needs at least one trial".into()));
    }
    config.validate()?;
    let mut passed = 0usize;
    let mut worst_margin: f64 = 0.0;
    let mut first_failure: Option<(u64, String)> = None;
    for i in 0..trials {
        let seed = config.seed.wrapping_add(i as u64);
        let mut trial_config = config.clone();
        trial_config.seed = seed;
        let outcome = verify_one(&trial_config);
        match outcome {
            Ok(report) => {
                worst_margin = worst_margin.max(report.max_violation);
                if report.all_pass {
                    passed += 1;
                } else if first_failure.is_none() {
                    first_failure = Some((seed, report.summary()));
                }
            }
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some((seed, e.to_string()));
                }
            }
        }
    }
    let verdict = if passed == trials { "PASS" } else { "FAIL" };
    println!("{passed}/{trials} {verdict} worst_margin={worst_margin:.6e}");
    if let Some((seed, detail)) = first_failure {
        eprintln!("first failing seed: {seed} ({detail})");
        return Ok(1);
    }
    Ok(0)
}

fn verify_one(config: &ExperimentConfig) -> Result<BoundReport> {
    let prepared = prepare(config, None)?;
    if !prepared.schedule_issues.is_empty() {
        return Err(Error::Config(format!(
            "verify requires the prescribed schedule ({})",
            prepared.schedule_issues.join("; ")
        )));
    }
    let cfg = run_config(config, prepared.problem.dim());
    let schedule = Schedule::Cyclical(prepared.effective.schedule());
    let trace = gradient_descent(&prepared.problem, &schedule, &cfg)?;
    verify_bound(
        &trace,
        &BoundSpec::from_params(&prepared.effective, prepared.kappa_minus),
    )
}

/// Prints (or writes) the spectrum a config generates.
pub fn cmd_spectrum(config: &ExperimentConfig, out: Option<&Path>) -> i32 {
    let result = (|| -> Result<()> {
        config.validate()?;
        let spectrum = make_bimodal_spectrum(&config.layout(), config.seed)?;
        match out {
            Some(path) => atomic_write(path, &format!("{spectrum}\n"))
                .map_err(|e| Error::io(path.display().to_string(), e))?,
            None => println!("{spectrum}"),
        }
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("clrlab spectrum: {e}");
            exit_code_for(&e)
        }
    }
}

/// Loads a spectrum from the plain-text format.
pub fn load_spectrum(path: &Path) -> Result<Spectrum> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut config = ExperimentConfig::default().with_kappa(100.0);
        config.p = 8;
        config.r = 2;
        config.out_dir = dir.to_path_buf();
        config
    }

    #[test]
    fn run_writes_trace_and_bound_report_and_passes() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        assert_eq!(cmd_run(&config, None), 0);
        assert!(dir.path().join("trace.csv").is_file());
        assert!(dir.path().join("bound_report.csv").is_file());
        assert!(dir.path().join("run.svg").is_file());
    }

    #[test]
    fn run_with_stable_override_skips_bound_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        // eta_minus = 1/L: stable, deviates from prescription.
        config.override_eta_minus = Some(0.01);
        assert_eq!(cmd_run(&config, None), 0);
        assert!(dir.path().join("trace.csv").is_file());
        assert!(!dir.path().join("bound_report.csv").exists());
    }

    #[test]
    fn run_rejects_invalid_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.p = 0;
        assert_eq!(cmd_run(&config, None), 2);
    }

    #[test]
    fn compare_writes_per_optimizer_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.target = 1e-6;
        let kinds = [OptimizerKind::Gd, OptimizerKind::Agd, OptimizerKind::Clr];
        assert_eq!(cmd_compare(&config, &kinds), 0);
        for id in ["gd", "agd", "clr"] {
            assert!(dir.path().join(format!("{id}.csv")).is_file(), "{id}");
        }
        assert!(dir.path().join("compare.svg").is_file());
    }

    #[test]
    fn verify_small_batch_passes() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.emit_svg = false;
        assert_eq!(cmd_verify(&config, 5), 0);
    }

    #[test]
    fn verify_zero_trials_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        assert_eq!(cmd_verify(&config, 0), 2);
    }

    #[test]
    fn sweep_rejects_kappa_inside_stable_regime() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        assert_eq!(cmd_sweep(&config, &[3.0]), 2);
    }

    #[test]
    fn nonlinear_run_passes_thm2_bound() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.nonlinear = true;
        config.regime = Regime::NonlinearThm2;
        config.coupling_m = 2;
        config.p = 8;
        config.r = 2;
        config.upper = (500.0, 1000.0);
        config.target = 1e-6;
        config.emit_svg = false;
        assert_eq!(cmd_run(&config, None), 0);
    }
}
