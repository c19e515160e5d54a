use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clrlab::cli;
use clrlab::config::ExperimentConfig;
use clrlab::optimizers::OptimizerKind;
use clrlab::spectra::Spectrum;
use clrlab::Error;

/// Cyclical learning-rate laboratory: build bimodal-spectrum problems, run
/// schedule-driven gradient descent against GD/AGD baselines, and verify the
/// per-period contraction bounds on the recorded traces.
#[derive(Parser)]
#[command(name = "clrlab", version, about)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run schedule-driven gradient descent and check the contraction bound.
    Run(RunArgs),
    /// Run GD, AGD and CLR from the same start and plot them together.
    Compare(CompareArgs),
    /// Compare optimizers across a list of condition numbers.
    Sweep(SweepArgs),
    /// Verify the contraction bound over many seeded instances.
    Verify(VerifyArgs),
    /// Print the eigenvalue spectrum a config generates.
    Spectrum(SpectrumArgs),
}

/// Flags mirroring the experiment-config keys; every flag overrides the
/// corresponding key of `--config` (or of the defaults).
#[derive(Args)]
struct ConfigFlags {
    /// Load a key=value config file first.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Number of upper-cluster eigenvalues.
    #[arg(long)]
    r: Option<usize>,
    /// Shorthand: intervals [1,2] and [kappa/2, kappa].
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    upper_lo: Option<f64>,
    #[arg(long)]
    upper_hi: Option<f64>,
    #[arg(long)]
    lower_lo: Option<f64>,
    #[arg(long)]
    lower_hi: Option<f64>,
    /// endpoints | equispaced | uniform-random
    #[arg(long)]
    placement: Option<String>,
    /// none | random-orthogonal
    #[arg(long)]
    rotation: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the log-cosh nonlinear family.
    #[arg(long)]
    nonlinear: Option<bool>,
    /// Coupling strength (0 = pick an admissible value automatically).
    #[arg(long)]
    c: Option<f64>,
    /// Number of coupling vectors.
    #[arg(long)]
    m: Option<usize>,
    /// linear-thm1 | nonlinear-thm2
    #[arg(long)]
    regime: Option<String>,
    /// Multiplier on the prescribed period (probes slack).
    #[arg(long)]
    period_scale: Option<f64>,
    #[arg(long)]
    override_period: Option<usize>,
    #[arg(long)]
    override_eta_plus: Option<f64>,
    #[arg(long)]
    override_eta_minus: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Relative residual to stop at.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    emit_svg: Option<bool>,
    /// Read the spectrum from a file instead of generating a layout.
    #[arg(long)]
    spectrum_file: Option<PathBuf>,
    /// Write the effective config to a file before running.
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Comma-separated subset of gd,agd,clr.
    #[arg(long, default_value = "gd,agd,clr")]
    optimizers: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Comma-separated condition numbers.
    #[arg(long, default_value = "10,100,1000,10000")]
    kappas: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Number of seeded instances.
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Write to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Resolved {
    config: ExperimentConfig,
    spectrum: Option<Spectrum>,
}

fn resolve(flags: &ConfigFlags) -> Result<Resolved, Error> {
    let mut config = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(kappa) = flags.kappa {
        config = config.with_kappa(kappa);
    }
    if let Some(v) = flags.p {
        config.p = v;
    }
    if let Some(v) = flags.r {
        config.r = v;
    }
    if let Some(v) = flags.upper_lo {
        config.upper.0 = v;
    }
    if let Some(v) = flags.upper_hi {
        config.upper.1 = v;
    }
    if let Some(v) = flags.lower_lo {
        config.lower.0 = v;
    }
    if let Some(v) = flags.lower_hi {
        config.lower.1 = v;
    }
    if let Some(v) = &flags.placement {
        config.placement = v.parse()?;
    }
    if let Some(v) = &flags.rotation {
        config.rotation = v.parse()?;
    }
    if let Some(v) = flags.seed {
        config.seed = v;
    }
    if let Some(v) = flags.nonlinear {
        config.nonlinear = v;
    }
    if let Some(v) = flags.c {
        config.coupling_c = v;
    }
    if let Some(v) = flags.m {
        config.coupling_m = v;
    }
    if let Some(v) = &flags.regime {
        config.regime = v.parse()?;
    }
    if let Some(v) = flags.period_scale {
        config.period_scale = v;
    }
    if let Some(v) = flags.override_period {
        config.override_period = Some(v);
    }
    if let Some(v) = flags.override_eta_plus {
        config.override_eta_plus = Some(v);
    }
    if let Some(v) = flags.override_eta_minus {
        config.override_eta_minus = Some(v);
    }
    if let Some(v) = flags.max_iterations {
        config.max_iterations = v;
    }
    if let Some(v) = flags.target {
        config.target = v;
    }
    if let Some(v) = flags.record_every {
        config.record_every = v;
    }
    if let Some(v) = &flags.out_dir {
        config.out_dir = v.clone();
    }
    if let Some(v) = flags.emit_svg {
        config.emit_svg = v;
    }
    // Environment override wins over both config file and flags.
    if let Ok(value) = std::env::var("CLRLAB_SEED") {
        config.seed = value
            .parse()
            .map_err(|e| Error::Config(format!("bad CLRLAB_SEED {value:?}: {e}")))?;
    }
    let spectrum = match &flags.spectrum_file {
        Some(path) => Some(cli::load_spectrum(path)?),
        None => None,
    };
    if let Some(path) = &flags.save_config {
        config.save(path)?;
    }
    Ok(Resolved { config, spectrum })
}

fn parse_optimizers(list: &str) -> Result<Vec<OptimizerKind>, Error> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_kappas(list: &str) -> Result<Vec<f64>, Error> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad kappa {s:?}: {e}")))
        })
        .collect()
}

fn dispatch(args: CliArgs) -> i32 {
    match args.command {
        Command::Run(run) => match resolve(&run.flags) {
            Ok(resolved) => cli::cmd_run(&resolved.config, resolved.spectrum.as_ref()),
            Err(e) => usage_error(e),
        },
        Command::Compare(compare) => {
            match resolve(&compare.flags).and_then(|resolved| {
                Ok((resolved, parse_optimizers(&compare.optimizers)?))
            }) {
                Ok((resolved, kinds)) => cli::cmd_compare(&resolved.config, &kinds),
                Err(e) => usage_error(e),
            }
        }
        Command::Sweep(sweep) => {
            match resolve(&sweep.flags)
                .and_then(|resolved| Ok((resolved, parse_kappas(&sweep.kappas)?)))
            {
                Ok((resolved, kappas)) => cli::cmd_sweep(&resolved.config, &kappas),
                Err(e) => usage_error(e),
            }
        }
        Command::Verify(verify) => match resolve(&verify.flags) {
            Ok(resolved) => cli::cmd_verify(&resolved.config, verify.trials),
            Err(e) => usage_error(e),
        },
        Command::Spectrum(spectrum) => match resolve(&spectrum.flags) {
            Ok(resolved) => cli::cmd_spectrum(&resolved.config, spectrum.out.as_deref()),
            Err(e) => usage_error(e),
        },
    }
}

fn usage_error(e: Error) -> i32 {
    eprintln!("clrlab: {e}");
    cli::exit_code_for(&e)
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    ExitCode::from(dispatch(args) as u8)
}
