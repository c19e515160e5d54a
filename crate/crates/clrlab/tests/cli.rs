//! End-to-end tests of the `clrlab` binary: exit codes, file outputs, the
//! seed environment override, and the spectrum/config file formats.

use std::path::Path;
use std::process::{Command, Output};

fn clrlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clrlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("CLRLAB_SEED")
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn run_produces_outputs_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(
        &["run", "--kappa", "100", "--p", "8", "--r", "2", "--out-dir", "out"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("T=10 eta_plus="), "{stdout}");
    assert!(stdout.contains("PASS max_violation="), "{stdout}");
    for file in ["trace.csv", "bound_report.csv", "run.svg"] {
        assert!(dir.path().join("out").join(file).is_file(), "{file}");
    }
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert!(trace.contains("t,eta,residual,a_norm,b_norm,value"));
    let report = std::fs::read_to_string(dir.path().join("out/bound_report.csv")).unwrap();
    assert!(report.contains("t,ratio,bound,pass"));
}

#[test]
fn figure_1d_run_meets_the_theorem_iteration_budget() {
    // kappa = 1e4, intervals [1,2] and [5000,10000]: T = 19 and the
    // prescribed budget for 1e-8 accuracy is 1406 iterations.
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(&["run", "--kappa", "10000", "--out-dir", "out"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("T=19 "));
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let last = trace.lines().last().unwrap();
    let reached_at: usize = last.split(',').next().unwrap().parse().unwrap();
    assert!(reached_at <= 1406, "took {reached_at} > 1406 iterations");
}

#[test]
fn single_optimizer_compare_plots_one_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(
        &[
            "compare", "--kappa", "10", "--p", "8", "--r", "2", "--target", "1e-6",
            "--optimizers", "clr", "--out-dir", "out",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("out/clr.csv").is_file());
    assert!(!dir.path().join("out/gd.csv").exists());
    let svg = std::fs::read_to_string(dir.path().join("out/compare.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn invalid_dimension_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(&["run", "--p", "0"], dir.path());
    assert_eq!(code(&out), 2);
    let out = clrlab(&["run", "--p", "8", "--r", "8"], dir.path());
    assert_eq!(code(&out), 2);
    let out = clrlab(&["verify", "--trials", "0"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn diverging_compare_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // eta_plus far beyond 2/L makes the CLR run blow up; GD and AGD finish.
    let out = clrlab(
        &[
            "compare", "--kappa", "100", "--p", "8", "--r", "2", "--target", "1e-4",
            "--override-eta-plus", "0.5", "--out-dir", "out",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    assert!(dir.path().join("out/gd.csv").is_file());
    assert!(dir.path().join("out/agd.csv").is_file());
    assert!(!dir.path().join("out/clr.csv").exists());
    // The failure is annotated in the plot.
    let svg = std::fs::read_to_string(dir.path().join("out/compare.svg")).unwrap();
    assert!(svg.contains("Unstable CLR:"), "annotation missing");
}

#[test]
fn nonlinear_run_reports_tighter_bound_observation() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(
        &[
            "run", "--nonlinear", "true", "--regime", "nonlinear-thm2", "--p", "8",
            "--r", "2", "--kappa", "1000", "--m", "2", "--target", "1e-6",
            "--out-dir", "out",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS max_violation="), "{stdout}");
    assert!(
        stdout.contains("observation: bound without the sqrt(2) factor"),
        "{stdout}"
    );
}

#[test]
fn single_kappa_sweep_renders_one_panel() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(
        &[
            "sweep", "--kappas", "100", "--p", "8", "--r", "2", "--target", "1e-6",
            "--out-dir", "out",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4); // header + gd + agd + clr
    let svg = std::fs::read_to_string(dir.path().join("out/sweep.svg")).unwrap();
    assert_eq!(svg.matches("kappa=100<").count(), 1);
}

#[test]
fn seed_env_var_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out_dir: &str, env_seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_clrlab"));
        cmd.args([
            "run", "--kappa", "100", "--p", "8", "--r", "2", "--seed", "1",
            "--out-dir", out_dir,
        ])
        .current_dir(dir.path())
        .env_remove("CLRLAB_SEED");
        if let Some(seed) = env_seed {
            cmd.env("CLRLAB_SEED", seed);
        }
        assert!(cmd.output().unwrap().status.success());
    };
    run("a", None); // seed 1 via flag
    run("b", Some("2")); // env overrides to seed 2
    run("c", Some("1")); // env agrees with flag
    let a = std::fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/trace.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c/trace.csv")).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn spectrum_subcommand_round_trips_into_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(
        &[
            "spectrum", "--kappa", "100", "--p", "6", "--r", "2",
            "--placement", "uniform-random", "--seed", "5", "--out", "spec.txt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("spec.txt")).unwrap();
    assert!(text.trim_end().ends_with("r=2"), "{text}");
    let spectrum: clrlab::spectra::Spectrum = text.parse().unwrap();
    assert_eq!(spectrum.dim(), 6);

    let out = clrlab(
        &["run", "--spectrum-file", "spec.txt", "--out-dir", "out"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn printed_spectrum_matches_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let printed = clrlab(
        &["spectrum", "--kappa", "10", "--p", "4", "--r", "2"],
        dir.path(),
    );
    assert_eq!(code(&printed), 0);
    let stdout = String::from_utf8_lossy(&printed.stdout);
    assert!(stdout.contains("r=2"));
    let spectrum: clrlab::spectra::Spectrum = stdout.parse().unwrap();
    assert_eq!(spectrum.eigenvalues(), &[10.0, 5.0, 2.0, 1.0]);
}

#[test]
fn save_config_round_trips_through_config_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(
        &[
            "run", "--kappa", "100", "--p", "8", "--r", "2", "--seed", "9",
            "--target", "1e-6", "--out-dir", "first", "--save-config", "experiment.cfg",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let out = clrlab(
        &["run", "--config", "experiment.cfg", "--out-dir", "second"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let a = std::fs::read(dir.path().join("first/trace.csv")).unwrap();
    let b = std::fs::read(dir.path().join("second/trace.csv")).unwrap();
    assert_eq!(a, b, "config file reproduces the flagged run");
}

#[test]
fn stable_override_skips_bound_check_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    // eta_minus = 1/L = 0.01: stable and off-prescription.
    let out = clrlab(
        &[
            "run", "--kappa", "100", "--p", "8", "--r", "2",
            "--override-eta-minus", "0.01", "--out-dir", "out",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bound check skipped"), "{stderr}");
    assert!(dir.path().join("out/trace.csv").is_file());
    assert!(!dir.path().join("out/bound_report.csv").exists());
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "p=8\nwhat=ever\n").unwrap();
    let out = clrlab(&["run", "--config", "bad.cfg"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn svg_is_well_formed_xml() {
    let dir = tempfile::tempdir().unwrap();
    let out = clrlab(
        &["compare", "--kappa", "10", "--p", "8", "--r", "2", "--target", "1e-6", "--out-dir", "out"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let svg = std::fs::read_to_string(dir.path().join("out/compare.svg")).unwrap();
    check_well_formed(&svg);
    // Legend entries in input order.
    let gd = svg.find(">GD<").expect("GD legend");
    let agd = svg.find(">AGD<").expect("AGD legend");
    let clr = svg.find(">Unstable CLR<").expect("CLR legend");
    assert!(gd < agd && agd < clr, "legend order");
}

/// Minimal XML well-formedness check: tag balance, attribute quoting, and
/// no stray `<`/`&` in text. Independent of the emitter.
fn check_well_formed(doc: &str) {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = doc;
    while let Some(start) = rest.find('<') {
        let text = &rest[..start];
        assert!(!text.contains('>'), "stray '>' in text: {text:?}");
        if let Some(amp) = text.find('&') {
            let entity = &text[amp..text.len().min(amp + 6)];
            assert!(
                entity.starts_with("&amp;")
                    || entity.starts_with("&lt;")
                    || entity.starts_with("&gt;")
                    || entity.starts_with("&quot;")
                    || entity.starts_with("&apos;"),
                "unescaped '&' in text: {entity:?}"
            );
        }
        rest = &rest[start + 1..];
        let end = rest.find('>').expect("unterminated tag");
        let tag = &rest[..end];
        rest = &rest[end + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        let quotes = tag.matches('"').count();
        assert!(quotes.is_multiple_of(2), "unbalanced quotes in <{tag}>");
        if let Some(name) = tag.strip_prefix('/') {
            let open = stack.pop().unwrap_or_else(|| panic!("unmatched </{name}>"));
            assert_eq!(open, name, "mismatched close tag");
        } else if !tag.ends_with('/') {
            let name: String = tag
                .chars()
                .take_while(|c| !c.is_whitespace() && *c != '/')
                .collect();
            stack.push(name);
        }
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    assert!(doc.contains("<svg"), "missing svg root");
}
