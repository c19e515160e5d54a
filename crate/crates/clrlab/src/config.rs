//! Flat `key=value` experiment configuration.
//!
//! The file format is line-oriented, order-insensitive on input, canonical
//! on output, and rejects unknown or duplicate keys. Optional keys are
//! simply absent. Floats are written with 17 significant digits so a
//! config round-trips losslessly.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::Error;
use crate::problems::Rotation;
use crate::schedules::Regime;
use crate::spectra::{BimodalLayout, Placement};
use crate::util::{atomic_write, fmt_g17};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // problem
    pub p: usize,
    pub r: usize,
    pub upper: (f64, f64),
    pub lower: (f64, f64),
    pub placement: Placement,
    pub rotation: Rotation,
    pub seed: u64,
    pub nonlinear: bool,
    /// Coupling strength of the log-cosh family; 0 picks an admissible
    /// value automatically when `nonlinear` is set.
    pub coupling_c: f64,
    pub coupling_m: usize,
    // schedule
    pub regime: Regime,
    pub period_scale: f64,
    pub override_period: Option<usize>,
    pub override_eta_plus: Option<f64>,
    pub override_eta_minus: Option<f64>,
    // run
    pub max_iterations: usize,
    pub target: f64,
    pub record_every: usize,
    // output
    pub out_dir: PathBuf,
    pub emit_svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p: 64,
            r: 8,
            upper: (5000.0, 10000.0),
            lower: (1.0, 2.0),
            placement: Placement::Endpoints,
            rotation: Rotation::RandomOrthogonal,
            seed: 0,
            nonlinear: false,
            coupling_c: 0.0,
            coupling_m: 0,
            regime: Regime::LinearThm1,
            period_scale: 1.0,
            override_period: None,
            override_eta_plus: None,
            override_eta_minus: None,
            max_iterations: 200_000,
            target: 1e-8,
            record_every: 1,
            out_dir: PathBuf::from("out"),
            emit_svg: true,
        }
    }
}

impl ExperimentConfig {
    /// Sets the cluster intervals to [1, 2] and [kappa/2, kappa], the layout
    /// used throughout the condition-number comparisons.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.upper = (kappa / 2.0, kappa);
        self.lower = (1.0, 2.0);
        self
    }

    pub fn layout(&self) -> BimodalLayout {
        BimodalLayout {
            p: self.p,
            r: self.r,
            upper: self.upper,
            lower: self.lower,
            placement: self.placement,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout().validate().map_err(reword_as_config)?;
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(Error::Config(format!(
                "target {} must lie in (0, 1]",
                self.target
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        if !(self.period_scale > 0.0) || !self.period_scale.is_finite() {
            return Err(Error::Config(format!(
                "period_scale {} must be positive and finite",
                self.period_scale
            )));
        }
        if self.coupling_c < 0.0 {
            return Err(Error::Config(format!(
                "c = {} must be non-negative",
                self.coupling_c
            )));
        }
        if let Some(t) = self.override_period {
            if t <= 1 {
                return Err(Error::Config(format!("override_period {t} must be > 1")));
            }
        }
        for (name, v) in [
            ("override_eta_plus", self.override_eta_plus),
            ("override_eta_minus", self.override_eta_minus),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Config(format!("{name} = {v} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse` of this is the identity.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("p", self.p.to_string());
        kv("r", self.r.to_string());
        kv("upper_lo", fmt_g17(self.upper.0));
        kv("upper_hi", fmt_g17(self.upper.1));
        kv("lower_lo", fmt_g17(self.lower.0));
        kv("lower_hi", fmt_g17(self.lower.1));
        kv("placement", self.placement.to_string());
        kv("rotation", self.rotation.to_string());
        kv("seed", self.seed.to_string());
        kv("nonlinear", self.nonlinear.to_string());
        kv("c", fmt_g17(self.coupling_c));
        kv("m", self.coupling_m.to_string());
        kv("regime", self.regime.to_string());
        kv("period_scale", fmt_g17(self.period_scale));
        if let Some(t) = self.override_period {
            kv("override_period", t.to_string());
        }
        if let Some(v) = self.override_eta_plus {
            kv("override_eta_plus", fmt_g17(v));
        }
        if let Some(v) = self.override_eta_minus {
            kv("override_eta_minus", fmt_g17(v));
        }
        kv("max_iterations", self.max_iterations.to_string());
        kv("target", fmt_g17(self.target));
        kv("record_every", self.record_every.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("emit_svg", self.emit_svg.to_string());
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.emit()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        text.parse()
    }
}

fn reword_as_config(e: Error) -> Error {
    Error::Config(e.to_string())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value for {key}: {value:?} ({e})")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!(
            "bad value for {key}: {other:?} (expected true or false)"
        ))),
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("duplicate key {key:?}")));
            }
            seen.push(key.to_string());
            match key {
                "p" => config.p = parse_value(key, value)?,
                "r" => config.r = parse_value(key, value)?,
                "upper_lo" => config.upper.0 = parse_value(key, value)?,
                "upper_hi" => config.upper.1 = parse_value(key, value)?,
                "lower_lo" => config.lower.0 = parse_value(key, value)?,
                "lower_hi" => config.lower.1 = parse_value(key, value)?,
                "placement" => config.placement = parse_value(key, value)?,
                "rotation" => config.rotation = parse_value(key, value)?,
                "seed" => config.seed = parse_value(key, value)?,
                "nonlinear" => config.nonlinear = parse_bool(key, value)?,
                "c" => config.coupling_c = parse_value(key, value)?,
                "m" => config.coupling_m = parse_value(key, value)?,
                "regime" => config.regime = parse_value(key, value)?,
                "period_scale" => config.period_scale = parse_value(key, value)?,
                "override_period" => config.override_period = Some(parse_value(key, value)?),
                "override_eta_plus" => config.override_eta_plus = Some(parse_value(key, value)?),
                "override_eta_minus" => config.override_eta_minus = Some(parse_value(key, value)?),
                "max_iterations" => config.max_iterations = parse_value(key, value)?,
                "target" => config.target = parse_value(key, value)?,
                "record_every" => config.record_every = parse_value(key, value)?,
                "out_dir" => config.out_dir = PathBuf::from(value),
                "emit_svg" => config.emit_svg = parse_bool(key, value)?,
                other => {
                    return Err(Error::Config(format!("unknown key {other:?}")));
                }
            }
        }
        Ok(config)
    }
}
