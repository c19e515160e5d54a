//! Bimodal eigenvalue layouts and the condition numbers they induce.
//!
//! A [`Spectrum`] is a decreasingly sorted list of positive Hessian
//! eigenvalues together with a split index `r` separating the upper cluster
//! (`lambda_1 ..= lambda_r`) from the lower cluster (`lambda_{r+1} ..= lambda_p`).
//! The split determines the global condition number `kappa = L / mu` and the
//! local ones `kappa_plus = L / lambda_r`, `kappa_minus = lambda_{r+1} / mu`
//! that drive every schedule formula in [`crate::schedules`].

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::rng::Rng;
use crate::util::fmt_g17;
use crate::Result;

/// Decreasingly sorted positive eigenvalues plus the cluster split index.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    split: usize,
}

/// The five scalars of the contraction analysis.
///
/// `smoothness` is the largest eigenvalue (L), `strong_convexity` the
/// smallest (mu). Always satisfies `kappa_plus * kappa_minus <= kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumbers {
    pub kappa: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
}

impl Spectrum {
    /// Validates positivity, non-increasing order and `1 <= split < p`.
    pub fn new(eigenvalues: Vec<f64>, split: usize) -> Result<Self> {
        if eigenvalues.len() < 2 {
            return Err(Error::InvalidSpectrum(format!(
                "need at least 2 eigenvalues, got {}",
                eigenvalues.len()
            )));
        }
        if split == 0 || split >= eigenvalues.len() {
            return Err(Error::InvalidSpectrum(format!(
                "split index {} outside [1, {}]",
                split,
                eigenvalues.len() - 1
            )));
        }
        for (i, &lam) in eigenvalues.iter().enumerate() {
            if !(lam > 0.0) || !lam.is_finite() {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalue {i} is {lam}, must be finite and positive"
                )));
            }
            if i > 0 && lam > eigenvalues[i - 1] {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalues not sorted non-increasing at index {i}"
                )));
            }
        }
        Ok(Spectrum { eigenvalues, split })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn split_index(&self) -> usize {
        self.split
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// kappa, kappa_plus, kappa_minus, L, mu for this spectrum and split.
    pub fn condition_numbers(&self) -> ConditionNumbers {
        let p = self.dim();
        let smoothness = self.eigenvalues[0];
        let strong_convexity = self.eigenvalues[p - 1];
        ConditionNumbers {
            kappa: smoothness / strong_convexity,
            kappa_plus: smoothness / self.eigenvalues[self.split - 1],
            kappa_minus: self.eigenvalues[self.split] / strong_convexity,
            smoothness,
            strong_convexity,
        }
    }
}

/// Plain-text form: one eigenvalue per line, then `r=<split>`.
impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for lam in &self.eigenvalues {
            writeln!(f, "{}", fmt_g17(*lam))?;
        }
        write!(f, "r={}", self.split)
    }
}

impl FromStr for Spectrum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut eigenvalues = Vec::new();
        let mut split = None;
        for line in s.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(r) = line.strip_prefix("r=") {
                if split.is_some() {
                    return Err(Error::InvalidSpectrum("duplicate r= line".into()));
                }
                split = Some(r.trim().parse::<usize>().map_err(|e| {
                    Error::InvalidSpectrum(format!("bad split index {r:?}: {e}"))
                })?);
            } else {
                let lam: f64 = line
                    .parse()
                    .map_err(|e| Error::InvalidSpectrum(format!("bad eigenvalue {line:?}: {e}")))?;
                eigenvalues.push(lam);
            }
        }
        let split = split.ok_or_else(|| Error::InvalidSpectrum("missing r= line".into()))?;
        Spectrum::new(eigenvalues, split)
    }
}

/// Where the eigenvalues fall within each cluster interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Cluster extremes pinned to the interval endpoints, interior equispaced.
    /// A single-eigenvalue cluster sits at the interval's upper end.
    Endpoints,
    /// Equispaced across the interval, endpoints included. A
    /// single-eigenvalue cluster sits at the interval midpoint.
    Equispaced,
    /// Seeded i.i.d. uniform draws inside the interval.
    UniformRandom,
}

impl Placement {
    pub fn as_str(&self) -> &'static str {
        match self {
            Placement::Endpoints => "endpoints",
            Placement::Equispaced => "equispaced",
            Placement::UniformRandom => "uniform-random",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "endpoints" => Ok(Placement::Endpoints),
            "equispaced" => Ok(Placement::Equispaced),
            "uniform-random" => Ok(Placement::UniformRandom),
            other => Err(Error::InvalidArgument(format!(
                "unknown placement {other:?} (expected endpoints, equispaced or uniform-random)"
            ))),
        }
    }
}

/// A two-cluster eigenvalue layout: `r` eigenvalues in `upper`, `p - r` in
/// `lower`, with `lower.1 < upper.0`. Intervals are `(lo, hi)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BimodalLayout {
    pub p: usize,
    pub r: usize,
    pub upper: (f64, f64),
    pub lower: (f64, f64),
    pub placement: Placement,
}

impl BimodalLayout {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidLayout(format!("p = {} < 2", self.p)));
        }
        if self.r == 0 || self.r >= self.p {
            return Err(Error::InvalidLayout(format!(
                "r = {} outside [1, {}]",
                self.r,
                self.p - 1
            )));
        }
        for (name, (lo, hi)) in [("upper", self.upper), ("lower", self.lower)] {
            if !(lo > 0.0) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidLayout(format!(
                    "{name} interval ({lo}, {hi}) must have positive finite bounds"
                )));
            }
            if hi < lo {
                return Err(Error::InvalidLayout(format!(
                    "{name} interval ({lo}, {hi}) is empty"
                )));
            }
        }
        if self.lower.1 >= self.upper.0 {
            return Err(Error::InvalidLayout(format!(
                "clusters overlap: lower hi {} >= upper lo {}",
                self.lower.1, self.upper.0
            )));
        }
        Ok(())
    }
}

fn fill_cluster(interval: (f64, f64), count: usize, placement: Placement, rng: &mut Rng) -> Vec<f64> {
    let (lo, hi) = interval;
    match placement {
        Placement::Endpoints | Placement::Equispaced => {
            if count == 1 {
                let v = match placement {
                    Placement::Endpoints => hi,
                    _ => 0.5 * (lo + hi),
                };
                return vec![v];
            }
            (0..count)
                .map(|i| {
                    // Convex combination: stays inside [lo, hi] exactly.
                    let t = i as f64 / (count - 1) as f64;
                    hi * (1.0 - t) + lo * t
                })
                .collect()
        }
        Placement::UniformRandom => {
            let mut vals: Vec<f64> = (0..count).map(|_| rng.in_range(lo, hi)).collect();
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            vals
        }
    }
}

/// Builds a [`Spectrum`] from a layout; pure in `(layout, seed)`.
pub fn make_bimodal_spectrum(layout: &BimodalLayout, seed: u64) -> Result<Spectrum> {
    layout.validate()?;
    let mut rng = Rng::seed_from_u64(seed);
    let mut eigenvalues = fill_cluster(layout.upper, layout.r, layout.placement, &mut rng);
    eigenvalues.extend(fill_cluster(
        layout.lower,
        layout.p - layout.r,
        layout.placement,
        &mut rng,
    ));
    Spectrum::new(eigenvalues, layout.r)
}
