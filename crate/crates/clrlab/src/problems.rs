//! Synthetic strongly convex test problems with a prescribed bimodal
//! spectrum.
//!
//! Two families:
//! - [`QuadraticProblem`]: exact least squares with Hessian eigenvalues equal
//!   to a given [`Spectrum`], either diagonal or conjugated by a seeded random
//!   orthogonal matrix.
//! - [`NonlinearProblem`]: `f(theta) = 1/2 (theta - v)' H0 (theta - v) + c *
//!   sum_i log cosh(u_i' theta)` with unit coupling vectors `u_i`. Because
//!   `sech^2` lies in `(0, 1]`, the Hessian is sandwiched between `H0` and
//!   `H0 + c * sum u_i u_i'` for every `theta`, which yields closed-form
//!   block bounds and a certified cross-smoothness value instead of sampled
//!   estimates.
//!
//! Both expose the gradient/Hessian oracle and the subspace split used by the
//! contraction analysis: the span of the top `r` eigendirections of the base
//! Hessian.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg::{random_orthogonal, sym_eig_range};
use crate::rng::Rng;
use crate::schedules::{cross_smoothness_admissible, thm2_params};
use crate::spectra::Spectrum;
use crate::util::{fmt_g17, fnv1a64};
use crate::Result;

/// Largest dimension for which dense rotated Hessians are built.
pub const MAX_DENSE_DIM: usize = 2048;

/// Value, gradient and (optionally) Hessian of a smooth objective.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    fn value(&self, theta: &DVector<f64>) -> f64;
    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        let _ = theta;
        None
    }
}

/// An oracle together with the geometry the contraction analysis needs:
/// the minimizer and the upper/lower eigenspace split.
pub trait Problem: GradientOracle {
    fn theta_star(&self) -> &DVector<f64>;
    fn basis(&self) -> &SubspaceBasis;
    /// Global (L, mu) of the objective.
    fn smoothness_bounds(&self) -> (f64, f64);
    /// Fingerprint of the generating configuration, recorded in traces.
    fn config_hash(&self) -> u64;
    fn seed(&self) -> u64;
}

/// Orthonormal eigenbasis with a split into upper (`..split`) and lower
/// (`split..`) columns. The standard variant avoids materializing an identity
/// matrix for diagonal problems.
#[derive(Debug, Clone, PartialEq)]
pub enum SubspaceBasis {
    Standard { dim: usize, split: usize },
    Orthogonal { q: DMatrix<f64>, split: usize },
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        match self {
            SubspaceBasis::Standard { dim, .. } => *dim,
            SubspaceBasis::Orthogonal { q, .. } => q.nrows(),
        }
    }

    pub fn split(&self) -> usize {
        match self {
            SubspaceBasis::Standard { split, .. } | SubspaceBasis::Orthogonal { split, .. } => {
                *split
            }
        }
    }

    /// Norms of the projections of `w` onto the upper subspace and its
    /// complement. Satisfies `a^2 + b^2 = |w|^2` up to rounding.
    pub fn component_norms(&self, w: &DVector<f64>) -> (f64, f64) {
        match self {
            SubspaceBasis::Standard { split, .. } => {
                let a = w.rows(0, *split).norm();
                let b = w.rows(*split, w.len() - *split).norm();
                (a, b)
            }
            SubspaceBasis::Orthogonal { q, split } => {
                let coords = q.transpose() * w;
                let a = coords.rows(0, *split).norm();
                let b = coords.rows(*split, coords.len() - *split).norm();
                (a, b)
            }
        }
    }

    /// The p x r matrix of upper-subspace basis vectors.
    pub fn upper_matrix(&self) -> DMatrix<f64> {
        match self {
            SubspaceBasis::Standard { dim, split } => {
                DMatrix::identity(*dim, *dim).columns(0, *split).into()
            }
            SubspaceBasis::Orthogonal { q, split } => q.columns(0, *split).into(),
        }
    }

    /// The p x (p - r) matrix spanning the complement.
    pub fn complement_matrix(&self) -> DMatrix<f64> {
        let (dim, split) = (self.dim(), self.split());
        match self {
            SubspaceBasis::Standard { .. } => DMatrix::identity(dim, dim)
                .columns(split, dim - split)
                .into(),
            SubspaceBasis::Orthogonal { q, .. } => q.columns(split, dim - split).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum HessianRep {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

/// Exact least squares: gradient `H (theta - theta_star)`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    rep: HessianRep,
    spectrum: Spectrum,
    theta_star: DVector<f64>,
    basis: SubspaceBasis,
    seed: u64,
    config_hash: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    None,
    RandomOrthogonal,
}

impl Rotation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rotation::None => "none",
            Rotation::RandomOrthogonal => "random-orthogonal",
        }
    }
}

impl std::fmt::Display for Rotation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rotation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Rotation::None),
            "random-orthogonal" => Ok(Rotation::RandomOrthogonal),
            other => Err(Error::InvalidArgument(format!(
                "unknown rotation {other:?} (expected none or random-orthogonal)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ThetaStarMode {
    RandomUnit,
    Given(DVector<f64>),
}

impl QuadraticProblem {
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        theta - &self.theta_star
    }
}

impl GradientOracle for QuadraticProblem {
    fn dim(&self) -> usize {
        self.theta_star.len()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let w = self.residual(theta);
        match &self.rep {
            HessianRep::Diagonal(d) => 0.5 * w.iter().zip(d.iter()).map(|(w, d)| d * w * w).sum::<f64>(),
            HessianRep::Dense(h) => 0.5 * w.dot(&(h * &w)),
        }
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let w = self.residual(theta);
        match &self.rep {
            HessianRep::Diagonal(d) => w.component_mul(d),
            HessianRep::Dense(h) => h * w,
        }
    }

    fn hessian(&self, _theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(match &self.rep {
            HessianRep::Diagonal(d) => DMatrix::from_diagonal(d),
            HessianRep::Dense(h) => h.clone(),
        })
    }
}

impl Problem for QuadraticProblem {
    fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    fn smoothness_bounds(&self) -> (f64, f64) {
        let eigs = self.spectrum.eigenvalues();
        (eigs[0], eigs[eigs.len() - 1])
    }

    fn config_hash(&self) -> u64 {
        self.config_hash
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

fn hash_config(parts: &[String]) -> u64 {
    fnv1a64(parts.join(";").as_bytes())
}

/// The rotation/minimizer draws shared by both problem families; the
/// draw order (Q first, then theta_star) is fixed so that a zero-coupling
/// nonlinear build reproduces the rotated quadratic exactly.
fn quadratic_parts(
    spectrum: &Spectrum,
    rotation: Rotation,
    theta_star_mode: &ThetaStarMode,
    rng: &mut Rng,
) -> Result<(HessianRep, SubspaceBasis, DVector<f64>)> {
    let p = spectrum.dim();
    let (rep, basis) = match rotation {
        Rotation::None => (
            HessianRep::Diagonal(DVector::from_column_slice(spectrum.eigenvalues())),
            SubspaceBasis::Standard {
                dim: p,
                split: spectrum.split_index(),
            },
        ),
        Rotation::RandomOrthogonal => {
            if p > MAX_DENSE_DIM {
                return Err(Error::InvalidArgument(format!(
                    "dense rotated Hessians are capped at p <= {MAX_DENSE_DIM}, got {p}; use diagonal mode"
                )));
            }
            let q = random_orthogonal(p, rng);
            let lam = DVector::from_column_slice(spectrum.eigenvalues());
            let mut h = &q * DMatrix::from_diagonal(&lam) * q.transpose();
            // Symmetrize to kill rounding asymmetry.
            h = 0.5 * (&h + h.transpose());
            (
                HessianRep::Dense(h),
                SubspaceBasis::Orthogonal {
                    q,
                    split: spectrum.split_index(),
                },
            )
        }
    };
    let theta_star = match theta_star_mode {
        ThetaStarMode::RandomUnit => rng.unit_vector(p),
        ThetaStarMode::Given(v) => {
            if v.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: v.len(),
                });
            }
            v.clone()
        }
    };
    Ok((rep, basis, theta_star))
}

/// Builds an exact least-squares problem with the prescribed spectrum.
pub fn build_quadratic(
    spectrum: &Spectrum,
    rotation: Rotation,
    theta_star_mode: ThetaStarMode,
    seed: u64,
) -> Result<QuadraticProblem> {
    let mut rng = Rng::seed_from_u64(seed);
    let (rep, basis, theta_star) = quadratic_parts(spectrum, rotation, &theta_star_mode, &mut rng)?;
    let config_hash = hash_config(&[
        "quadratic".into(),
        spectrum.to_string(),
        rotation.to_string(),
        theta_star.iter().map(|x| fmt_g17(*x)).collect::<Vec<_>>().join(","),
        seed.to_string(),
    ]);
    Ok(QuadraticProblem {
        rep,
        spectrum: spectrum.clone(),
        theta_star,
        basis,
        seed,
        config_hash,
    })
}

/// Closed-form constants certifying the bimodal-Hessian conditions for a
/// log-cosh problem: valid for every `theta`, not just sampled ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticBounds {
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub eps_max: f64,
}

/// Strongly convex log-cosh family; see the module docs for the functional
/// form. Always dense, always rotated by a seeded orthogonal matrix.
#[derive(Debug, Clone)]
pub struct NonlinearProblem {
    h0: DMatrix<f64>,
    spectrum: Spectrum,
    basis: SubspaceBasis,
    quad_center: DVector<f64>,
    couplings: Vec<DVector<f64>>,
    coupling_strength: f64,
    theta_star_ref: DVector<f64>,
    bounds: AnalyticBounds,
    seed: u64,
    config_hash: u64,
}

/// log(cosh(x)) without overflow for large |x|.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// sech^2(x) in (0, 1], stable for large |x|.
fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

impl NonlinearProblem {
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn analytic_bounds(&self) -> &AnalyticBounds {
        &self.bounds
    }

    pub fn coupling_strength(&self) -> f64 {
        self.coupling_strength
    }

    pub fn couplings(&self) -> &[DVector<f64>] {
        &self.couplings
    }

    /// Center of the quadratic part (the minimizer when `c = 0`).
    pub fn quad_center(&self) -> &DVector<f64> {
        &self.quad_center
    }

    /// Base Hessian plus the coupling envelope `H0 + c * sum u_i u_i'`,
    /// the pointwise upper bound on the true Hessian.
    pub fn hessian_envelope(&self) -> DMatrix<f64> {
        let mut h = self.h0.clone();
        for u in &self.couplings {
            h += self.coupling_strength * u * u.transpose();
        }
        h
    }

    pub fn base_hessian(&self) -> &DMatrix<f64> {
        &self.h0
    }
}

impl GradientOracle for NonlinearProblem {
    fn dim(&self) -> usize {
        self.quad_center.len()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let w = theta - &self.quad_center;
        let mut v = 0.5 * w.dot(&(&self.h0 * &w));
        for u in &self.couplings {
            v += self.coupling_strength * ln_cosh(u.dot(theta));
        }
        v
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut g = &self.h0 * (theta - &self.quad_center);
        for u in &self.couplings {
            g += self.coupling_strength * u.dot(theta).tanh() * u;
        }
        g
    }

    fn hessian(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut h = self.h0.clone();
        for u in &self.couplings {
            h += self.coupling_strength * sech2(u.dot(theta)) * u * u.transpose();
        }
        Some(h)
    }
}

impl Problem for NonlinearProblem {
    fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star_ref
    }

    fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    fn smoothness_bounds(&self) -> (f64, f64) {
        (self.bounds.smoothness, self.bounds.strong_convexity)
    }

    fn config_hash(&self) -> u64 {
        self.config_hash
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

/// Base Hessian, eigenbasis, quadratic center and coupling directions.
type NonlinearParts = (DMatrix<f64>, SubspaceBasis, DVector<f64>, Vec<DVector<f64>>);

fn nonlinear_parts(spectrum: &Spectrum, m: usize, seed: u64) -> Result<NonlinearParts> {
    let mut rng = Rng::seed_from_u64(seed);
    let (rep, basis, center) = quadratic_parts(
        spectrum,
        Rotation::RandomOrthogonal,
        &ThetaStarMode::RandomUnit,
        &mut rng,
    )?;
    let h0 = match rep {
        HessianRep::Dense(h) => h,
        HessianRep::Diagonal(_) => unreachable!("rotated build is always dense"),
    };
    let p = spectrum.dim();
    let couplings: Vec<DVector<f64>> = (0..m).map(|_| rng.unit_vector(p)).collect();
    Ok((h0, basis, center, couplings))
}

fn analytic_bounds(
    spectrum: &Spectrum,
    h0: &DMatrix<f64>,
    basis: &SubspaceBasis,
    couplings: &[DVector<f64>],
    c: f64,
) -> Result<AnalyticBounds> {
    let eigs = spectrum.eigenvalues();
    let r = spectrum.split_index();
    let mu = eigs[eigs.len() - 1];
    if c == 0.0 || couplings.is_empty() {
        return Ok(AnalyticBounds {
            smoothness: eigs[0],
            strong_convexity: mu,
            kappa_plus: eigs[0] / eigs[r - 1],
            kappa_minus: eigs[r] / mu,
            eps_max: 0.0,
        });
    }
    let mut envelope = h0.clone();
    for u in couplings {
        envelope += c * u * u.transpose();
    }
    let (_, smoothness) = sym_eig_range(envelope.clone())?;
    let bc = basis.complement_matrix();
    let (_, lower_top) = sym_eig_range(bc.transpose() * &envelope * &bc)?;
    let bs = basis.upper_matrix();
    let eps_max: f64 = couplings
        .iter()
        .map(|u| c * (bs.transpose() * u).norm() * (bc.transpose() * u).norm())
        .sum();
    Ok(AnalyticBounds {
        smoothness,
        strong_convexity: mu,
        kappa_plus: smoothness / eigs[r - 1],
        kappa_minus: lower_top / mu,
        eps_max,
    })
}

fn assemble_nonlinear(
    spectrum: &Spectrum,
    h0: DMatrix<f64>,
    basis: SubspaceBasis,
    quad_center: DVector<f64>,
    couplings: Vec<DVector<f64>>,
    coupling_strength: f64,
    seed: u64,
) -> Result<NonlinearProblem> {
    if coupling_strength < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "coupling strength {coupling_strength} must be non-negative"
        )));
    }
    let bounds = analytic_bounds(spectrum, &h0, &basis, &couplings, coupling_strength)?;
    // Admissibility is monotone decreasing in T, so the prescribed minimal
    // period is the most permissive valid choice.
    let params = thm2_params(
        bounds.kappa_plus,
        bounds.kappa_minus,
        bounds.smoothness,
        bounds.strong_convexity,
    )?;
    let rhs = (1.0f64).min(bounds.kappa_minus / params.period as f64) * bounds.strong_convexity;
    if params.period > 1_000_000
        || !cross_smoothness_admissible(
            bounds.eps_max,
            bounds.strong_convexity,
            bounds.kappa_minus,
            params.period,
        )
    {
        return Err(Error::InadmissibleCoupling {
            lhs: 4.0 * bounds.eps_max,
            rhs,
        });
    }
    let config_hash = hash_config(&[
        "nonlinear".into(),
        spectrum.to_string(),
        couplings.len().to_string(),
        fmt_g17(coupling_strength),
        seed.to_string(),
    ]);
    let mut problem = NonlinearProblem {
        h0,
        spectrum: spectrum.clone(),
        basis,
        quad_center,
        couplings,
        coupling_strength,
        theta_star_ref: DVector::zeros(spectrum.dim()),
        bounds,
        seed,
        config_hash,
    };
    problem.theta_star_ref = reference_minimizer(&problem)?;
    Ok(problem)
}

/// Builds a log-cosh problem with `m` seeded unit coupling vectors.
///
/// Fails if the certified cross-smoothness is inadmissible for the
/// prescribed period; the caller should shrink `coupling_strength`
/// (see [`choose_admissible_coupling`]).
pub fn build_nonlinear(
    spectrum: &Spectrum,
    m: usize,
    coupling_strength: f64,
    seed: u64,
) -> Result<NonlinearProblem> {
    let (h0, basis, center, couplings) = nonlinear_parts(spectrum, m, seed)?;
    assemble_nonlinear(spectrum, h0, basis, center, couplings, coupling_strength, seed)
}

/// Largest coupling strength with `4 eps_max = safety * min(1, kappa_minus/T) * mu`,
/// found by fixed-point iteration (the bound constants depend only weakly on
/// `c`). `safety` in (0, 1]; 0.5 leaves half the admissible margin.
pub fn choose_admissible_coupling(
    spectrum: &Spectrum,
    m: usize,
    seed: u64,
    safety: f64,
) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety factor {safety} must lie in (0, 1]"
        )));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let (h0, basis, _, couplings) = nonlinear_parts(spectrum, m, seed)?;
    let bs = basis.upper_matrix();
    let bc = basis.complement_matrix();
    let gamma: f64 = couplings
        .iter()
        .map(|u| (bs.transpose() * u).norm() * (bc.transpose() * u).norm())
        .sum();
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let mut c = 0.0;
    for _ in 0..100 {
        let bounds = analytic_bounds(spectrum, &h0, &basis, &couplings, c)?;
        let params = thm2_params(
            bounds.kappa_plus,
            bounds.kappa_minus,
            bounds.smoothness,
            bounds.strong_convexity,
        )?;
        let target = (1.0f64).min(bounds.kappa_minus / params.period as f64)
            * bounds.strong_convexity;
        let next = safety * target / (4.0 * gamma);
        if (next - c).abs() <= 1e-14 * next.max(1.0) {
            return Ok(next);
        }
        c = next;
    }
    Ok(c)
}

/// Damped Newton from the origin down to `|grad| <= 1e-12 (L + 1)`.
///
/// Deterministic; fails after 200 steps without reaching the tolerance.
pub fn reference_minimizer(problem: &NonlinearProblem) -> Result<DVector<f64>> {
    let tol = 1e-12 * (problem.bounds.smoothness + 1.0);
    let mut theta = DVector::zeros(problem.dim());
    let mut grad = problem.gradient(&theta);
    for _ in 0..200 {
        let grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(theta);
        }
        let hess = problem
            .hessian(&theta)
            .expect("nonlinear problems always expose a Hessian");
        let direction = hess.cholesky().map(|ch| ch.solve(&grad)).ok_or_else(|| {
            Error::InvalidArgument("Newton step failed: Hessian not positive definite".into())
        })?;
        // Halve the step until the gradient norm decreases.
        let mut step = 1.0;
        loop {
            let candidate = &theta - step * &direction;
            let candidate_grad = problem.gradient(&candidate);
            if candidate_grad.norm() < grad_norm || step < 1e-12 {
                theta = candidate;
                grad = candidate_grad;
                break;
            }
            step *= 0.5;
        }
    }
    let grad_norm = grad.norm();
    Err(Error::NewtonStalled {
        steps: 200,
        grad_norm,
        tol,
    })
}
