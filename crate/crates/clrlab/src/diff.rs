//! Central finite differences for checking analytic gradients and Hessians.
//!
//! These are deliberately independent of the oracle implementations: they
//! only ever call the value (resp. gradient) function being differentiated.

use nalgebra::{DMatrix, DVector};

/// Central-difference gradient of `f` at `theta` with step `h`.
pub fn central_gradient<F>(f: F, theta: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let p = theta.len();
    DVector::from_fn(p, |i, _| {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[i] += h;
        minus[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a gradient function, i.e. a numerical
/// Hessian. Symmetrized since the analytic Hessian is symmetric.
pub fn central_hessian<G>(grad: G, theta: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let p = theta.len();
    let mut hess = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[j] += h;
        minus[j] -= h;
        let column = (grad(&plus) - grad(&minus)) / (2.0 * h);
        hess.set_column(j, &column);
    }
    0.5 * (&hess + hess.transpose())
}

/// Relative error `|a - b| / max(|b|, floor)` between two vectors or
/// matrices flattened to slices.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(floor)
}
