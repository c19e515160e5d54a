//! Thin wrappers over nalgebra's symmetric eigensolver used across the crate.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::rng::Rng;
use crate::Result;

/// All eigenvalues of a symmetric matrix, sorted non-increasing.
pub fn sym_eigs_desc(m: DMatrix<f64>) -> Result<Vec<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "eigendecomposition input contains non-finite entries".into(),
        ));
    }
    let mut eigs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eigs)
}

/// (min, max) eigenvalue of a symmetric matrix.
pub fn sym_eig_range(m: DMatrix<f64>) -> Result<(f64, f64)> {
    let eigs = sym_eigs_desc(m)?;
    Ok((*eigs.last().unwrap(), eigs[0]))
}

/// Largest singular value, computed as sqrt of the top eigenvalue of the
/// smaller Gram matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let (_, top) = sym_eig_range(gram)?;
    Ok(top.max(0.0).sqrt())
}

/// Haar-ish random orthogonal matrix: QR of a seeded standard-Gaussian matrix
/// with the R diagonal signs folded into Q so the factorization is unique.
pub fn random_orthogonal(p: usize, rng: &mut Rng) -> DMatrix<f64> {
    // Column-major fill so the draw order is part of the file format contract.
    let data: Vec<f64> = (0..p * p).map(|_| rng.next_normal()).collect();
    let g = DMatrix::from_vec(p, p, data);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
