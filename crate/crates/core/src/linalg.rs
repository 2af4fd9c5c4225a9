//! Dense complex matrix helpers on top of `faer`.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type ComplexMatrix = Mat<Complex64>;

/// Singular values, nonincreasing.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m
        .singular_values()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(s)
}

/// Eigenvalues of a Hermitian matrix, nondecreasing.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Spectral norm `s_1`.
pub fn op_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Largest deviation from Hermitian symmetry relative to the largest entry.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            scale = scale.max(m[(i, j)].norm());
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// `y = M x`.
pub fn matvec(m: &ComplexMatrix, x: &[Complex64], y: &mut [Complex64]) {
    for v in y.iter_mut() {
        *v = Complex64::default();
    }
    for j in 0..m.ncols() {
        let xj = x[j];
        if xj == Complex64::default() {
            continue;
        }
        let col = m.col(j);
        for (i, v) in y.iter_mut().enumerate() {
            *v += col[i] * xj;
        }
    }
}
