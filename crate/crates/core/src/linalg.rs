//! Small complex linear-algebra helpers shared by the estimation code.
//!
//! Everything here operates on dense `DMatrix<Complex64>`; the problem sizes
//! in this crate are desk scale, so dense factorizations are the right tool.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solve `A X = B` for Hermitian positive-definite `A`.
///
/// Tries a Cholesky factorization first and falls back to partial-pivot LU
/// when the matrix is only semidefinite up to round-off.
pub fn hermitian_solve(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape(format!(
            "hermitian_solve expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() != b.nrows() {
        return Err(Error::shape(format!(
            "solve rhs has {} rows, matrix is {}x{}",
            b.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::numerical("singular system in hermitian_solve"))
}

/// Inverse of a Hermitian positive-definite matrix via `hermitian_solve`.
pub fn hermitian_inverse(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eye = DMatrix::identity(a.nrows(), a.ncols());
    hermitian_solve(a, &eye)
}

/// Symmetrize round-off: returns `(A + A^H) / 2`.
pub fn hermitize(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// PSD matrix square root through a Hermitian eigendecomposition.
///
/// Eigenvalues that are slightly negative from round-off are clamped to zero.
pub fn psd_sqrt(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape("psd_sqrt expects a square matrix".to_string()));
    }
    let eig = hermitize(a).symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = -1e-8 * scale.max(1.0);
    let mut sqrt_vals = DVector::zeros(eig.eigenvalues.len());
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < tol {
            return Err(Error::numerical(format!(
                "matrix is not PSD: eigenvalue {v:e} below tolerance"
            )));
        }
        sqrt_vals[i] = Complex64::new(v.max(0.0).sqrt(), 0.0);
    }
    let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
    Ok(&scaled * eig.eigenvectors.adjoint())
}

/// Column-major vectorization `vec(A)`.
pub fn vec_of(a: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec_of`]: rebuild an `rows x cols` matrix column by column.
pub fn unvec(v: &DVector<Complex64>, rows: usize, cols: usize) -> Result<DMatrix<Complex64>> {
    if v.len() != rows * cols {
        return Err(Error::shape(format!(
            "cannot reshape length-{} vector into {}x{}",
            v.len(),
            rows,
            cols
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Vertical concatenation of two matrices with equal column counts.
pub fn vstack(top: &DMatrix<Complex64>, bottom: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if top.ncols() != bottom.ncols() {
        return Err(Error::shape(format!(
            "vstack column mismatch: {} vs {}",
            top.ncols(),
            bottom.ncols()
        )));
    }
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), (top.nrows(), top.ncols())).copy_from(top);
    out.view_mut((top.nrows(), 0), (bottom.nrows(), bottom.ncols()))
        .copy_from(bottom);
    Ok(out)
}

/// Horizontal concatenation of matrices with equal row counts.
pub fn hstack(blocks: &[DMatrix<Complex64>]) -> Result<DMatrix<Complex64>> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        if b.nrows() != rows {
            return Err(Error::shape(format!(
                "hstack row mismatch: {} vs {}",
                b.nrows(),
                rows
            )));
        }
        out.view_mut((0, offset), (rows, b.ncols())).copy_from(b);
        offset += b.ncols();
    }
    Ok(out)
}

/// True when every entry of the matrix is finite.
pub fn all_finite(a: &DMatrix<Complex64>) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
