//! Bayesian Cramer-Rao lower bounds on the DD-channel MSE.
//!
//! With the Gaussian prior `h ~ CN(0, diag(lambda))` and the linear
//! observation `y = Phi h + v`, the Fisher information is
//! `J = Phi^H R_v^-1 Phi + diag(1/lambda)` and the channel-MSE bound is the
//! trace of `J^-1` pushed through the reconstruction map `zeta`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::hermitian_inverse;

/// Everything a bound evaluation needs; `lambda` is the true hyperparameter
/// diagonal (per grid cell, shared across antenna blocks in MIMO).
pub struct BcrbInput<'a> {
    pub dictionary: &'a DMatrix<Complex64>,
    pub noise_diag: &'a DVector<f64>,
    pub lambda: &'a DVector<f64>,
    pub zeta: &'a DMatrix<Complex64>,
    pub n_t: usize,
    pub n_r: usize,
}

fn information_matrix(input: &BcrbInput) -> Result<DMatrix<Complex64>> {
    let dict = input.dictionary;
    if input.noise_diag.len() != dict.nrows() {
        return Err(Error::shape("noise diagonal must match dictionary rows".to_string()));
    }
    if input.noise_diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::invalid("noise diagonal must be positive"));
    }
    let g = input.lambda.len();
    if g * input.n_t != dict.ncols() {
        return Err(Error::shape(format!(
            "dictionary width {} does not equal G*N_t = {}",
            dict.ncols(),
            g * input.n_t
        )));
    }
    if input.lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("hyperparameters must be positive"));
    }
    let mut j = DMatrix::zeros(dict.ncols(), dict.ncols());
    // Phi^H R^-1 Phi with diagonal R.
    let mut white = dict.clone();
    for row in 0..white.nrows() {
        let inv = Complex64::new(1.0 / input.noise_diag[row], 0.0);
        for col in 0..white.ncols() {
            white[(row, col)] *= inv;
        }
    }
    j += dict.adjoint() * white;
    for t in 0..input.n_t {
        for i in 0..g {
            j[(t * g + i, t * g + i)] += Complex64::new(1.0 / input.lambda[i], 0.0);
        }
    }
    Ok(j)
}

fn zeta_quadratic_trace(zeta: &DMatrix<Complex64>, block: &DMatrix<Complex64>) -> f64 {
    // Tr(zeta * block * zeta^H) without forming the M^2-square product.
    let t = zeta * block;
    let mut acc = 0.0;
    for row in 0..zeta.nrows() {
        for col in 0..zeta.ncols() {
            acc += (t[(row, col)] * zeta[(row, col)].conj()).re;
        }
    }
    acc
}

/// SISO bound: `Tr(zeta J^-1 zeta^H)` with `J = Phi^H R_v^-1 Phi + Lambda^-1`.
pub fn bcrb_siso(input: &BcrbInput) -> Result<f64> {
    if input.n_t != 1 || input.n_r != 1 {
        return Err(Error::invalid("bcrb_siso expects N_t = N_r = 1"));
    }
    let j = information_matrix(input)?;
    let j_inv = hermitian_inverse(&j)?;
    Ok(zeta_quadratic_trace(input.zeta, &j_inv))
}

/// MIMO bound: the trace of `(I (x) zeta)(I_{N_r} (x) J^-1)(I (x) zeta)^H`
/// evaluated blockwise, which collapses to `N_r` times the sum of the
/// per-antenna-block traces of `J^-1` pushed through `zeta`.
pub fn bcrb_mimo(input: &BcrbInput) -> Result<f64> {
    let j = information_matrix(input)?;
    let j_inv = hermitian_inverse(&j)?;
    let g = input.lambda.len();
    let mut acc = 0.0;
    for t in 0..input.n_t {
        let block = j_inv.view((t * g, t * g), (g, g)).into_owned();
        acc += zeta_quadratic_trace(input.zeta, &block);
    }
    Ok(acc * input.n_r as f64)
}
