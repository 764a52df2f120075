//! Sparse Bayesian channel estimators.
//!
//! A zero-mean Gaussian prior with per-cell variances (hyperparameters)
//! `lambda_i` is placed on the grid coefficient vector. The EM loop
//! alternates a Gaussian posterior update (E-step) with the closed-form
//! hyperparameter maximization `lambda_i = Sigma(i,i) + |mu(i)|^2` (M-step);
//! cells that carry no path see their variance collapse toward zero, which is
//! what prunes the coherent dictionary down to the true support.
//!
//! The pilot-aided estimator uses the decoupled pilot block alone. The
//! data-aided variant stacks the (re-detected) data block on top of the
//! pilots, alternating hyperparameter updates with uncertainty-aware symbol
//! re-detection. MIMO versions share one hyperparameter vector across all
//! antenna blocks, which enforces the row-group sparsity of the common
//! support.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::detection::{
    lmmse_uncertainty_detect, slice_to_constellation, zf_uncertainty_detect, Constellation,
};
use crate::dictionary::{data_dictionary, joint_dictionary, mimo_data_dictionary};
use crate::error::{Error, Result};
use crate::grid::{basis_matrix, ChannelSupport, OtfsGrid};
use crate::linalg::{all_finite, hermitian_inverse, vec_of};

/// EM stopping parameters and the hyperparameter floor.
#[derive(Debug, Clone, Copy)]
pub struct EmSettings {
    /// Threshold on the squared Frobenius change of the hyperparameter
    /// diagonal between iterations.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Lower clamp applied after every M-step so the prior stays invertible.
    pub lambda_floor: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 50,
            lambda_floor: 1e-12,
        }
    }
}

impl EmSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.lambda_floor > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid(
                "EM settings need epsilon > 0, lambda_floor > 0, max_iters >= 1",
            ));
        }
        Ok(())
    }
}

/// Posterior state of one EM run: mean, covariance and the learned
/// hyperparameter diagonal.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    /// Posterior mean; one column per receive antenna.
    pub mean: DMatrix<Complex64>,
    /// Posterior covariance (shared across receive antennas).
    pub covariance: DMatrix<Complex64>,
    /// Learned prior variances, length `M_tau * G_nu`.
    pub hyperparams: DVector<f64>,
    pub iterations: usize,
}

/// Which uncertainty-aware re-detection rule the data-aided loop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyRule {
    ZeroForcing,
    Lmmse,
}

/// Result of a data-aided estimation run.
#[derive(Debug, Clone)]
pub struct EstimationOutput {
    /// Grid coefficients; one column per receive antenna.
    pub coefficients: DMatrix<Complex64>,
    /// Reconstructed DD channel (`M x M`, or `M*N_r x M*N_t` stacked).
    pub dd_channel: DMatrix<Complex64>,
    /// Channel-estimate error Gram matrix used by the detectors.
    pub xi: DMatrix<Complex64>,
    pub iterations: usize,
    /// Final hard-sliced data estimate (`M x K1`, or `M*N_t x K1` stacked);
    /// `None` for all-pilot frames.
    pub detected_data: Option<DMatrix<Complex64>>,
    pub hyperparams: DVector<f64>,
}

/// Diagonal of the decoupled DD-domain noise covariance for a block with
/// `n_cols` columns: `sigma^2 |p_rx(m)|^2`, tiled column-major.
pub fn dd_noise_diag(grid: &OtfsGrid, n_cols: usize, sigma2: f64) -> DVector<f64> {
    let m = grid.delay_bins();
    DVector::from_fn(m * n_cols, |idx, _| {
        sigma2 * grid.rx_pulse()[idx % m].norm_sqr()
    })
}

/// Noise diagonal of the stacked data-over-pilot observation.
pub fn stacked_noise_diag(grid: &OtfsGrid, k1: usize, k2: usize, sigma2: f64) -> DVector<f64> {
    let data = dd_noise_diag(grid, k1, sigma2);
    let pilot = dd_noise_diag(grid, k2, sigma2);
    DVector::from_fn(data.len() + pilot.len(), |i, _| {
        if i < data.len() {
            data[i]
        } else {
            pilot[i - data.len()]
        }
    })
}

fn check_noise(diag: &DVector<f64>, rows: usize) -> Result<()> {
    if diag.len() != rows {
        return Err(Error::shape(format!(
            "noise diagonal has length {}, observation has {rows} rows",
            diag.len()
        )));
    }
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::invalid("noise diagonal must be positive and finite"));
    }
    Ok(())
}

/// `dict^H R^-1 dict` and `dict^H R^-1 y` for a diagonal noise covariance.
fn whitened_products(
    dict: &DMatrix<Complex64>,
    y: &DMatrix<Complex64>,
    noise_diag: &DVector<f64>,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut white_dict = dict.clone();
    for row in 0..white_dict.nrows() {
        let inv = Complex64::new(1.0 / noise_diag[row], 0.0);
        for col in 0..white_dict.ncols() {
            white_dict[(row, col)] *= inv;
        }
    }
    (dict.adjoint() * &white_dict, white_dict.adjoint() * y)
}

/// Add `I_{n_t} (x) diag(1/lambda)` onto the whitened Gram and invert.
fn posterior_from_gram(
    gram: &DMatrix<Complex64>,
    rhs: &DMatrix<Complex64>,
    lambda: &DVector<f64>,
    n_t: usize,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let g = lambda.len();
    let mut a = gram.clone();
    for t in 0..n_t {
        for i in 0..g {
            a[(t * g + i, t * g + i)] += Complex64::new(1.0 / lambda[i], 0.0);
        }
    }
    let covariance = hermitian_inverse(&a)?;
    let mean = &covariance * rhs;
    if !all_finite(&covariance) || !all_finite(&mean) {
        return Err(Error::numerical("posterior became non-finite"));
    }
    Ok((covariance, mean))
}

/// Row-group hyperparameter update shared by all EM variants:
/// `lambda_i = mean_{r,t} |mean(tG+i, r)|^2 + mean_t Sigma(tG+i, tG+i)`.
fn hyperparam_update(
    mean: &DMatrix<Complex64>,
    covariance: &DMatrix<Complex64>,
    n_t: usize,
    floor: f64,
) -> DVector<f64> {
    let n_r = mean.ncols();
    let g = mean.nrows() / n_t;
    DVector::from_fn(g, |i, _| {
        let mut power = 0.0;
        let mut variance = 0.0;
        for t in 0..n_t {
            let row = t * g + i;
            for r in 0..n_r {
                power += mean[(row, r)].norm_sqr();
            }
            variance += covariance[(row, row)].re;
        }
        (power / (n_r * n_t) as f64 + variance / n_t as f64).max(floor)
    })
}

/// Conventional LMMSE estimate
/// `(Omega^H R^-1 Omega + diag(1/prior))^-1 Omega^H R^-1 Y`.
///
/// Pass an all-ones `prior_diag` when the channel covariance is unknown.
pub fn lmmse_channel_estimate(
    y: &DMatrix<Complex64>,
    dict: &DMatrix<Complex64>,
    noise_diag: &DVector<f64>,
    prior_diag: &DVector<f64>,
) -> Result<DMatrix<Complex64>> {
    if y.nrows() != dict.nrows() {
        return Err(Error::shape(format!(
            "observation has {} rows, dictionary has {}",
            y.nrows(),
            dict.nrows()
        )));
    }
    check_noise(noise_diag, dict.nrows())?;
    if prior_diag.len() != dict.ncols() {
        return Err(Error::shape("prior diagonal length must match dictionary width".to_string()));
    }
    if prior_diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::invalid("prior variances must be positive"));
    }
    let (gram, rhs) = whitened_products(dict, y, noise_diag);
    let mut a = gram;
    for i in 0..a.nrows() {
        a[(i, i)] += Complex64::new(1.0 / prior_diag[i], 0.0);
    }
    let est = crate::linalg::hermitian_solve(&a, &rhs)?;
    if !all_finite(&est) {
        return Err(Error::numerical("LMMSE estimate became non-finite"));
    }
    Ok(est)
}

/// Pilot-aided Bayesian learning for the row-group sparse MIMO model; the
/// shared `lambda` has one entry per grid cell regardless of antenna counts.
pub fn pa_bl_mimo(
    y_pilot: &DMatrix<Complex64>,
    pilot_dict: &DMatrix<Complex64>,
    noise_diag: &DVector<f64>,
    settings: &EmSettings,
    n_t: usize,
) -> Result<GaussianPosterior> {
    let g = if n_t > 0 { pilot_dict.ncols() / n_t.max(1) } else { 0 };
    pa_bl_mimo_from(
        y_pilot,
        pilot_dict,
        noise_diag,
        settings,
        n_t,
        &DVector::from_element(g, 1.0),
    )
}

/// [`pa_bl_mimo`] warm-started from a given hyperparameter diagonal.
pub fn pa_bl_mimo_from(
    y_pilot: &DMatrix<Complex64>,
    pilot_dict: &DMatrix<Complex64>,
    noise_diag: &DVector<f64>,
    settings: &EmSettings,
    n_t: usize,
    lambda_init: &DVector<f64>,
) -> Result<GaussianPosterior> {
    settings.validate()?;
    if y_pilot.nrows() != pilot_dict.nrows() {
        return Err(Error::shape(format!(
            "pilot observation has {} rows, dictionary has {}",
            y_pilot.nrows(),
            pilot_dict.nrows()
        )));
    }
    if n_t == 0 || !pilot_dict.ncols().is_multiple_of(n_t) {
        return Err(Error::shape(format!(
            "dictionary width {} is not divisible into {n_t} antenna blocks",
            pilot_dict.ncols()
        )));
    }
    check_noise(noise_diag, pilot_dict.nrows())?;

    let g = pilot_dict.ncols() / n_t;
    if lambda_init.len() != g {
        return Err(Error::shape("lambda_init length must match the grid".to_string()));
    }
    let (gram, rhs) = whitened_products(pilot_dict, y_pilot, noise_diag);
    let mut lambda = lambda_init.clone();
    let mut iterations = 0;
    let mut covariance = DMatrix::zeros(pilot_dict.ncols(), pilot_dict.ncols());
    let mut mean = DMatrix::zeros(pilot_dict.ncols(), y_pilot.ncols());
    while iterations < settings.max_iters {
        iterations += 1;
        let (cov, mu) = posterior_from_gram(&gram, &rhs, &lambda, n_t)?;
        let next = hyperparam_update(&mu, &cov, n_t, settings.lambda_floor);
        let delta = (&next - &lambda).norm_squared();
        covariance = cov;
        mean = mu;
        lambda = next;
        if delta < settings.epsilon {
            break;
        }
    }
    Ok(GaussianPosterior {
        mean,
        covariance,
        hyperparams: lambda,
        iterations,
    })
}

/// Pilot-aided Bayesian learning for the SISO model (Algorithm with
/// `N_t = N_r = 1`); `y_pilot` is the vectorized decoupled pilot block.
pub fn pa_bl_siso(
    y_pilot: &DVector<Complex64>,
    pilot_dict: &DMatrix<Complex64>,
    noise_diag: &DVector<f64>,
    settings: &EmSettings,
) -> Result<GaussianPosterior> {
    let y = DMatrix::from_column_slice(y_pilot.len(), 1, y_pilot.as_slice());
    pa_bl_mimo(&y, pilot_dict, noise_diag, settings, 1)
}

/// Rebuild the `M x M` DD channel from grid coefficients:
/// `H_DD = sum_{i,j} h(i,j) * B_{i,j}`.
pub fn reconstruct_dd_channel(
    coeffs: &DVector<Complex64>,
    grid: &OtfsGrid,
    support: &ChannelSupport,
) -> Result<DMatrix<Complex64>> {
    if coeffs.len() != support.grid_size() {
        return Err(Error::shape(format!(
            "coefficient vector has length {}, support has {} cells",
            coeffs.len(),
            support.grid_size()
        )));
    }
    let m = grid.delay_bins();
    let mut out = DMatrix::zeros(m, m);
    for idx in 0..coeffs.len() {
        let gain = coeffs[idx];
        if gain == Complex64::new(0.0, 0.0) {
            continue;
        }
        let (i, j) = support.cell_coords(idx);
        out += basis_matrix(grid, i, support.doppler_exponent(j))? * gain;
    }
    Ok(out)
}

/// Rebuild the stacked `M*N_r x M*N_t` MIMO DD channel from the coefficient
/// matrix (antenna block `t` occupies rows `t*G..(t+1)*G`, column `r`).
pub fn reconstruct_mimo_dd_channel(
    coeffs: &DMatrix<Complex64>,
    grid: &OtfsGrid,
    support: &ChannelSupport,
    n_t: usize,
) -> Result<DMatrix<Complex64>> {
    let g = support.grid_size();
    if coeffs.nrows() != g * n_t {
        return Err(Error::shape(format!(
            "coefficient matrix has {} rows, expected {}",
            coeffs.nrows(),
            g * n_t
        )));
    }
    let n_r = coeffs.ncols();
    let m = grid.delay_bins();
    let mut out = DMatrix::zeros(m * n_r, m * n_t);
    for r in 0..n_r {
        for t in 0..n_t {
            let block = coeffs.view((t * g, r), (g, 1)).into_owned();
            let h = reconstruct_dd_channel(&DVector::from_column_slice(block.as_slice()), grid, support)?;
            out.view_mut((r * m, t * m), (m, m)).copy_from(&h);
        }
    }
    Ok(out)
}

/// Error Gram from a coefficient covariance: with `vec(E) ~ CN(0, zeta Sigma
/// zeta^H)`, entry `(p, q)` of `E[E^H E]` is the trace of the `M x M` block of
/// the vec-covariance at block position `(q, p)` (the swap comes from the
/// conjugate in `E^H`).
fn block_trace(sigma: &DMatrix<Complex64>, zeta: &DMatrix<Complex64>, m: usize) -> DMatrix<Complex64> {
    let t = zeta * sigma; // M^2 x G
    let g = zeta.ncols();
    let mut xi = DMatrix::zeros(m, m);
    for p in 0..m {
        for q in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for row in 0..m {
                for col in 0..g {
                    acc += t[(q * m + row, col)] * zeta[(p * m + row, col)].conj();
                }
            }
            xi[(p, q)] = acc;
        }
    }
    xi
}

/// Channel-estimate uncertainty matrix for the SISO model: the `(p, q)` entry
/// is the trace of the `(p, q)` block of `zeta Sigma zeta^H`, so that
/// `E[H_DD^H H_DD] = H_hat^H H_hat + Xi`.
pub fn xi_matrix(
    sigma: &DMatrix<Complex64>,
    zeta: &DMatrix<Complex64>,
    m: usize,
) -> Result<DMatrix<Complex64>> {
    if zeta.nrows() != m * m {
        return Err(Error::shape(format!(
            "zeta has {} rows, expected M^2 = {}",
            zeta.nrows(),
            m * m
        )));
    }
    if sigma.nrows() != zeta.ncols() || sigma.ncols() != zeta.ncols() {
        return Err(Error::shape("posterior covariance must match zeta width".to_string()));
    }
    Ok(block_trace(sigma, zeta, m))
}

/// MIMO uncertainty matrix (`M*N_t` square): with per-pair error covariances
/// `zeta Sigma^{(t1,t2)} zeta^H` identical across receive antennas, the
/// stacked-channel error Gram is `N_r` times the per-antenna block trace, so
/// `E[H~^H H~] = H_hat^H H_hat + Xi` for the stacked `M*N_r x M*N_t` channel.
pub fn xi_matrix_mimo(
    sigma: &DMatrix<Complex64>,
    zeta: &DMatrix<Complex64>,
    m: usize,
    n_t: usize,
    n_r: usize,
) -> Result<DMatrix<Complex64>> {
    let g = zeta.ncols();
    if sigma.nrows() != g * n_t || sigma.ncols() != g * n_t {
        return Err(Error::shape(format!(
            "posterior covariance is {}x{}, expected {}",
            sigma.nrows(),
            sigma.ncols(),
            g * n_t
        )));
    }
    let mut xi = DMatrix::zeros(m * n_t, m * n_t);
    for t1 in 0..n_t {
        for t2 in 0..n_t {
            // the conjugate in E^H also swaps the antenna blocks
            let block = sigma.view((t2 * g, t1 * g), (g, g)).into_owned();
            let trace = block_trace(&block, zeta, m) * Complex64::new(n_r as f64, 0.0);
            xi.view_mut((t1 * m, t2 * m), (m, m)).copy_from(&trace);
        }
    }
    Ok(xi)
}

/// Inputs of the SISO data-aided loop.
///
/// `data_init` is the hard-sliced data estimate a completed pilot-aided pass
/// detected, and `lambda_init` that pass's final hyperparameters.
pub struct DaBlSisoInput<'a> {
    pub y_data: &'a DMatrix<Complex64>,
    pub y_pilot: &'a DMatrix<Complex64>,
    pub pilot_dict: &'a DMatrix<Complex64>,
    pub data_init: DMatrix<Complex64>,
    pub lambda_init: DVector<f64>,
    pub rule: UncertaintyRule,
    pub constellation: &'a Constellation,
    pub sigma_d2: f64,
    pub noise_var: f64,
}

/// Data-aided Bayesian learning for SISO: stacks the re-detected data block
/// over the pilot block, re-estimating the channel and the data in turn.
pub fn da_bl_siso(
    input: &DaBlSisoInput,
    grid: &OtfsGrid,
    support: &ChannelSupport,
    zeta: &DMatrix<Complex64>,
    settings: &EmSettings,
) -> Result<EstimationOutput> {
    settings.validate()?;
    let m = grid.delay_bins();
    let k1 = input.y_data.ncols();
    let k2 = input.y_pilot.ncols();
    if input.y_data.nrows() != m || input.y_pilot.nrows() != m {
        return Err(Error::shape("decoupled observations must have M rows".to_string()));
    }
    if input.data_init.shape() != (m, k1) {
        return Err(Error::shape("data initialization must be M x K1".to_string()));
    }
    if input.lambda_init.len() != support.grid_size() {
        return Err(Error::shape("lambda_init length must match the grid".to_string()));
    }

    let y_joint = {
        let mut y = DVector::zeros(m * (k1 + k2));
        y.rows_mut(0, m * k1).copy_from(&vec_of(input.y_data));
        y.rows_mut(m * k1, m * k2).copy_from(&vec_of(input.y_pilot));
        DMatrix::from_column_slice(m * (k1 + k2), 1, y.as_slice())
    };
    let noise = stacked_noise_diag(grid, k1, k2, input.noise_var);
    let rx_gram = DVector::from_fn(m, |i, _| grid.rx_pulse()[i].norm_sqr());
    let amplitude = input.sigma_d2.sqrt();

    let mut x_data = input.data_init.clone();
    let mut lambda = input.lambda_init.clone();
    let mut iterations = 0;
    let mut mean = DMatrix::zeros(support.grid_size(), 1);
    let mut h_hat = DMatrix::zeros(m, m);
    let mut xi = DMatrix::zeros(m, m);

    while iterations < settings.max_iters {
        iterations += 1;
        let omega_d = data_dictionary(&x_data, grid, support)?;
        let phi = joint_dictionary(&omega_d, input.pilot_dict)?;
        let (gram, rhs) = whitened_products(&phi, &y_joint, &noise);
        let (cov, mu) = posterior_from_gram(&gram, &rhs, &lambda, 1)?;
        let next = hyperparam_update(&mu, &cov, 1, settings.lambda_floor);
        let delta = (&next - &lambda).norm_squared();
        lambda = next;

        h_hat = reconstruct_dd_channel(&DVector::from_column_slice(mu.as_slice()), grid, support)?;
        xi = xi_matrix(&cov, zeta, m)?;
        if k1 > 0 {
            let soft = match input.rule {
                UncertaintyRule::ZeroForcing => zf_uncertainty_detect(input.y_data, &h_hat, &xi)?,
                UncertaintyRule::Lmmse => lmmse_uncertainty_detect(
                    input.y_data,
                    &h_hat,
                    &xi,
                    input.noise_var,
                    input.sigma_d2,
                    &rx_gram,
                )?,
            };
            x_data = slice_to_constellation(&soft, input.constellation, amplitude);
        }
        mean = mu;
        if delta < settings.epsilon {
            break;
        }
    }

    Ok(EstimationOutput {
        coefficients: mean,
        dd_channel: h_hat,
        xi,
        iterations,
        detected_data: if k1 > 0 { Some(x_data) } else { None },
        hyperparams: lambda,
    })
}

/// Inputs of the MIMO data-aided loop; observations and the data estimate are
/// in stacked block form (`M*N_r x K` and `M*N_t x K1`).
pub struct DaBlMimoInput<'a> {
    pub y_data: &'a DMatrix<Complex64>,
    pub y_pilot: &'a DMatrix<Complex64>,
    pub pilot_dict: &'a DMatrix<Complex64>,
    pub data_init: DMatrix<Complex64>,
    pub lambda_init: DVector<f64>,
    pub rule: UncertaintyRule,
    pub constellation: &'a Constellation,
    pub sigma_d2: f64,
    pub noise_var: f64,
    pub n_t: usize,
    pub n_r: usize,
}

/// Split a stacked `M*Nb x K` block matrix into the per-block vectorized
/// columns: output column `b` is `vec` of block `b`.
pub fn per_block_vecs(stacked: &DMatrix<Complex64>, m: usize, blocks: usize) -> Result<DMatrix<Complex64>> {
    if stacked.nrows() != m * blocks {
        return Err(Error::shape(format!(
            "stacked matrix has {} rows, expected {}",
            stacked.nrows(),
            m * blocks
        )));
    }
    let k = stacked.ncols();
    let mut out = DMatrix::zeros(m * k, blocks);
    for b in 0..blocks {
        let block = stacked.view((b * m, 0), (m, k)).into_owned();
        out.column_mut(b).copy_from(&vec_of(&block));
    }
    Ok(out)
}

fn blocks_of(stacked: &DMatrix<Complex64>, m: usize, blocks: usize) -> Vec<DMatrix<Complex64>> {
    (0..blocks)
        .map(|b| stacked.view((b * m, 0), (m, stacked.ncols())).into_owned())
        .collect()
}

/// Data-aided Bayesian learning for MIMO with row-group sparse coupling.
pub fn da_bl_mimo(
    input: &DaBlMimoInput,
    grid: &OtfsGrid,
    support: &ChannelSupport,
    zeta: &DMatrix<Complex64>,
    settings: &EmSettings,
) -> Result<EstimationOutput> {
    settings.validate()?;
    let m = grid.delay_bins();
    let (n_t, n_r) = (input.n_t, input.n_r);
    let k1 = input.y_data.ncols();
    let k2 = input.y_pilot.ncols();
    if input.y_data.nrows() != m * n_r || input.y_pilot.nrows() != m * n_r {
        return Err(Error::shape("stacked observations must have M*N_r rows".to_string()));
    }
    if input.data_init.shape() != (m * n_t, k1) {
        return Err(Error::shape("data initialization must be M*N_t x K1".to_string()));
    }
    if input.lambda_init.len() != support.grid_size() {
        return Err(Error::shape("lambda_init length must match the grid".to_string()));
    }
    if input.rule == UncertaintyRule::Lmmse && n_t != n_r {
        return Err(Error::invalid(
            "the uncertainty-aware LMMSE rule needs N_t == N_r; use zero forcing otherwise",
        ));
    }

    // Per-RA vectorized observations, data rows stacked over pilot rows.
    let y_data_vecs = per_block_vecs(input.y_data, m, n_r)?;
    let y_pilot_vecs = per_block_vecs(input.y_pilot, m, n_r)?;
    let mut y_joint = DMatrix::zeros(m * (k1 + k2), n_r);
    y_joint.view_mut((0, 0), (m * k1, n_r)).copy_from(&y_data_vecs);
    y_joint
        .view_mut((m * k1, 0), (m * k2, n_r))
        .copy_from(&y_pilot_vecs);
    let noise = stacked_noise_diag(grid, k1, k2, input.noise_var);
    let rx_gram = DVector::from_fn(m * n_r, |i, _| grid.rx_pulse()[i % m].norm_sqr());
    let amplitude = input.sigma_d2.sqrt();

    let mut x_data = input.data_init.clone();
    let mut lambda = input.lambda_init.clone();
    let mut iterations = 0;
    let mut mean = DMatrix::zeros(support.grid_size() * n_t, n_r);
    let mut h_hat = DMatrix::zeros(m * n_r, m * n_t);
    let mut xi = DMatrix::zeros(m * n_t, m * n_t);

    while iterations < settings.max_iters {
        iterations += 1;
        let omega_d = mimo_data_dictionary(&blocks_of(&x_data, m, n_t), grid, support)?;
        let phi = joint_dictionary(&omega_d, input.pilot_dict)?;
        let (gram, rhs) = whitened_products(&phi, &y_joint, &noise);
        let (cov, mu) = posterior_from_gram(&gram, &rhs, &lambda, n_t)?;
        let next = hyperparam_update(&mu, &cov, n_t, settings.lambda_floor);
        let delta = (&next - &lambda).norm_squared();
        lambda = next;

        h_hat = reconstruct_mimo_dd_channel(&mu, grid, support, n_t)?;
        xi = xi_matrix_mimo(&cov, zeta, m, n_t, n_r)?;
        if k1 > 0 {
            let soft = match input.rule {
                UncertaintyRule::ZeroForcing => zf_uncertainty_detect(input.y_data, &h_hat, &xi)?,
                UncertaintyRule::Lmmse => lmmse_uncertainty_detect(
                    input.y_data,
                    &h_hat,
                    &xi,
                    input.noise_var,
                    input.sigma_d2,
                    &rx_gram,
                )?,
            };
            x_data = slice_to_constellation(&soft, input.constellation, amplitude);
        }
        mean = mu;
        if delta < settings.epsilon {
            break;
        }
    }

    Ok(EstimationOutput {
        coefficients: mean,
        dd_channel: h_hat,
        xi,
        iterations,
        detected_data: if k1 > 0 { Some(x_data) } else { None },
        hyperparams: lambda,
    })
}
