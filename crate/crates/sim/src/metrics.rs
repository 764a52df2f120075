//! Scalar metrics: NMSE, SER and the pilot-overhead efficiency comparison.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Normalized MSE `||est - truth||^2 / ||truth||^2` over all entries.
pub fn nmse(estimate: &DMatrix<Complex64>, truth: &DMatrix<Complex64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::config(format!(
            "nmse shape mismatch: {:?} vs {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::numerical("nmse undefined for a zero true channel"));
    }
    Ok((estimate - truth).norm_squared() / denom)
}

/// Fraction of mismatched symbol indices.
pub fn ser(detected: &DMatrix<usize>, truth: &DMatrix<usize>) -> Result<f64> {
    if detected.shape() != truth.shape() {
        return Err(Error::config(format!(
            "ser shape mismatch: {:?} vs {:?}",
            detected.shape(),
            truth.shape()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let errors = detected
        .iter()
        .zip(truth.iter())
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / truth.len() as f64)
}

/// Frame efficiencies: superimposed pilots vs the embedded-pilot layouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiency {
    /// `1 - K2/N = K1/N`, identical for SISO and MIMO.
    pub ap_sip: f64,
    /// Embedded-pilot SISO reference `1 - (2 M_tau + 1)(2 N_nu + 1)/(M N)`.
    pub ep_siso: f64,
    /// Embedded-pilot MIMO reference
    /// `1 - (N_t M_tau + M_tau + N_t)(2 N_nu + 1)/(M N N_t)`.
    pub ep_mimo: f64,
}

/// Efficiency of the configured frame layout against the embedded-pilot
/// baselines at the same channel-spread assumptions.
pub fn efficiency(cfg: &ExperimentConfig) -> Efficiency {
    let (m, n) = (cfg.m as f64, cfg.n as f64);
    let (m_tau, n_nu) = (cfg.m_tau as f64, cfg.n_nu as f64);
    let n_t = cfg.n_tx as f64;
    Efficiency {
        ap_sip: cfg.k1 as f64 / n,
        ep_siso: 1.0 - (2.0 * m_tau + 1.0) * (2.0 * n_nu + 1.0) / (m * n),
        ep_mimo: 1.0 - (n_t * m_tau + m_tau + n_t) * (2.0 * n_nu + 1.0) / (m * n * n_t),
    }
}
