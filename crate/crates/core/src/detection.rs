//! Symbol constellations and the linear data detectors.
//!
//! Besides the plain LMMSE detector with (estimated or perfect) CSI, two
//! uncertainty-aware rules fold the channel-estimate error Gram matrix `Xi`
//! into detection: a regularized zero-forcing solve and a simplified LMMSE
//! rule acting on the output side.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::hermitian_solve;

/// Modulation alphabets supported by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModulationKind {
    Psk4,
    Qam16,
    Qam64,
}

/// A unit-average-power symbol alphabet with Gray bit labels.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub kind: ModulationKind,
    pub points: Vec<Complex64>,
    pub bits_per_symbol: usize,
    pub labels: Vec<u32>,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

impl Constellation {
    pub fn new(kind: ModulationKind) -> Self {
        match kind {
            ModulationKind::Psk4 => Self::psk4(),
            ModulationKind::Qam16 => Self::square_qam(kind, 4),
            ModulationKind::Qam64 => Self::square_qam(kind, 8),
        }
    }

    /// 4-PSK at 45/135/225/315 degrees.
    pub fn psk4() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            kind: ModulationKind::Psk4,
            points: vec![
                Complex64::new(a, a),
                Complex64::new(-a, a),
                Complex64::new(-a, -a),
                Complex64::new(a, -a),
            ],
            bits_per_symbol: 2,
            labels: vec![0, 1, 3, 2],
        }
    }

    fn square_qam(kind: ModulationKind, side: u32) -> Self {
        let mean_axis_power: f64 = (0..side).map(|i| ((2 * i + 1) as f64 - side as f64).powi(2)).sum::<f64>() / side as f64;
        let scale = 1.0 / (2.0 * mean_axis_power).sqrt();
        let axis_bits = side.trailing_zeros();
        let mut points = Vec::with_capacity((side * side) as usize);
        let mut labels = Vec::with_capacity((side * side) as usize);
        for i in 0..side {
            for q in 0..side {
                let re = ((2 * i + 1) as f64 - side as f64) * scale;
                let im = ((2 * q + 1) as f64 - side as f64) * scale;
                points.push(Complex64::new(re, im));
                labels.push((gray(i) << axis_bits) | gray(q));
            }
        }
        Self {
            kind,
            points,
            bits_per_symbol: 2 * axis_bits as usize,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point index with ties broken to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (idx, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_dist {
                best_dist = d;
                best = idx;
            }
        }
        best
    }

    /// Draw a matrix of uniform symbol indices.
    pub fn random_indices<R: rand::Rng>(&self, rows: usize, cols: usize, rng: &mut R) -> DMatrix<usize> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(0..self.len()))
    }
}

/// Map symbol indices onto constellation points, scaled by `amplitude`.
pub fn map_indices(indices: &DMatrix<usize>, constellation: &Constellation, amplitude: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(indices.nrows(), indices.ncols(), |r, c| {
        constellation.points[indices[(r, c)]] * amplitude
    })
}

/// Nearest-neighbor demapping of a (scaled) symbol matrix to indices.
///
/// `amplitude` is the transmit scaling; entries are divided by it before the
/// nearest-point search so the decision regions stay those of the unit-power
/// alphabet.
pub fn demap(x: &DMatrix<Complex64>, constellation: &Constellation, amplitude: f64) -> DMatrix<usize> {
    let inv = 1.0 / amplitude;
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| constellation.nearest(x[(r, c)] * inv))
}

/// Hard-slice a soft symbol matrix onto the scaled constellation.
pub fn slice_to_constellation(
    x: &DMatrix<Complex64>,
    constellation: &Constellation,
    amplitude: f64,
) -> DMatrix<Complex64> {
    map_indices(&demap(x, constellation, amplitude), constellation, amplitude)
}

fn check_diag(diag: &DVector<f64>, rows: usize, what: &str) -> Result<()> {
    if diag.len() != rows {
        return Err(Error::shape(format!(
            "{what} diagonal has length {}, expected {rows}",
            diag.len()
        )));
    }
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::invalid(format!("{what} diagonal must be positive and finite")));
    }
    Ok(())
}

/// LMMSE detector `(H^H R^-1 H + I/sigma_d^2)^-1 H^H R^-1 Y`.
///
/// `noise_diag` is the diagonal of the per-column noise covariance
/// (`sigma^2 |p_rx|^2`, tiled across antennas in the MIMO case).
pub fn lmmse_detect(
    y_data: &DMatrix<Complex64>,
    h_dd: &DMatrix<Complex64>,
    noise_diag: &DVector<f64>,
    sigma_d2: f64,
) -> Result<DMatrix<Complex64>> {
    if y_data.nrows() != h_dd.nrows() {
        return Err(Error::shape(format!(
            "observation has {} rows, channel has {}",
            y_data.nrows(),
            h_dd.nrows()
        )));
    }
    check_diag(noise_diag, h_dd.nrows(), "noise")?;
    if !(sigma_d2 > 0.0) {
        return Err(Error::invalid("sigma_d^2 must be positive"));
    }
    // Whitened channel: rows scaled by 1/noise.
    let mut hw = h_dd.clone();
    let mut yw = y_data.clone();
    for row in 0..hw.nrows() {
        let inv = Complex64::new(1.0 / noise_diag[row], 0.0);
        for col in 0..hw.ncols() {
            hw[(row, col)] *= inv;
        }
        for col in 0..yw.ncols() {
            yw[(row, col)] *= inv;
        }
    }
    let mut normal = h_dd.adjoint() * hw;
    for i in 0..normal.nrows() {
        normal[(i, i)] += Complex64::new(1.0 / sigma_d2, 0.0);
    }
    hermitian_solve(&normal, &(h_dd.adjoint() * yw))
}

/// Regularized zero-forcing rule `(H^H H + Xi)^-1 H^H Y`, the closed form of
/// the stacked least-squares problem with penalty `|| Xi^{1/2} X ||_F^2`.
pub fn zf_uncertainty_detect(
    y_data: &DMatrix<Complex64>,
    h_hat: &DMatrix<Complex64>,
    xi: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    if y_data.nrows() != h_hat.nrows() {
        return Err(Error::shape("observation and channel row counts differ".to_string()));
    }
    if xi.nrows() != h_hat.ncols() || xi.ncols() != h_hat.ncols() {
        return Err(Error::shape(format!(
            "Xi is {}x{}, expected {}x{}",
            xi.nrows(),
            xi.ncols(),
            h_hat.ncols(),
            h_hat.ncols()
        )));
    }
    let normal = h_hat.adjoint() * h_hat + xi;
    hermitian_solve(&normal, &(h_hat.adjoint() * y_data))
}

/// Uncertainty-aware LMMSE rule
/// `H^H (H H^H + Xi + (sigma^2/sigma_d^2) diag(rx_gram))^-1 Y`.
///
/// `rx_gram` is the diagonal of `P_rx P_rx^H`, tiled across receive antennas
/// for MIMO observations.
pub fn lmmse_uncertainty_detect(
    y_data: &DMatrix<Complex64>,
    h_hat: &DMatrix<Complex64>,
    xi: &DMatrix<Complex64>,
    sigma2: f64,
    sigma_d2: f64,
    rx_gram: &DVector<f64>,
) -> Result<DMatrix<Complex64>> {
    if y_data.nrows() != h_hat.nrows() {
        return Err(Error::shape("observation and channel row counts differ".to_string()));
    }
    if xi.nrows() != h_hat.nrows() || xi.ncols() != h_hat.nrows() {
        return Err(Error::shape(format!(
            "Xi is {}x{}, expected {}x{}",
            xi.nrows(),
            xi.ncols(),
            h_hat.nrows(),
            h_hat.nrows()
        )));
    }
    check_diag(rx_gram, h_hat.nrows(), "rx pulse gram")?;
    if !(sigma_d2 > 0.0) || sigma2 < 0.0 {
        return Err(Error::invalid("noise and data powers must be valid"));
    }
    let mut gram = h_hat * h_hat.adjoint() + xi;
    let ratio = sigma2 / sigma_d2;
    for i in 0..gram.nrows() {
        gram[(i, i)] += Complex64::new(ratio * rx_gram[i], 0.0);
    }
    let filtered = hermitian_solve(&gram, y_data)?;
    Ok(h_hat.adjoint() * filtered)
}
