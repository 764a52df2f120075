//! Delay-Doppler grid geometry and the elementary channel basis matrices.
//!
//! The time-domain action of one propagation path with delay tap `l` and
//! Doppler index `k` is the matrix `Pi^l * Delta_l^k`, where `Pi` is the
//! forward cyclic shift of order `M` and `Delta_l` is a unit-modulus diagonal.
//! Every channel matrix in this crate is a gain-weighted sum of those
//! products, optionally wrapped in the transmit/receive pulse diagonals.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Frame geometry: `M` delay bins, `N` Doppler bins, subcarrier spacing and
/// symbol duration with `T * delta_f = 1`, plus the pulse-shape diagonals.
#[derive(Debug, Clone)]
pub struct OtfsGrid {
    delay_bins: usize,
    doppler_bins: usize,
    subcarrier_spacing: f64,
    symbol_duration: f64,
    tx_pulse: DVector<Complex64>,
    rx_pulse: DVector<Complex64>,
}

impl OtfsGrid {
    /// Grid with arbitrary pulse-shape diagonals.
    pub fn new(
        delay_bins: usize,
        doppler_bins: usize,
        subcarrier_spacing: f64,
        symbol_duration: f64,
        tx_pulse: DVector<Complex64>,
        rx_pulse: DVector<Complex64>,
    ) -> Result<Self> {
        if delay_bins < 2 || doppler_bins < 2 {
            return Err(Error::invalid(format!(
                "grid needs M >= 2 and N >= 2, got M={delay_bins}, N={doppler_bins}"
            )));
        }
        if subcarrier_spacing <= 0.0 || symbol_duration <= 0.0 {
            return Err(Error::invalid("subcarrier spacing and symbol duration must be positive"));
        }
        let product = symbol_duration * subcarrier_spacing;
        if (product - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "T * delta_f must equal 1 (got {product})"
            )));
        }
        if tx_pulse.len() != delay_bins || rx_pulse.len() != delay_bins {
            return Err(Error::invalid(format!(
                "pulse vectors must have length M={delay_bins}"
            )));
        }
        Ok(Self {
            delay_bins,
            doppler_bins,
            subcarrier_spacing,
            symbol_duration,
            tx_pulse,
            rx_pulse,
        })
    }

    /// Grid with rectangular (all-ones) pulses and `T = 1 / delta_f`.
    pub fn rectangular(delay_bins: usize, doppler_bins: usize, subcarrier_spacing: f64) -> Result<Self> {
        let ones = DVector::from_element(delay_bins, Complex64::new(1.0, 0.0));
        Self::new(
            delay_bins,
            doppler_bins,
            subcarrier_spacing,
            1.0 / subcarrier_spacing,
            ones.clone(),
            ones,
        )
    }

    /// Number of delay bins `M`.
    pub fn delay_bins(&self) -> usize {
        self.delay_bins
    }

    /// Number of Doppler bins `N`.
    pub fn doppler_bins(&self) -> usize {
        self.doppler_bins
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    /// Frame duration `N * T` in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.doppler_bins as f64 * self.symbol_duration
    }

    pub fn tx_pulse(&self) -> &DVector<Complex64> {
        &self.tx_pulse
    }

    pub fn rx_pulse(&self) -> &DVector<Complex64> {
        &self.rx_pulse
    }

    /// True when both pulse diagonals are exactly all-ones.
    pub fn has_rectangular_pulses(&self) -> bool {
        let one = Complex64::new(1.0, 0.0);
        self.tx_pulse.iter().all(|&p| p == one) && self.rx_pulse.iter().all(|&p| p == one)
    }
}

/// One propagation path: integer delay tap, real (possibly fractional)
/// Doppler index, complex gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDopplerPath {
    pub delay_tap: usize,
    pub doppler_index: f64,
    pub gain: Complex64,
}

impl DelayDopplerPath {
    pub fn new(delay_tap: usize, doppler_index: f64, gain: Complex64) -> Self {
        Self {
            delay_tap,
            doppler_index,
            gain,
        }
    }

    /// Check the path against a grid: `0 <= l < M` and `|k| < N/2`.
    pub fn validate(&self, grid: &OtfsGrid) -> Result<()> {
        if self.delay_tap >= grid.delay_bins() {
            return Err(Error::invalid(format!(
                "delay tap {} out of range for M={}",
                self.delay_tap,
                grid.delay_bins()
            )));
        }
        if self.doppler_index.abs() >= grid.doppler_bins() as f64 / 2.0 {
            return Err(Error::invalid(format!(
                "Doppler index {} out of range for N={}",
                self.doppler_index,
                grid.doppler_bins()
            )));
        }
        Ok(())
    }
}

/// Sparse-recovery support: maximum delay spread `M_tau`, maximum Doppler
/// spread `N_nu` and the (possibly refined) Doppler grid size `G_nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelSupport {
    pub max_delay: usize,
    pub max_doppler: usize,
    pub doppler_grid_points: usize,
}

impl ChannelSupport {
    pub fn new(max_delay: usize, max_doppler: usize, doppler_grid_points: usize) -> Result<Self> {
        if max_delay == 0 || max_doppler == 0 || doppler_grid_points == 0 {
            return Err(Error::invalid("support dimensions must be positive"));
        }
        if doppler_grid_points < max_doppler {
            return Err(Error::invalid(format!(
                "G_nu={doppler_grid_points} must be at least N_nu={max_doppler}"
            )));
        }
        Ok(Self {
            max_delay,
            max_doppler,
            doppler_grid_points,
        })
    }

    pub fn validate_for(&self, grid: &OtfsGrid) -> Result<()> {
        if self.max_delay > grid.delay_bins() {
            return Err(Error::invalid(format!(
                "M_tau={} exceeds M={}",
                self.max_delay,
                grid.delay_bins()
            )));
        }
        if self.max_doppler > grid.doppler_bins() {
            return Err(Error::invalid(format!(
                "N_nu={} exceeds N={}",
                self.max_doppler,
                grid.doppler_bins()
            )));
        }
        Ok(())
    }

    /// Total number of grid cells `M_tau * G_nu`.
    pub fn grid_size(&self) -> usize {
        self.max_delay * self.doppler_grid_points
    }

    /// Doppler exponent of grid column `j`: `j * N_nu / G_nu`.
    ///
    /// Reduces to the integer index `j` when `G_nu == N_nu`.
    pub fn doppler_exponent(&self, j: usize) -> f64 {
        j as f64 * self.max_doppler as f64 / self.doppler_grid_points as f64
    }

    /// Flat cell index for delay tap `i`, Doppler column `j` (delay-major).
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i * self.doppler_grid_points + j
    }

    /// Inverse of [`ChannelSupport::cell_index`].
    pub fn cell_coords(&self, index: usize) -> (usize, usize) {
        (index / self.doppler_grid_points, index % self.doppler_grid_points)
    }
}

/// Forward cyclic-shift matrix of order `M`: maps `e_p` to `e_{(p+1) mod M}`.
pub fn permutation_matrix(order: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(order, order);
    for col in 0..order {
        out[((col + 1) % order, col)] = Complex64::new(1.0, 0.0);
    }
    out
}

/// Signed phases of the diagonal of `Delta_l`.
///
/// For `l = 0` entry `p` carries phase `2*pi*p/(M*N)`; for `l != 0` the last
/// `l` entries wrap to the negative phases `2*pi*(p - M)/(M*N)`. The signed
/// form is what makes real powers of `Delta_l` reduce to the sample-level
/// channel recursion for any real Doppler index.
pub fn delta_phases(grid: &OtfsGrid, delay_tap: usize) -> Result<Vec<f64>> {
    let m = grid.delay_bins();
    if delay_tap >= m {
        return Err(Error::invalid(format!(
            "delay tap {delay_tap} out of range for M={m}"
        )));
    }
    let base = TAU / (m as f64 * grid.doppler_bins() as f64);
    let phases = (0..m)
        .map(|p| {
            if delay_tap != 0 && p >= m - delay_tap {
                base * (p as f64 - m as f64)
            } else {
                base * p as f64
            }
        })
        .collect();
    Ok(phases)
}

/// Diagonal Doppler matrix `Delta_l` for delay tap `l`.
pub fn delta_matrix(grid: &OtfsGrid, delay_tap: usize) -> Result<DMatrix<Complex64>> {
    let phases = delta_phases(grid, delay_tap)?;
    let diag = DVector::from_iterator(
        phases.len(),
        phases.iter().map(|&theta| Complex64::from_polar(1.0, theta)),
    );
    Ok(DMatrix::from_diagonal(&diag))
}

/// Composite basis matrix `P_rx * Pi^l * Delta_l^k * P_tx`.
///
/// The real power `Delta_l^k` is taken elementwise on the signed phases, so
/// integer `k` reproduces the plain matrix power.
pub fn basis_matrix(grid: &OtfsGrid, delay_tap: usize, doppler_exponent: f64) -> Result<DMatrix<Complex64>> {
    let m = grid.delay_bins();
    let phases = delta_phases(grid, delay_tap)?;
    let mut out = DMatrix::zeros(m, m);
    for q in 0..m {
        let p = (q + delay_tap) % m;
        out[(p, q)] = grid.rx_pulse()[p]
            * Complex64::from_polar(1.0, doppler_exponent * phases[q])
            * grid.tx_pulse()[q];
    }
    Ok(out)
}

/// Time-domain basis `Pi^l * Delta_l^k` without the pulse diagonals.
pub fn td_basis_matrix(grid: &OtfsGrid, delay_tap: usize, doppler_exponent: f64) -> Result<DMatrix<Complex64>> {
    let m = grid.delay_bins();
    let phases = delta_phases(grid, delay_tap)?;
    let mut out = DMatrix::zeros(m, m);
    for q in 0..m {
        out[((q + delay_tap) % m, q)] = Complex64::from_polar(1.0, doppler_exponent * phases[q]);
    }
    Ok(out)
}

/// Doppler shift in Hz of grid column `j`: `j * N_nu / (G_nu * N * T)`.
pub fn doppler_grid_value(j: usize, support: &ChannelSupport, grid: &OtfsGrid) -> Result<f64> {
    if j >= support.doppler_grid_points {
        return Err(Error::invalid(format!(
            "Doppler grid index {j} out of range for G_nu={}",
            support.doppler_grid_points
        )));
    }
    Ok(support.doppler_exponent(j) / grid.frame_duration())
}

/// Effective delay-Doppler channel `H_DD = sum_i h_i * P_rx Pi^{l_i} Delta^{k_i} P_tx`.
pub fn effective_dd_channel(grid: &OtfsGrid, paths: &[DelayDopplerPath]) -> Result<DMatrix<Complex64>> {
    let m = grid.delay_bins();
    let mut out = DMatrix::zeros(m, m);
    for path in paths {
        path.validate(grid)?;
        let phases = delta_phases(grid, path.delay_tap)?;
        for q in 0..m {
            let p = (q + path.delay_tap) % m;
            out[(p, q)] += path.gain
                * grid.rx_pulse()[p]
                * Complex64::from_polar(1.0, path.doppler_index * phases[q])
                * grid.tx_pulse()[q];
        }
    }
    Ok(out)
}

/// Time-domain channel matrix `H = sum_i h_i * Pi^{l_i} Delta^{k_i}`.
///
/// Satisfies `H_DD = P_rx * H * P_tx`.
pub fn td_channel_matrix(grid: &OtfsGrid, paths: &[DelayDopplerPath]) -> Result<DMatrix<Complex64>> {
    let m = grid.delay_bins();
    let mut out = DMatrix::zeros(m, m);
    for path in paths {
        path.validate(grid)?;
        let phases = delta_phases(grid, path.delay_tap)?;
        for q in 0..m {
            out[((q + path.delay_tap) % m, q)] +=
                path.gain * Complex64::from_polar(1.0, path.doppler_index * phases[q]);
        }
    }
    Ok(out)
}
