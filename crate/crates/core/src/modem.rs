//! OTFS transmit/receive chain.
//!
//! Modulation is `S = P_tx * X_DD * F_N^H`; the channel acts column-wise in
//! the time domain as `R = H * S + W` (the per-column cyclic prefix is never
//! materialized, the circulant matrix model already encodes it); and
//! demodulation is `Y_DD = P_rx * R * F_N`. Noise-free, the whole chain
//! collapses to `Y_DD = H_DD * X_DD`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::{self, DelayDopplerPath, OtfsGrid};
use crate::precoding::{fourier_matrix, superimpose, DdFrame, PrecoderPair};

/// Antenna counts of a MIMO link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MimoConfig {
    pub n_tx: usize,
    pub n_rx: usize,
}

impl MimoConfig {
    pub fn new(n_tx: usize, n_rx: usize) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::invalid("antenna counts must be at least 1"));
        }
        Ok(Self { n_tx, n_rx })
    }
}

/// MIMO channel with one delay/Doppler support shared by every antenna pair
/// and per-pair complex gains.
#[derive(Debug, Clone)]
pub struct MimoChannel {
    taps: Vec<(usize, f64)>,
    /// One `N_r x N_t` gain matrix per tap.
    gains: Vec<DMatrix<Complex64>>,
}

impl MimoChannel {
    pub fn new(taps: Vec<(usize, f64)>, gains: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if taps.len() != gains.len() {
            return Err(Error::shape(format!(
                "{} taps but {} gain matrices",
                taps.len(),
                gains.len()
            )));
        }
        if let Some(first) = gains.first() {
            if gains.iter().any(|g| g.shape() != first.shape()) {
                return Err(Error::shape("gain matrices must all be N_r x N_t"));
            }
        }
        Ok(Self { taps, gains })
    }

    pub fn n_rx(&self) -> usize {
        self.gains.first().map(|g| g.nrows()).unwrap_or(0)
    }

    pub fn n_tx(&self) -> usize {
        self.gains.first().map(|g| g.ncols()).unwrap_or(0)
    }

    pub fn taps(&self) -> &[(usize, f64)] {
        &self.taps
    }

    /// Path list seen by the antenna pair `(r, t)`.
    pub fn paths_for(&self, r: usize, t: usize) -> Vec<DelayDopplerPath> {
        self.taps
            .iter()
            .zip(&self.gains)
            .map(|(&(l, k), g)| DelayDopplerPath::new(l, k, g[(r, t)]))
            .collect()
    }

    /// Stacked DD-domain channel `blkmtx{H_{r,t}}`, shape `M*N_r x M*N_t`.
    pub fn stacked_dd_channel(&self, grid: &OtfsGrid) -> Result<DMatrix<Complex64>> {
        let m = grid.delay_bins();
        let (n_rx, n_tx) = (self.n_rx(), self.n_tx());
        let mut out = DMatrix::zeros(m * n_rx, m * n_tx);
        for r in 0..n_rx {
            for t in 0..n_tx {
                let block = grid::effective_dd_channel(grid, &self.paths_for(r, t))?;
                out.view_mut((r * m, t * m), (m, m)).copy_from(&block);
            }
        }
        Ok(out)
    }
}

/// I.i.d. circular complex Gaussian matrix with per-entry variance `sigma^2`.
pub fn complex_gaussian_matrix<R: Rng>(
    rows: usize,
    cols: usize,
    sigma: f64,
    rng: &mut R,
) -> DMatrix<Complex64> {
    let scale = sigma / 2.0f64.sqrt();
    // draw order is column-major so matched-noise tests can replay the stream
    let mut out = DMatrix::zeros(rows, cols);
    for col in 0..cols {
        for row in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[(row, col)] = Complex64::new(re * scale, im * scale);
        }
    }
    out
}

/// OTFS modulation `S = P_tx * X_DD * F_N^H`.
pub fn otfs_modulate(x_dd: &DMatrix<Complex64>, grid: &OtfsGrid) -> Result<DMatrix<Complex64>> {
    check_frame_shape(x_dd, grid)?;
    let f = fourier_matrix(grid.doppler_bins());
    let mut s = x_dd * f.adjoint();
    scale_rows(&mut s, grid.tx_pulse());
    Ok(s)
}

/// OTFS demodulation `Y_DD = P_rx * R * F_N`.
pub fn otfs_demodulate(r: &DMatrix<Complex64>, grid: &OtfsGrid) -> Result<DMatrix<Complex64>> {
    check_frame_shape(r, grid)?;
    let f = fourier_matrix(grid.doppler_bins());
    let mut y = r * f;
    scale_rows(&mut y, grid.rx_pulse());
    Ok(y)
}

/// Pass the time-domain symbol matrix through the channel: `R = H*S + W`
/// with i.i.d. complex Gaussian noise of per-entry variance `noise_std^2`.
pub fn apply_td_channel<R: Rng>(
    s: &DMatrix<Complex64>,
    paths: &[DelayDopplerPath],
    grid: &OtfsGrid,
    noise_std: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if noise_std < 0.0 {
        return Err(Error::invalid("noise standard deviation must be nonnegative"));
    }
    let h = grid::td_channel_matrix(grid, paths)?;
    let mut r = h * s;
    if noise_std > 0.0 {
        r += complex_gaussian_matrix(r.nrows(), r.ncols(), noise_std, rng);
    }
    Ok(r)
}

/// Direct sample-level evaluation of the received column:
/// `r(p) = sum_i h_i * exp(j*2*pi*k_i*(p - l_i)/(M*N)) * s((p - l_i) mod M)`.
///
/// Test oracle for the matrix-form channel; the map is identical for every
/// column of the frame.
pub fn sample_level_oracle(
    s_col: &DVector<Complex64>,
    paths: &[DelayDopplerPath],
    grid: &OtfsGrid,
) -> Result<DVector<Complex64>> {
    let m = grid.delay_bins();
    if s_col.len() != m {
        return Err(Error::shape(format!(
            "column length {} does not match M={m}",
            s_col.len()
        )));
    }
    let mn = (m * grid.doppler_bins()) as f64;
    let mut out = DVector::zeros(m);
    for path in paths {
        path.validate(grid)?;
        for p in 0..m {
            let shift = p as isize - path.delay_tap as isize;
            let phase = TAU * path.doppler_index * shift as f64 / mn;
            let idx = shift.rem_euclid(m as isize) as usize;
            out[p] += path.gain * Complex64::from_polar(1.0, phase) * s_col[idx];
        }
    }
    Ok(out)
}

/// Full SISO chain: superimpose, modulate, channel plus noise, demodulate.
pub fn simulate_frame<R: Rng>(
    frame: &DdFrame,
    pc: &PrecoderPair,
    paths: &[DelayDopplerPath],
    grid: &OtfsGrid,
    noise_std: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    let x_dd = superimpose(frame, pc)?;
    let s = otfs_modulate(&x_dd, grid)?;
    let r = apply_td_channel(&s, paths, grid, noise_std, rng)?;
    otfs_demodulate(&r, grid)
}

/// Full MIMO chain: per-TA frames through the shared-support channel, the
/// per-RA outputs row-stacked into an `M*N_r x N` matrix.
pub fn simulate_mimo_frame<R: Rng>(
    frames: &[DdFrame],
    pc: &PrecoderPair,
    channel: &MimoChannel,
    grid: &OtfsGrid,
    mimo: &MimoConfig,
    noise_std: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if frames.len() != mimo.n_tx {
        return Err(Error::shape(format!(
            "{} frames for {} transmit antennas",
            frames.len(),
            mimo.n_tx
        )));
    }
    if channel.n_rx() != mimo.n_rx || channel.n_tx() != mimo.n_tx {
        return Err(Error::shape(format!(
            "channel is {}x{}, config wants {}x{}",
            channel.n_rx(),
            channel.n_tx(),
            mimo.n_rx,
            mimo.n_tx
        )));
    }
    if noise_std < 0.0 {
        return Err(Error::invalid("noise standard deviation must be nonnegative"));
    }
    let m = grid.delay_bins();
    let n = grid.doppler_bins();
    let tx_signals: Vec<DMatrix<Complex64>> = frames
        .iter()
        .map(|f| otfs_modulate(&superimpose(f, pc)?, grid))
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(m * mimo.n_rx, n);
    for r in 0..mimo.n_rx {
        let mut received = DMatrix::zeros(m, n);
        for (t, s) in tx_signals.iter().enumerate() {
            let h = grid::td_channel_matrix(grid, &channel.paths_for(r, t))?;
            received += h * s;
        }
        if noise_std > 0.0 {
            received += complex_gaussian_matrix(m, n, noise_std, rng);
        }
        out.view_mut((r * m, 0), (m, n))
            .copy_from(&otfs_demodulate(&received, grid)?);
    }
    Ok(out)
}

fn check_frame_shape(x: &DMatrix<Complex64>, grid: &OtfsGrid) -> Result<()> {
    if x.nrows() != grid.delay_bins() || x.ncols() != grid.doppler_bins() {
        return Err(Error::shape(format!(
            "expected {}x{} frame, got {}x{}",
            grid.delay_bins(),
            grid.doppler_bins(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

fn scale_rows(x: &mut DMatrix<Complex64>, diag: &DVector<Complex64>) {
    for row in 0..x.nrows() {
        let d = diag[row];
        for col in 0..x.ncols() {
            x[(row, col)] *= d;
        }
    }
}
