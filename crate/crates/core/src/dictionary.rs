//! Sparse-recovery dictionaries that linearize the channel in its grid
//! coefficients.
//!
//! Column `(i, j)` of a dictionary is the vectorized response of the known
//! symbol block to a unit path at delay tap `i` and Doppler grid column `j`,
//! enumerated delay-major. The same enumeration indexes the `zeta` matrix, so
//! one coefficient vector addresses pilot, data and reconstruction maps alike.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{basis_matrix, ChannelSupport, OtfsGrid};
use crate::linalg::{hstack, vstack};

/// Dictionary whose column `(i, j)` is `vec(B_{i,j} * X)` for the known
/// block `X`; satisfies `Omega * h = vec(H_DD(h) * X)`.
fn block_dictionary(
    x: &DMatrix<Complex64>,
    grid: &OtfsGrid,
    support: &ChannelSupport,
) -> Result<DMatrix<Complex64>> {
    support.validate_for(grid)?;
    if x.nrows() != grid.delay_bins() {
        return Err(Error::shape(format!(
            "symbol block has {} rows, expected M={}",
            x.nrows(),
            grid.delay_bins()
        )));
    }
    let m = grid.delay_bins();
    let cols = x.ncols();
    let mut out = DMatrix::zeros(m * cols, support.grid_size());
    for i in 0..support.max_delay {
        for j in 0..support.doppler_grid_points {
            let basis = basis_matrix(grid, i, support.doppler_exponent(j))?;
            let response = &basis * x;
            out.column_mut(support.cell_index(i, j))
                .copy_from_slice(response.as_slice());
        }
    }
    Ok(out)
}

/// Pilot dictionary, shape `M*K2 x M_tau*G_nu`.
pub fn pilot_dictionary(
    x_pilot: &DMatrix<Complex64>,
    grid: &OtfsGrid,
    support: &ChannelSupport,
) -> Result<DMatrix<Complex64>> {
    block_dictionary(x_pilot, grid, support)
}

/// Data dictionary, shape `M*K1 x M_tau*G_nu`.
pub fn data_dictionary(
    x_data: &DMatrix<Complex64>,
    grid: &OtfsGrid,
    support: &ChannelSupport,
) -> Result<DMatrix<Complex64>> {
    block_dictionary(x_data, grid, support)
}

/// Stacked data-over-pilot dictionary `[Omega_d; Omega_p]` matching the
/// stacked observation `[y_d; y_p]`.
pub fn joint_dictionary(
    omega_d: &DMatrix<Complex64>,
    omega_p: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    vstack(omega_d, omega_p)
}

/// MIMO pilot dictionary: per-TA dictionaries side by side,
/// shape `M*K2 x M_tau*G_nu*N_t`.
pub fn mimo_pilot_dictionary(
    pilots: &[DMatrix<Complex64>],
    grid: &OtfsGrid,
    support: &ChannelSupport,
) -> Result<DMatrix<Complex64>> {
    if pilots.is_empty() {
        return Err(Error::invalid("need at least one transmit antenna"));
    }
    let blocks: Vec<_> = pilots
        .iter()
        .map(|x| pilot_dictionary(x, grid, support))
        .collect::<Result<_>>()?;
    hstack(&blocks)
}

/// MIMO data dictionary, mirror of [`mimo_pilot_dictionary`].
pub fn mimo_data_dictionary(
    data: &[DMatrix<Complex64>],
    grid: &OtfsGrid,
    support: &ChannelSupport,
) -> Result<DMatrix<Complex64>> {
    if data.is_empty() {
        return Err(Error::invalid("need at least one transmit antenna"));
    }
    let blocks: Vec<_> = data
        .iter()
        .map(|x| data_dictionary(x, grid, support))
        .collect::<Result<_>>()?;
    hstack(&blocks)
}

/// Reconstruction matrix: column `(i, j)` is `vec(B_{i,j})`, so
/// `vec(H_DD) = zeta * h` for any coefficient vector `h`.
pub fn zeta_matrix(grid: &OtfsGrid, support: &ChannelSupport) -> Result<DMatrix<Complex64>> {
    support.validate_for(grid)?;
    let m = grid.delay_bins();
    let mut out = DMatrix::zeros(m * m, support.grid_size());
    for i in 0..support.max_delay {
        for j in 0..support.doppler_grid_points {
            let basis = basis_matrix(grid, i, support.doppler_exponent(j))?;
            out.column_mut(support.cell_index(i, j))
                .copy_from_slice(basis.as_slice());
        }
    }
    Ok(out)
}
