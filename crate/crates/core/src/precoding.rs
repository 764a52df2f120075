//! Semi-orthogonal pilot/data precoders and frame superposition.
//!
//! The pilot precoder `P` (N x K2) and data precoder `D` (N x K1) are column
//! blocks of one unitary matrix, so `P^H P = I`, `D^H D = I` and the cross
//! products vanish. Superimposing `X_d D^H + X_p P^H` therefore lets the
//! receiver split the two streams exactly by post-multiplication, at any SNR.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Source of the unitary matrix the precoder columns are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitarySource {
    /// Unitary N-point Fourier matrix (default: spreads pilot energy over
    /// all Doppler bins deterministically).
    Fourier,
    /// Identity matrix; reduces superposition to column-embedded pilots.
    Identity,
    /// Orthogonalization of a seeded complex Gaussian matrix.
    RandomUnitary { seed: u64 },
}

/// Pilot/data precoder pair cut from one unitary matrix.
#[derive(Debug, Clone)]
pub struct PrecoderPair {
    pilot: DMatrix<Complex64>,
    data: DMatrix<Complex64>,
}

impl PrecoderPair {
    /// Pilot precoder `P`, shape `N x K2`.
    pub fn pilot(&self) -> &DMatrix<Complex64> {
        &self.pilot
    }

    /// Data precoder `D`, shape `N x K1`.
    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn frame_len(&self) -> usize {
        self.pilot.nrows()
    }

    pub fn pilot_cols(&self) -> usize {
        self.pilot.ncols()
    }

    pub fn data_cols(&self) -> usize {
        self.data.ncols()
    }

    /// Largest deviation from the four semi-orthogonality identities.
    pub fn orthogonality_defect(&self) -> f64 {
        let k2 = self.pilot.ncols();
        let k1 = self.data.ncols();
        let pp = self.pilot.adjoint() * &self.pilot - DMatrix::<Complex64>::identity(k2, k2);
        let dd = self.data.adjoint() * &self.data - DMatrix::<Complex64>::identity(k1, k1);
        let pd = self.pilot.adjoint() * &self.data;
        let dp = self.data.adjoint() * &self.pilot;
        pp.norm().max(dd.norm()).max(pd.norm()).max(dp.norm())
    }
}

/// Unitary N-point Fourier matrix `F(p,q) = exp(-j*2*pi*p*q/N) / sqrt(N)`.
pub fn fourier_matrix(n: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |p, q| {
        Complex64::from_polar(scale, -TAU * (p * q) as f64 / n as f64)
    })
}

fn unitary_matrix(n: usize, source: UnitarySource) -> DMatrix<Complex64> {
    match source {
        UnitarySource::Fourier => fourier_matrix(n),
        UnitarySource::Identity => DMatrix::identity(n, n),
        UnitarySource::RandomUnitary { seed } => {
            use rand::SeedableRng;
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let g = DMatrix::from_fn(n, n, |_, _| {
                Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng))
            });
            g.qr().q()
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Build a precoder pair by partitioning the columns of a unitary matrix:
/// `P` takes the first `k2` columns, `D` the remaining `N - k2`.
pub fn make_precoders(n: usize, k2: usize, source: UnitarySource) -> Result<PrecoderPair> {
    if k2 == 0 || k2 >= n {
        return Err(Error::invalid(format!(
            "pilot width K2 must satisfy 1 <= K2 < N (got K2={k2}, N={n})"
        )));
    }
    let u = unitary_matrix(n, source);
    let pilot = u.columns(0, k2).into_owned();
    let data = u.columns(k2, n - k2).into_owned();
    Ok(PrecoderPair { pilot, data })
}

/// Data and pilot blocks of one delay-Doppler frame with their power split.
#[derive(Debug, Clone)]
pub struct DdFrame {
    pub data: DMatrix<Complex64>,
    pub pilot: DMatrix<Complex64>,
    pub sigma_d2: f64,
    pub sigma_p2: f64,
}

impl DdFrame {
    pub fn new(
        data: DMatrix<Complex64>,
        pilot: DMatrix<Complex64>,
        sigma_d2: f64,
        sigma_p2: f64,
    ) -> Result<Self> {
        if data.nrows() != pilot.nrows() {
            return Err(Error::shape(format!(
                "data and pilot blocks must share M rows ({} vs {})",
                data.nrows(),
                pilot.nrows()
            )));
        }
        if (sigma_d2 + sigma_p2 - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "power split must satisfy sigma_d^2 + sigma_p^2 = 1 (got {})",
                sigma_d2 + sigma_p2
            )));
        }
        Ok(Self {
            data,
            pilot,
            sigma_d2,
            sigma_p2,
        })
    }

    /// Empirical pilot power `Tr(X_p X_p^H) / (M * K2)`.
    pub fn empirical_pilot_power(&self) -> f64 {
        let m = self.pilot.nrows() * self.pilot.ncols();
        if m == 0 {
            return 0.0;
        }
        self.pilot.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64
    }
}

/// Unit-modulus 4-PSK pilot symbols scaled so the per-element power is
/// exactly `sigma_p2`.
pub fn random_pilot_matrix<R: Rng>(
    m: usize,
    k2: usize,
    sigma_p2: f64,
    rng: &mut R,
) -> DMatrix<Complex64> {
    let radius = sigma_p2.sqrt();
    DMatrix::from_fn(m, k2, |_, _| {
        let quadrant = rng.random_range(0..4u8);
        Complex64::from_polar(radius, TAU / 8.0 + TAU / 4.0 * quadrant as f64)
    })
}

/// Superimpose the frame into the DD-domain matrix `X_DD = X_d D^H + X_p P^H`.
pub fn superimpose(frame: &DdFrame, pc: &PrecoderPair) -> Result<DMatrix<Complex64>> {
    if frame.data.ncols() != pc.data_cols() || frame.pilot.ncols() != pc.pilot_cols() {
        return Err(Error::shape(format!(
            "frame blocks ({}, {}) do not match precoder widths ({}, {})",
            frame.data.ncols(),
            frame.pilot.ncols(),
            pc.data_cols(),
            pc.pilot_cols()
        )));
    }
    Ok(&frame.data * pc.data().adjoint() + &frame.pilot * pc.pilot().adjoint())
}

/// Post-multiply a received DD matrix by one precoder block, extracting the
/// corresponding stream exactly (the other stream is annihilated).
pub fn decouple(y: &DMatrix<Complex64>, precoder: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if y.ncols() != precoder.nrows() {
        return Err(Error::shape(format!(
            "cannot decouple: Y has {} columns, precoder has {} rows",
            y.ncols(),
            precoder.nrows()
        )));
    }
    Ok(y * precoder)
}
