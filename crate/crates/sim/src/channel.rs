//! Channel realization drawing: fixed tap-delay profiles and random sparse
//! channels, SISO or MIMO with one shared support.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use otfs_core::grid::{ChannelSupport, DelayDopplerPath};
use otfs_core::modem::MimoChannel;

use crate::config::{ChannelSource, ExperimentConfig};
use crate::error::{Error, Result};

/// One drawn channel: a path list for SISO, shared-support gains for MIMO.
#[derive(Debug, Clone)]
pub enum GeneratedChannel {
    Siso(Vec<DelayDopplerPath>),
    Mimo(MimoChannel),
}

impl GeneratedChannel {
    /// Tap support as `(delay tap, Doppler index)` pairs.
    pub fn taps(&self) -> Vec<(usize, f64)> {
        match self {
            GeneratedChannel::Siso(paths) => {
                paths.iter().map(|p| (p.delay_tap, p.doppler_index)).collect()
            }
            GeneratedChannel::Mimo(ch) => ch.taps().to_vec(),
        }
    }

    /// Per-tap mean squared gain across antenna pairs.
    pub fn tap_powers(&self) -> Vec<f64> {
        match self {
            GeneratedChannel::Siso(paths) => paths.iter().map(|p| p.gain.norm_sqr()).collect(),
            GeneratedChannel::Mimo(ch) => (0..ch.taps().len())
                .map(|idx| {
                    let mut acc = 0.0;
                    let mut count = 0usize;
                    for r in 0..ch.n_rx() {
                        for t in 0..ch.n_tx() {
                            acc += ch.paths_for(r, t)[idx].gain.norm_sqr();
                            count += 1;
                        }
                    }
                    acc / count as f64
                })
                .collect(),
        }
    }
}

fn complex_normal<R: Rng>(std: f64, rng: &mut R) -> Complex64 {
    let scale = std / 2.0f64.sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

/// Tap support implied by the configured channel source.
fn draw_taps<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<Vec<(usize, f64, Complex64)>> {
    let support = ChannelSupport::new(cfg.m_tau, cfg.n_nu, cfg.g_nu)
        .map_err(|e| Error::config(e.to_string()))?;
    match &cfg.channel {
        ChannelSource::FixedProfile {
            delays_us,
            dopplers_hz,
            gains,
            fractional,
            rayleigh_gains,
        } => {
            let frame_duration = cfg.n as f64 / cfg.subcarrier_spacing_hz;
            let mut taps = Vec::with_capacity(delays_us.len());
            for ((&delay_us, &doppler_hz), &gain) in
                delays_us.iter().zip(dopplers_hz).zip(gains)
            {
                let l_float = delay_us * 1e-6 * cfg.m as f64 * cfg.subcarrier_spacing_hz;
                let l = l_float.round();
                if l < 0.0 || l as usize >= cfg.m_tau {
                    return Err(Error::config(format!(
                        "profile delay {delay_us} us maps to tap {l}, outside the support M_tau={}",
                        cfg.m_tau
                    )));
                }
                let k_raw = doppler_hz * frame_duration;
                let k = if *fractional { k_raw } else { k_raw.round() };
                if k < 0.0 || k >= cfg.n_nu as f64 {
                    return Err(Error::config(format!(
                        "profile Doppler {doppler_hz} Hz maps to index {k}, outside the support N_nu={}",
                        cfg.n_nu
                    )));
                }
                let gain = if *rayleigh_gains {
                    complex_normal(gain.norm(), rng)
                } else {
                    gain
                };
                taps.push((l as usize, k, gain));
            }
            Ok(taps)
        }
        ChannelSource::RandomOnGrid { l_p } => {
            let mut cells: Vec<usize> = (0..support.grid_size()).collect();
            cells.shuffle(rng);
            cells.truncate(*l_p);
            cells.sort_unstable();
            let std = (1.0 / *l_p as f64).sqrt();
            Ok(cells
                .into_iter()
                .map(|cell| {
                    let (i, j) = support.cell_coords(cell);
                    (i, support.doppler_exponent(j), complex_normal(std, rng))
                })
                .collect())
        }
        ChannelSource::RandomFractional { l_p } => {
            let std = (1.0 / *l_p as f64).sqrt();
            Ok((0..*l_p)
                .map(|_| {
                    (
                        rng.random_range(0..cfg.m_tau),
                        rng.random_range(0.0..cfg.n_nu as f64),
                        complex_normal(std, rng),
                    )
                })
                .collect())
        }
    }
}

/// Draw one channel realization.
///
/// MIMO channels reuse the drawn support with independent per-antenna-pair
/// gains of the same per-tap power.
pub fn generate_channel<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<GeneratedChannel> {
    let taps = draw_taps(cfg, rng)?;
    if !cfg.is_mimo() {
        return Ok(GeneratedChannel::Siso(
            taps.into_iter()
                .map(|(l, k, gain)| DelayDopplerPath::new(l, k, gain))
                .collect(),
        ));
    }
    let support: Vec<(usize, f64)> = taps.iter().map(|&(l, k, _)| (l, k)).collect();
    let gains = taps
        .iter()
        .map(|&(_, _, gain)| {
            let std = gain.norm();
            DMatrix::from_fn(cfg.n_rx, cfg.n_tx, |_, _| complex_normal(std, rng))
        })
        .collect();
    Ok(GeneratedChannel::Mimo(
        MimoChannel::new(support, gains).map_err(|e| Error::config(e.to_string()))?,
    ))
}
