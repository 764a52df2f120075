//! Experiment configuration: a flat `key = value` text format with arrays as
//! comma-separated lists. Unknown keys are an error.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use otfs_core::detection::ModulationKind;
use otfs_core::estimators::EmSettings;
use otfs_core::precoding::UnitarySource;

use crate::error::{Error, Result};

/// Estimation / detection schemes the harness can run per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Mmse,
    PaBl,
    DaBlZf,
    DaBlLmmse,
    PerfectCsi,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Mmse => "mmse",
            Scheme::PaBl => "pa_bl",
            Scheme::DaBlZf => "da_bl_zf",
            Scheme::DaBlLmmse => "da_bl_lmmse",
            Scheme::PerfectCsi => "perfect_csi",
        }
    }

    pub fn uses_em(&self) -> bool {
        matches!(self, Scheme::PaBl | Scheme::DaBlZf | Scheme::DaBlLmmse)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmse" => Ok(Scheme::Mmse),
            "pa_bl" => Ok(Scheme::PaBl),
            "da_bl_zf" => Ok(Scheme::DaBlZf),
            "da_bl_lmmse" => Ok(Scheme::DaBlLmmse),
            "perfect_csi" => Ok(Scheme::PerfectCsi),
            other => Err(Error::config(format!("unknown scheme '{other}'"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How channel realizations are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    /// User-supplied tap-delay profile; Doppler indices are rounded to the
    /// nearest integer unless `doppler_rounding = fractional`.
    FixedProfile {
        delays_us: Vec<f64>,
        dopplers_hz: Vec<f64>,
        gains: Vec<Complex64>,
        fractional: bool,
        /// Redraw per-trial complex gains with the profile powers instead of
        /// using the listed gains verbatim.
        rayleigh_gains: bool,
    },
    /// `l_p` distinct cells of the estimation grid, gains `CN(0, 1/L_p)`.
    RandomOnGrid { l_p: usize },
    /// Integer delays with continuous Doppler indices in `[0, N_nu)`.
    RandomFractional { l_p: usize },
}

/// Pulse-shape selection.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape {
    Rectangular,
    Custom {
        tx: Vec<Complex64>,
        rx: Vec<Complex64>,
    },
}

/// Full description of one simulation campaign.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub subcarrier_spacing_hz: f64,
    pub k1: usize,
    pub k2: usize,
    pub m_tau: usize,
    pub n_nu: usize,
    pub g_nu: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub modulation: ModulationKind,
    pub sigma_d2: f64,
    pub sigma_p2: f64,
    pub pulse: PulseShape,
    pub channel: ChannelSource,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub em: EmSettings,
    pub seed: u64,
    pub precoder: UnitarySource,
}

impl ExperimentConfig {
    pub fn is_mimo(&self) -> bool {
        self.n_tx > 1 || self.n_rx > 1
    }

    /// Average transmit power per DD-grid entry,
    /// `(K1 sigma_d^2 + K2 sigma_p^2) / N`.
    pub fn average_frame_power(&self) -> f64 {
        (self.k1 as f64 * self.sigma_d2 + self.k2 as f64 * self.sigma_p2) / self.n as f64
    }

    /// Noise variance realizing the requested receive SNR against the actual
    /// per-entry signal power.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.average_frame_power() * 10f64.powf(-snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 {
            return Err(Error::config("m and n must be at least 2"));
        }
        if self.k1 + self.k2 != self.n {
            return Err(Error::config(format!(
                "k1 + k2 must equal n ({} + {} != {})",
                self.k1, self.k2, self.n
            )));
        }
        if self.k2 == 0 || self.k2 >= self.n {
            return Err(Error::config("k2 must satisfy 1 <= k2 < n"));
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::config("subcarrier_spacing_hz must be positive"));
        }
        if (self.sigma_d2 + self.sigma_p2 - 1.0).abs() > 1e-9 {
            return Err(Error::config("sigma_d2 + sigma_p2 must equal 1"));
        }
        if !(self.sigma_d2 > 0.0) || !(self.sigma_p2 > 0.0) {
            return Err(Error::config("power split entries must be positive"));
        }
        if self.m_tau == 0 || self.m_tau > self.m {
            return Err(Error::config("m_tau must satisfy 1 <= m_tau <= m"));
        }
        if self.n_nu == 0 || self.n_nu > self.n {
            return Err(Error::config("n_nu must satisfy 1 <= n_nu <= n"));
        }
        if self.g_nu < self.n_nu {
            return Err(Error::config("g_nu must be at least n_nu"));
        }
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(Error::config("nt and nr must be at least 1"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db list must not be empty"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes list must not be empty"));
        }
        if self.is_mimo()
            && self.n_tx != self.n_rx
            && self.schemes.contains(&Scheme::DaBlLmmse)
        {
            return Err(Error::config(
                "da_bl_lmmse requires nt == nr; use da_bl_zf for asymmetric arrays",
            ));
        }
        if let PulseShape::Custom { tx, rx } = &self.pulse {
            if tx.len() != self.m || rx.len() != self.m {
                return Err(Error::config("custom pulse vectors must have length m"));
            }
        }
        match &self.channel {
            ChannelSource::FixedProfile {
                delays_us,
                dopplers_hz,
                gains,
                ..
            } => {
                if delays_us.is_empty()
                    || delays_us.len() != dopplers_hz.len()
                    || delays_us.len() != gains.len()
                {
                    return Err(Error::config(
                        "profile_delays_us, profile_dopplers_hz and profile_gains must be non-empty lists of equal length",
                    ));
                }
            }
            ChannelSource::RandomOnGrid { l_p } | ChannelSource::RandomFractional { l_p } => {
                if *l_p == 0 {
                    return Err(Error::config("l_p must be at least 1"));
                }
                if *l_p > self.m_tau * self.g_nu {
                    return Err(Error::config("l_p cannot exceed the number of grid cells"));
                }
            }
        }
        self.em.validate().map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::config(format!("duplicate key '{key}'")));
            }
        }
        build_config(entries)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(format!("key '{key}': {e}")))
}

fn required<T: FromStr>(key: &str, value: Option<String>) -> Result<T>
where
    T::Err: fmt::Display,
{
    match value {
        Some(v) => parse(key, &v),
        None => Err(Error::config(format!("missing required key '{key}'"))),
    }
}

fn optional<T: FromStr>(key: &str, value: Option<String>, default: T) -> Result<T>
where
    T::Err: fmt::Display,
{
    match value {
        Some(v) => parse(key, &v),
        None => Ok(default),
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|item| parse(key, item.trim())).collect()
}

fn build_config(mut entries: BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let mut take = |key: &str| entries.remove(key);

    let m: usize = required("m", take("m"))?;
    let n: usize = required("n", take("n"))?;
    let subcarrier_spacing_hz: f64 =
        required("subcarrier_spacing_hz", take("subcarrier_spacing_hz"))?;
    let k2: usize = required("k2", take("k2"))?;
    let k1: usize = optional("k1", take("k1"), n.saturating_sub(k2))?;
    let m_tau: usize = required("m_tau", take("m_tau"))?;
    let n_nu: usize = required("n_nu", take("n_nu"))?;
    let g_nu: usize = optional("g_nu", take("g_nu"), n_nu)?;
    let n_tx: usize = optional("nt", take("nt"), 1)?;
    let n_rx: usize = optional("nr", take("nr"), 1)?;

    let modulation = match take("modulation").as_deref() {
        None | Some("psk4") => ModulationKind::Psk4,
        Some("qam16") => ModulationKind::Qam16,
        Some("qam64") => ModulationKind::Qam64,
        Some(other) => return Err(Error::config(format!("unknown modulation '{other}'"))),
    };

    let sigma_d2: f64 = optional("sigma_d2", take("sigma_d2"), 0.5)?;
    let sigma_p2: f64 = optional("sigma_p2", take("sigma_p2"), 0.5)?;

    let tx_pulse = take("tx_pulse");
    let rx_pulse = take("rx_pulse");
    let pulse = match take("pulse").as_deref() {
        None | Some("rectangular") => {
            if tx_pulse.is_some() || rx_pulse.is_some() {
                return Err(Error::config(
                    "tx_pulse/rx_pulse given but pulse is rectangular; set pulse = custom",
                ));
            }
            PulseShape::Rectangular
        }
        Some("custom") => {
            let tx = tx_pulse
                .ok_or_else(|| Error::config("pulse = custom needs tx_pulse"))
                .and_then(|v| parse_complex_list("tx_pulse", &v))?;
            let rx = rx_pulse
                .ok_or_else(|| Error::config("pulse = custom needs rx_pulse"))
                .and_then(|v| parse_complex_list("rx_pulse", &v))?;
            PulseShape::Custom { tx, rx }
        }
        Some(other) => return Err(Error::config(format!("unknown pulse shape '{other}'"))),
    };

    let rayleigh_gains = match take("profile_gain_mode").as_deref() {
        None | Some("fixed") => false,
        Some("rayleigh") => true,
        Some(other) => {
            return Err(Error::config(format!(
                "profile_gain_mode must be 'fixed' or 'rayleigh', got '{other}'"
            )))
        }
    };
    let fractional_rounding = match take("doppler_rounding").as_deref() {
        None | Some("integer") => false,
        Some("fractional") => true,
        Some(other) => {
            return Err(Error::config(format!(
                "doppler_rounding must be 'integer' or 'fractional', got '{other}'"
            )))
        }
    };

    let l_p = take("l_p");
    let profile_delays = take("profile_delays_us");
    let profile_dopplers = take("profile_dopplers_hz");
    let profile_gains = take("profile_gains");
    let channel = match take("channel").as_deref() {
        None | Some("random_on_grid") => ChannelSource::RandomOnGrid {
            l_p: required("l_p", l_p)?,
        },
        Some("random_fractional") => ChannelSource::RandomFractional {
            l_p: required("l_p", l_p)?,
        },
        Some("fixed_profile") => {
            if l_p.is_some() {
                return Err(Error::config("l_p is not used with fixed_profile"));
            }
            let delays_us: Vec<f64> = match profile_delays {
                Some(v) => list("profile_delays_us", &v)?,
                None => return Err(Error::config("fixed_profile needs profile_delays_us")),
            };
            let dopplers_hz: Vec<f64> = match profile_dopplers {
                Some(v) => list("profile_dopplers_hz", &v)?,
                None => return Err(Error::config("fixed_profile needs profile_dopplers_hz")),
            };
            let gains = match profile_gains {
                Some(v) => parse_complex_list("profile_gains", &v)?,
                None => return Err(Error::config("fixed_profile needs profile_gains")),
            };
            ChannelSource::FixedProfile {
                delays_us,
                dopplers_hz,
                gains,
                fractional: fractional_rounding,
                rayleigh_gains,
            }
        }
        Some(other) => return Err(Error::config(format!("unknown channel source '{other}'"))),
    };

    let snr_db: Vec<f64> = match take("snr_db") {
        Some(v) => list("snr_db", &v)?,
        None => return Err(Error::config("missing required key 'snr_db'")),
    };
    let trials: usize = required("trials", take("trials"))?;
    let schemes: Vec<Scheme> = match take("schemes") {
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse::<Scheme>())
            .collect::<Result<_>>()?,
        None => return Err(Error::config("missing required key 'schemes'")),
    };

    let em = EmSettings {
        epsilon: optional("em_epsilon", take("em_epsilon"), 1e-6)?,
        max_iters: optional("em_max_iters", take("em_max_iters"), 50)?,
        lambda_floor: optional("lambda_floor", take("lambda_floor"), 1e-12)?,
    };

    let seed: u64 = optional("seed", take("seed"), 0)?;
    let precoder_seed = take("precoder_seed");
    let precoder = match take("precoder").as_deref() {
        None | Some("fourier") => {
            if precoder_seed.is_some() {
                return Err(Error::config("precoder_seed needs precoder = random"));
            }
            UnitarySource::Fourier
        }
        Some("identity") => {
            if precoder_seed.is_some() {
                return Err(Error::config("precoder_seed needs precoder = random"));
            }
            UnitarySource::Identity
        }
        Some("random") => UnitarySource::RandomUnitary {
            seed: optional("precoder_seed", precoder_seed, seed)?,
        },
        Some(other) => return Err(Error::config(format!("unknown precoder source '{other}'"))),
    };

    if let Some(unknown) = entries.keys().next() {
        return Err(Error::config(format!("unknown key '{unknown}'")));
    }

    let cfg = ExperimentConfig {
        m,
        n,
        subcarrier_spacing_hz,
        k1,
        k2,
        m_tau,
        n_nu,
        g_nu,
        n_tx,
        n_rx,
        modulation,
        sigma_d2,
        sigma_p2,
        pulse,
        channel,
        snr_db,
        trials,
        schemes,
        em,
        seed,
        precoder,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parse a complex number written as `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::config("empty complex literal"));
    }
    if let Some(body) = t.strip_suffix(['i', 'j']) {
        // locate the sign splitting real and imaginary parts, skipping the
        // leading sign and exponent signs
        let bytes = body.as_bytes();
        let mut split = None;
        for pos in (1..bytes.len()).rev() {
            let ch = bytes[pos] as char;
            if (ch == '+' || ch == '-') && !matches!(bytes[pos - 1] as char, 'e' | 'E') {
                split = Some(pos);
                break;
            }
        }
        match split {
            Some(pos) => {
                let re: f64 = body[..pos]
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad complex literal '{s}'")))?;
                let im_text = body[pos..].trim();
                let im: f64 = if im_text == "+" {
                    1.0
                } else if im_text == "-" {
                    -1.0
                } else {
                    im_text
                        .parse()
                        .map_err(|_| Error::config(format!("bad complex literal '{s}'")))?
                };
                Ok(Complex64::new(re, im))
            }
            None => {
                let im_text = body.trim();
                let im: f64 = if im_text.is_empty() {
                    1.0
                } else if im_text == "-" {
                    -1.0
                } else {
                    im_text
                        .parse()
                        .map_err(|_| Error::config(format!("bad complex literal '{s}'")))?
                };
                Ok(Complex64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = t
            .parse()
            .map_err(|_| Error::config(format!("bad complex literal '{s}'")))?;
        Ok(Complex64::new(re, 0.0))
    }
}

fn parse_complex_list(key: &str, value: &str) -> Result<Vec<Complex64>> {
    value
        .split(',')
        .map(|item| parse_complex(item).map_err(|e| Error::config(format!("key '{key}': {e}"))))
        .collect()
}
