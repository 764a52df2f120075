//! Monte Carlo harness for the AP-SIP OTFS estimation chain: configuration,
//! channel drawing, per-trial scheme evaluation, SNR sweeps and CSV output.

pub mod channel;
pub mod config;
pub mod error;
pub mod metrics;
pub mod sweep;
pub mod trial;
pub mod validate;

pub use config::{ChannelSource, ExperimentConfig, PulseShape, Scheme};
pub use error::{Error, Result};
