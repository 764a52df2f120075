//! Core numerics for delay-Doppler (OTFS) links with affine-precoded
//! superimposed pilots: grid geometry, precoding, the modulation chain,
//! sparse-recovery dictionaries, Bayesian channel estimators, data
//! detectors and Cramer-Rao bounds.
//!
//! All operations are pure functions of their inputs (randomness is always
//! injected through a caller-owned generator), so everything here is safe to
//! drive from concurrently running Monte Carlo trials.

pub mod bcrb;
pub mod detection;
pub mod dictionary;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod linalg;
pub mod modem;
pub mod precoding;

pub use error::{Error, Result};
