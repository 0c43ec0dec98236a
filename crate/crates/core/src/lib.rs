//! Photonic extreme learning machines driven by partially distinguishable
//! multi-photon interference.
//!
//! A fixed random linear network scatters phase-encoded inputs; the readout
//! is ridge regression on coincidence statistics at the detectors.

extern crate openblas_src;

pub mod datasets;
pub mod detector;
pub mod elm;
pub mod error;
pub mod experiment;
pub mod expressivity;
pub mod optics;
pub mod rng;

pub use error::{QelmError, Result};
