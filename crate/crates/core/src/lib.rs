//! Dirichlet-process mixtures of conditional vine copulas.
//!
//! The crate provides bivariate copula kernels with rotations, D- and
//! C-vine densities and simulation, covariate-indexed edge parameters,
//! a no-gaps Dirichlet-process mixture sampler, Beta marginal models, a
//! simulation-study harness, and the file formats used by the CLI.

pub mod calibration;
pub mod copula;
pub mod data;
pub mod dpm;
pub mod error;
pub mod fsutil;
pub mod margins;
pub mod numeric;
pub mod scenario;
pub mod stats;
pub mod vine;

pub use error::{Error, Result};
