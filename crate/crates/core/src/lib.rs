//! Coverage probability and spectral efficiency of NOMA downlinks in LEO
//! multi-satellite networks.
//!
//! The analytic path models satellites as a spherical Poisson point process
//! and evaluates coverage through the Laplace transform of the aggregate
//! inter-satellite interference. The [`montecarlo`] module samples explicit
//! constellations and SINRs and serves as an independent check.

pub mod allocation;
pub mod config;
pub mod coverage;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod interference;
pub mod montecarlo;
pub mod numerics;

pub use config::{build_derived, db_to_linear, linear_to_db, DerivedConstants, Network, NoiseNormalization, SystemConfig};
pub use error::{Error, Result};
pub use interference::FadingModel;
