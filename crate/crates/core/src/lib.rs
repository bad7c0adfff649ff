//! Diffusion–advection transport in a cylindrical vessel: particle-based
//! simulation, the dispersion-reduced analytic channel model, and
//! transmitter-distance estimation from the temporal variance of the
//! received signal.

pub mod analytic;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod physics;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
