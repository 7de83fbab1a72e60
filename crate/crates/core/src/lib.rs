//! Bayesian-neural-network priors built by mirroring Gaussian-process kernel
//! combinations, with the tooling to check them: closed-form kernels and
//! their algebra, finite-width architectures and a Monte-Carlo kernel
//! estimator, exact GP regression, HMC and anchored-ensemble inference, and
//! two experiment harnesses (gap time-series prediction and a pendulum
//! swing-up task).

pub mod bnn;
pub mod error;
pub mod gp;
pub mod inference;
pub mod kernel;
pub mod manifest;
pub mod pendulum;
pub mod rng;
pub mod stats;
pub mod timeseries;
pub mod warp;

pub use error::{Error, Result};
pub use warp::{warp_periodic, Warp};
