//! Bayesian neural networks: architecture trees, the forward/backward pass,
//! prior sampling, Monte-Carlo kernel estimation and infinite-width kernels.

mod activation;
mod arch;
mod equivalent;
mod network;
mod sample;

pub use activation::Activation;
pub use arch::{ArchSpec, DenseLayer, HiddenSpec};
pub use network::{Network, ParamSet};
pub use sample::{
    empirical_kernel, empirical_kernel_with, mixture_ks_distance, prior_draws_at, sample_params,
    sample_prior_functions, Estimator, McEstimate, CHUNK, MIN_KERNEL_SAMPLES,
};
