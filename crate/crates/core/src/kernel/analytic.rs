//! Closed-form covariance functions.
//!
//! The network-derived kernels (`k_relu`, `k_erf`, `k_rbf_bnn`, `k_cos_bnn`)
//! are the infinite-width limits of single-hidden-layer networks with
//! Gaussian priors. Each one is checked against the Monte-Carlo estimator in
//! [`crate::bnn::empirical_kernel`].

use std::f64::consts::PI;

use super::params::{dot, sq_dist, EssParams, PriorSpec, RbfLayerParams, SeParams};
use crate::error::{check_dim, Error, Result};

/// `σ² exp(−‖x − x'‖² / l²)`. Note there is no factor 2 in the denominator.
pub fn k_se(x: &[f64], x_p: &[f64], params: &SeParams) -> Result<f64> {
    check_dim(x.len(), x_p.len())?;
    Ok(se_unchecked(x, x_p, params))
}

pub(crate) fn se_unchecked(x: &[f64], x_p: &[f64], params: &SeParams) -> f64 {
    let l2 = params.length_scale * params.length_scale;
    params.sigma2 * (-sq_dist(x, x_p) / l2).exp()
}

/// `σ² exp(−2 sin²(π(x − x')/p) / l²)` for scalar inputs.
pub fn k_ess(x: f64, x_p: f64, params: &EssParams) -> f64 {
    let s = (PI * (x - x_p) / params.period).sin();
    let l2 = params.length_scale * params.length_scale;
    params.sigma2 * (-2.0 * s * s / l2).exp()
}

/// `sin ω + (π − ω) cos ω`
fn arccos_bracket(omega: f64) -> f64 {
    omega.sin() + (PI - omega) * omega.cos()
}

/// Arc-cosine (order one) kernel of a ReLU network, with the bias folded in
/// through `s(a, b) = σ²_b1 + σ²_w1 aᵀb`.
pub fn k_relu(x: &[f64], x_p: &[f64], priors: &PriorSpec) -> Result<f64> {
    check_dim(x.len(), x_p.len())?;
    let sxx = priors.preact_cov(x, x);
    let spp = priors.preact_cov(x_p, x_p);
    for (s, input) in [(sxx, x), (spp, x_p)] {
        if !(s > 0.0) {
            return Err(Error::DegenerateInput {
                input: input.to_vec(),
                reason: format!("pre-activation variance is {s}; the arc-cosine angle is undefined"),
            });
        }
    }
    Ok(relu_from_cov(sxx, spp, priors.preact_cov(x, x_p), priors.sigma2_w2))
}

pub(crate) fn relu_from_cov(sxx: f64, spp: f64, sxp: f64, sigma2_w2: f64) -> f64 {
    let norm = (sxx * spp).sqrt();
    let omega = (sxp / norm).clamp(-1.0, 1.0).acos();
    sigma2_w2 / (2.0 * PI) * norm * arccos_bracket(omega)
}

/// Kernel of a network with `erf` hidden units.
pub fn k_erf(x: &[f64], x_p: &[f64], priors: &PriorSpec) -> Result<f64> {
    check_dim(x.len(), x_p.len())?;
    Ok(erf_unchecked(x, x_p, priors))
}

pub(crate) fn erf_unchecked(x: &[f64], x_p: &[f64], priors: &PriorSpec) -> f64 {
    let sxx = priors.preact_cov(x, x);
    let spp = priors.preact_cov(x_p, x_p);
    let sxp = priors.preact_cov(x, x_p);
    let arg = 2.0 * sxp / ((1.0 + 2.0 * sxx) * (1.0 + 2.0 * spp)).sqrt();
    2.0 * priors.sigma2_w2 / PI * arg.clamp(-1.0, 1.0).asin()
}

/// Kernel of a network of RBF units with Gaussian-distributed centers (unit
/// output variance).
pub fn k_rbf_bnn(x: &[f64], x_p: &[f64], params: &RbfLayerParams) -> Result<f64> {
    check_dim(x.len(), x_p.len())?;
    Ok(rbf_unchecked(x, x_p, params))
}

pub(crate) fn rbf_unchecked(x: &[f64], x_p: &[f64], params: &RbfLayerParams) -> f64 {
    let d = x.len() as i32;
    let scale = (params.sigma2_e() / params.sigma2_u).sqrt().powi(d);
    let m = params.sigma2_m();
    let s = params.sigma2_s();
    // the norms are summed before exponentiating so that k(x, x') == k(x', x) bitwise
    let norms = dot(x, x) + dot(x_p, x_p);
    scale * (-norms / (2.0 * m) - sq_dist(x, x_p) / (2.0 * s)).exp()
}

/// Kernel of a network with cosine hidden units:
/// `(σ²_w2/2)[exp(−σ²_w1‖x−x'‖²/2) + exp(−σ²_w1‖x+x'‖²/2 − 2σ²_b1)]`.
///
/// The first term is stationary, the second is not, so the process is not
/// periodic in `x − x'`.
pub fn k_cos_bnn(x: &[f64], x_p: &[f64], priors: &PriorSpec) -> Result<f64> {
    check_dim(x.len(), x_p.len())?;
    Ok(cos_unchecked(x, x_p, priors))
}

pub(crate) fn cos_unchecked(x: &[f64], x_p: &[f64], priors: &PriorSpec) -> f64 {
    let diff = sq_dist(x, x_p);
    let sum: f64 = x.iter().zip(x_p).map(|(a, b)| (a + b) * (a + b)).sum();
    let w = priors.sigma2_w1;
    0.5 * priors.sigma2_w2
        * ((-0.5 * w * diff).exp() + (-0.5 * w * sum - 2.0 * priors.sigma2_b1).exp())
}

/// Periodic arc-cosine kernel `(σ²_w2/π)(sin ω + (π − ω) cos ω)` with
/// `cos ω = (σ²_b1 + σ²_w1 cos(2π(x − x')/p)) / (σ²_b1 + σ²_w1)`.
///
/// This is the warped ReLU kernel normalised to diagonal `σ²_w2`; a ReLU
/// network on `(cos 2πx/p, sin 2πx/p)` reproduces it with output variance
/// `2σ²_w2 / (σ²_b1 + σ²_w1)`.
pub fn k_relu_periodic(x: f64, x_p: f64, period: f64, priors: &PriorSpec) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::param("period", format!("must be positive, got {period}")));
    }
    let denom = priors.sigma2_b1 + priors.sigma2_w1;
    if !(denom > 0.0) {
        return Err(Error::param(
            "sigma2_b1 + sigma2_w1",
            "must be positive for the periodic arc-cosine kernel",
        ));
    }
    Ok(relu_periodic_unchecked(x, x_p, period, priors))
}

pub(crate) fn relu_periodic_unchecked(x: f64, x_p: f64, period: f64, priors: &PriorSpec) -> f64 {
    let denom = priors.sigma2_b1 + priors.sigma2_w1;
    let c = (2.0 * PI * (x - x_p) / period).cos();
    let omega = ((priors.sigma2_b1 + priors.sigma2_w1 * c) / denom)
        .clamp(-1.0, 1.0)
        .acos();
    priors.sigma2_w2 / PI * arccos_bracket(omega)
}
