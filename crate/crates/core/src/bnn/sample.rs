//! Prior sampling and the Monte-Carlo kernel estimator.
//!
//! Monte-Carlo work is split into fixed chunks of [`CHUNK`] samples; chunk
//! `c` draws from stream `c` of the seed and chunk statistics are merged in
//! index order, so results do not depend on the number of worker threads.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arch::ArchSpec;
use super::network::{Network, ParamSet};
use crate::error::{check_dim, Error, Result};
use crate::rng::{self, Rng};
use crate::stats::{self, Moments};

pub const CHUNK: usize = 1024;
pub const MIN_KERNEL_SAMPLES: usize = 1000;

fn fill_params(prior_var: &[f64], rng: &mut Rng, theta: &mut [f64]) {
    for (t, &v) in theta.iter_mut().zip(prior_var) {
        let z: f64 = rng.sample(StandardNormal);
        *t = v.sqrt() * z;
    }
}

/// Independent draw of every parameter from its prior.
pub fn sample_params(net: &Network, seed: u64) -> ParamSet {
    let mut rng = rng::from_seed(seed);
    let mut values = vec![0.0; net.n_params()];
    fill_params(net.prior_variances(), &mut rng, &mut values);
    ParamSet { values }
}

/// Row `i` is the network evaluated on `grid` under `sample_params(seed + i)`.
pub fn sample_prior_functions(
    net: &Network,
    grid: &[Vec<f64>],
    n_draws: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n_draws == 0 {
        return Err(Error::param("n_draws", "must be >= 1"));
    }
    for x in grid {
        check_dim(net.input_dim(), x.len())?;
    }
    Ok((0..n_draws)
        .into_par_iter()
        .map(|i| {
            let p = sample_params(net, seed.wrapping_add(i as u64));
            grid.iter().map(|x| net.eval_raw(&p.values, x)[0]).collect()
        })
        .collect())
}

/// Draws of `f(x)` across `n` independent parameter sets.
pub fn prior_draws_at(net: &Network, x: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    check_dim(net.input_dim(), x.len())?;
    Ok(chunked(n, seed, |rng, count| {
        let mut theta = vec![0.0; net.n_params()];
        (0..count)
            .map(|_| {
                fill_params(net.prior_variances(), rng, &mut theta);
                net.eval_raw(&theta, x)[0]
            })
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect())
}

fn chunked<T: Send>(n: usize, seed: u64, work: impl Fn(&mut Rng, usize) -> T + Sync) -> Vec<T> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            work(&mut rng, count)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// `|estimate − value|` in units of standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.estimate - value).abs() / self.std_error
    }
}

/// How each Monte-Carlo sample of `f(x) f(x')` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Variance-reduced when possible, otherwise conditional, otherwise raw.
    Auto,
    /// One hidden unit per network per sample, output weights integrated
    /// out: averages `σ²_w2 ψ(x) ψ(x')`. Single-hidden-layer trees only.
    SingleUnit,
    /// Full-width hidden layers, output weights integrated out.
    Conditional,
    /// Full parameter draws, averages `f(x) f(x')`.
    Raw,
}

pub fn empirical_kernel(arch: &ArchSpec, x: &[f64], x_p: &[f64], n_samples: usize, seed: u64) -> Result<McEstimate> {
    empirical_kernel_with(arch, x, x_p, n_samples, seed, Estimator::Auto)
}

pub fn empirical_kernel_with(
    arch: &ArchSpec,
    x: &[f64],
    x_p: &[f64],
    n_samples: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<McEstimate> {
    if n_samples < MIN_KERNEL_SAMPLES {
        return Err(Error::param(
            "n_samples",
            format!("need at least {MIN_KERNEL_SAMPLES}, got {n_samples}"),
        ));
    }
    arch.validate()?;
    check_dim(arch.input_dim(), x.len())?;
    check_dim(arch.input_dim(), x_p.len())?;
    let has_product = contains_output_product(arch);
    let estimator = match estimator {
        Estimator::Auto if arch.is_single_layer() => Estimator::SingleUnit,
        Estimator::Auto if !has_product => Estimator::Conditional,
        Estimator::Auto => Estimator::Raw,
        Estimator::SingleUnit if !arch.is_single_layer() => {
            return Err(Error::Config(
                "single-unit estimator needs single-hidden-layer networks summed at outputs".into(),
            ))
        }
        Estimator::Conditional if has_product => {
            return Err(Error::Config("conditional estimator cannot handle output products".into()))
        }
        e => e,
    };
    let net = match estimator {
        Estimator::SingleUnit => Network::new(&arch.with_width(1))?,
        _ => Network::new(arch)?,
    };
    let parts = chunked(n_samples, seed, |rng, count| {
        let mut theta = vec![0.0; net.n_params()];
        let mut m = Moments::default();
        for _ in 0..count {
            fill_params(net.prior_variances(), rng, &mut theta);
            let v = match estimator {
                Estimator::Raw => net.eval_raw(&theta, x)[0] * net.eval_raw(&theta, x_p)[0],
                _ => net
                    .conditional_second_moment_raw(&theta, x, x_p)
                    .expect("checked for output products"),
            };
            m.push(v);
        }
        m
    });
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    Ok(McEstimate {
        estimate: m.mean,
        std_error: m.std_error(),
        n_samples,
    })
}

fn contains_output_product(arch: &ArchSpec) -> bool {
    match arch {
        ArchSpec::Network { .. } => false,
        ArchSpec::OutputSum { children } => children.iter().any(contains_output_product),
        ArchSpec::OutputProduct { .. } => true,
    }
}

/// KS distance between the standardized law of `f(x)` and `N(0, 1)`, with
/// the output weights integrated out analytically.
///
/// Given the hidden parameters, `f(x)` is `N(0, V)` with `V` the conditional
/// second moment, so the law of `f(x)` is the mixture `E[Φ(t/√V)]`. This
/// estimates the mixture from `n` hidden-layer draws, standardizes by the
/// mean of `V` and takes the supremum over a grid `t ∈ [−6, 6]`.
pub fn mixture_ks_distance(net: &Network, x: &[f64], n: usize, seed: u64) -> Result<f64> {
    check_dim(net.input_dim(), x.len())?;
    let variances: Vec<f64> = chunked(n, seed, |rng, count| {
        let mut theta = vec![0.0; net.n_params()];
        (0..count)
            .map(|_| {
                fill_params(net.prior_variances(), rng, &mut theta);
                net.conditional_second_moment_raw(&theta, x, x)
            })
            .collect::<Option<Vec<f64>>>()
    })
    .into_iter()
    .collect::<Option<Vec<Vec<f64>>>>()
    .ok_or_else(|| Error::Config("output products have no conditional Gaussian form".into()))?
    .into_iter()
    .flatten()
    .collect();
    let vbar = stats::mean(&variances);
    if !(vbar > 0.0) {
        return Err(Error::InvalidData("f(x) has zero variance".into()));
    }
    let scales: Vec<f64> = variances.iter().map(|v| (v / vbar).sqrt()).collect();
    let steps = 2400;
    Ok((0..=steps)
        .into_par_iter()
        .map(|i| {
            let t = -6.0 + 12.0 * i as f64 / steps as f64;
            let mix = scales
                .iter()
                .map(|&s| {
                    if s > 0.0 {
                        stats::normal_cdf(t / s)
                    } else if t >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                / scales.len() as f64;
            (mix - stats::normal_cdf(t)).abs()
        })
        .reduce(|| 0.0, f64::max))
}
