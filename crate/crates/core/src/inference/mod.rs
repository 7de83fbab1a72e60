//! Posterior inference for finite networks: HMC and anchored ensembles.

mod adam;
mod ensemble;
mod hmc;
mod target;

pub use adam::Adam;
pub use ensemble::{anchored_ensemble_train, anchored_ensemble_train_with_seeds, AnchoredMember, EnsembleConfig, EnsembleModel};
pub use hmc::{hmc_sample, leapfrog, HmcChain, HmcConfig};
pub use target::{GaussianTarget, LogDensity, PosteriorTarget};

use crate::bnn::{Network, ParamSet};
use crate::error::{check_dim, Error, Result};

/// Adam ascent on `target` for `steps` steps; used to start HMC chains near
/// a posterior mode.
pub fn map_estimate(target: &impl LogDensity, init: Vec<f64>, steps: usize, learning_rate: f64) -> Result<Vec<f64>> {
    check_dim(target.dim(), init.len())?;
    let mut theta = init;
    let mut opt = Adam::new(theta.len(), learning_rate);
    let mut grad = vec![0.0; theta.len()];
    for _ in 0..steps {
        let lp = target.log_density_and_grad(&theta, &mut grad);
        if !lp.is_finite() {
            return Err(Error::NonFinite(format!("log density {lp} while searching for the mode")));
        }
        grad.iter_mut().for_each(|g| *g = -*g);
        opt.step(&mut theta, &grad);
    }
    Ok(theta)
}

/// Per-point mean and standard deviation of output 0 across parameter
/// samples, with `noise_var` added to the variance.
pub fn predictive_moments(
    net: &Network,
    samples: &[ParamSet],
    xs: &[Vec<f64>],
    noise_var: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InvalidData("no parameter samples".into()));
    }
    for p in samples {
        check_dim(net.n_params(), p.values.len())?;
    }
    let n = samples.len() as f64;
    let mut means = Vec::with_capacity(xs.len());
    let mut stds = Vec::with_capacity(xs.len());
    let mut f = vec![0.0; samples.len()];
    for x in xs {
        for (fi, p) in f.iter_mut().zip(samples) {
            *fi = net.forward(p, x)?;
        }
        let m = f.iter().sum::<f64>() / n;
        let v = f.iter().map(|fi| (fi - m) * (fi - m)).sum::<f64>() / n;
        means.push(m);
        stds.push((v + noise_var).sqrt());
    }
    Ok((means, stds))
}

/// Predictive moments of an HMC chain.
pub fn bnn_predictive_hmc(
    target: &PosteriorTarget,
    chain: &HmcChain,
    xs: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let samples: Vec<ParamSet> = chain.samples.iter().map(|s| target.full_params(s)).collect();
    predictive_moments(target.network(), &samples, xs, target.noise_var())
}
