//! Anchored ensembles: each member is fit by regularizing towards its own
//! draw from the prior.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::predictive_moments;
use crate::bnn::{sample_params, ArchSpec, Network, ParamSet};
use crate::error::{check_dim, Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub members: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// Minibatch size; full batch when absent.
    pub batch_size: Option<usize>,
    pub noise_var: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            members: 10,
            steps: 2000,
            learning_rate: 0.01,
            batch_size: None,
            noise_var: 0.01,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members < 2 {
            return Err(Error::param("members", "an ensemble needs at least 2 members"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::param("noise_var", "must be > 0"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::param("batch_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// One ensemble member with its anchor and optimizer state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnchoredMember {
    pub params: ParamSet,
    pub anchor: ParamSet,
    opt: Adam,
}

impl AnchoredMember {
    /// Initial parameters and anchor are independent prior draws derived
    /// from `seed`.
    pub fn new(net: &Network, seed: u64, learning_rate: f64) -> Self {
        AnchoredMember {
            params: sample_params(net, rng::derive(seed, 0)),
            anchor: sample_params(net, rng::derive(seed, 1)),
            opt: Adam::new(net.n_params(), learning_rate),
        }
    }

    /// `data_scale · Σ (y − f_k(x))² / σ²_n + Σ (θ − θ_anchor)² / σ²_prior`
    /// over `(x, k, y)` triples, where `k` selects the output.
    pub fn loss_and_grad(
        &self,
        net: &Network,
        batch: &[(&[f64], usize, f64)],
        noise_var: f64,
        data_scale: f64,
    ) -> (f64, Vec<f64>) {
        let theta = &self.params.values;
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        let outputs = net.outputs();
        for &(x, k, y) in batch {
            net.forward_backward_raw(theta, x, &mut grad, |f| {
                let r = f[k] - y;
                loss += data_scale * r * r / noise_var;
                let mut d = vec![0.0; outputs];
                d[k] = 2.0 * data_scale * r / noise_var;
                d
            });
        }
        for (i, &v) in net.prior_variances().iter().enumerate() {
            if v > 0.0 {
                let d = theta[i] - self.anchor.values[i];
                loss += d * d / v;
                grad[i] += 2.0 * d / v;
            }
        }
        (loss, grad)
    }

    /// One Adam step; returns the loss before the step.
    pub fn step(
        &mut self,
        net: &Network,
        batch: &[(&[f64], usize, f64)],
        noise_var: f64,
        data_scale: f64,
    ) -> Result<f64> {
        let (loss, grad) = self.loss_and_grad(net, batch, noise_var, data_scale);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("ensemble loss {loss}")));
        }
        self.opt.step(&mut self.params.values, &grad);
        Ok(loss)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub arch: ArchSpec,
    pub members: Vec<ParamSet>,
    pub anchors: Vec<ParamSet>,
    pub config: EnsembleConfig,
}

impl EnsembleModel {
    /// Mean and standard deviation across members of output 0; with
    /// `observation` the noise variance is added.
    pub fn predict(&self, xs: &[Vec<f64>], observation: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        let net = Network::new(&self.arch)?;
        let noise = if observation { self.config.noise_var } else { 0.0 };
        predictive_moments(&net, &self.members, xs, noise)
    }
}

/// Trains `cfg.members` members; member `j` draws its initialization,
/// anchor and minibatches from `rng::derive(seed, j)`.
pub fn anchored_ensemble_train(
    arch: &ArchSpec,
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &EnsembleConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    let seeds: Vec<u64> = (0..cfg.members as u64).map(|j| rng::derive(seed, j)).collect();
    anchored_ensemble_train_with_seeds(arch, x, y, cfg, &seeds)
}

/// As [`anchored_ensemble_train`] with explicit per-member seeds.
pub fn anchored_ensemble_train_with_seeds(
    arch: &ArchSpec,
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &EnsembleConfig,
    seeds: &[u64],
) -> Result<EnsembleModel> {
    let cfg = EnsembleConfig {
        members: seeds.len(),
        ..cfg.clone()
    };
    cfg.validate()?;
    let net = Network::new(arch)?;
    check_dim(x.len(), y.len())?;
    for xi in x {
        check_dim(net.input_dim(), xi.len())?;
    }
    let trained: Vec<AnchoredMember> = seeds
        .par_iter()
        .map(|&s| {
            let mut m = AnchoredMember::new(&net, s, cfg.learning_rate);
            let mut batch_rng = rng::stream(s, 2);
            let full: Vec<(&[f64], usize, f64)> = x.iter().zip(y).map(|(xi, &yi)| (xi.as_slice(), 0, yi)).collect();
            for _ in 0..cfg.steps {
                match cfg.batch_size {
                    Some(b) if b < full.len() => {
                        let batch: Vec<_> = (0..b).map(|_| full[batch_rng.random_range(0..full.len())]).collect();
                        m.step(&net, &batch, cfg.noise_var, full.len() as f64 / b as f64)?;
                    }
                    _ => {
                        m.step(&net, &full, cfg.noise_var, 1.0)?;
                    }
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let (members, anchors) = trained.into_iter().map(|m| (m.params, m.anchor)).unzip();
    Ok(EnsembleModel {
        arch: arch.clone(),
        members,
        anchors,
        config: cfg,
    })
}
