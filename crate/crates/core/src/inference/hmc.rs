//! Hamiltonian Monte Carlo with a diagonal mass matrix.
//!
//! During burn-in the step size is tuned by dual averaging towards
//! [`HmcConfig::target_accept`]; the averaged step size is then frozen.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::target::LogDensity;
use crate::error::{check_dim, Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    /// Initial step size; the starting point of the tuning when `adapt` is on.
    pub step_size: f64,
    pub leapfrog_steps: usize,
    /// Samples kept per chain.
    pub n_samples: usize,
    /// Burn-in iterations per chain; 20% of `n_samples` when absent.
    pub n_burnin: Option<usize>,
    pub n_chains: usize,
    pub seed: u64,
    /// Diagonal of the mass matrix; identity when absent.
    pub mass: Option<Vec<f64>>,
    pub adapt: bool,
    pub target_accept: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            step_size: 0.01,
            leapfrog_steps: 30,
            n_samples: 1000,
            n_burnin: None,
            n_chains: 4,
            seed: 0,
            mass: None,
            adapt: true,
            target_accept: 0.7,
        }
    }
}

impl HmcConfig {
    pub fn burnin(&self) -> usize {
        self.n_burnin.unwrap_or(self.n_samples / 5)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::param("step_size", format!("must be > 0, got {}", self.step_size)));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::param("leapfrog_steps", "must be >= 1"));
        }
        if self.n_samples == 0 || self.n_chains == 0 {
            return Err(Error::param("n_samples/n_chains", "must be >= 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::param("target_accept", "must lie in (0, 1)"));
        }
        if let Some(m) = &self.mass {
            check_dim(dim, m.len())?;
            if m.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::param("mass", "entries must be > 0"));
            }
        }
        Ok(())
    }
}

/// Post-burn-in draws of all chains, concatenated in chain order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HmcChain {
    pub samples: Vec<Vec<f64>>,
    /// Fraction of accepted proposals after burn-in, per chain.
    pub acceptance: Vec<f64>,
    /// Step size used after burn-in, per chain.
    pub step_sizes: Vec<f64>,
    /// `|ΔH|` averaged over post-burn-in proposals, per chain.
    pub mean_abs_energy_error: Vec<f64>,
}

impl HmcChain {
    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance.iter().sum::<f64>() / self.acceptance.len() as f64
    }

    pub fn chain(&self, c: usize) -> &[Vec<f64>] {
        let n = self.samples.len() / self.acceptance.len();
        &self.samples[c * n..(c + 1) * n]
    }
}

/// `n_steps` leapfrog steps from `(q, p)` in place; returns the log density
/// at the final position. `grad` must hold the gradient at the initial `q`
/// and is left holding the gradient at the final one.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    step_size: f64,
    n_steps: usize,
    inv_mass: &[f64],
) -> f64 {
    let mut lp = f64::NAN;
    for _ in 0..n_steps {
        for i in 0..q.len() {
            p[i] += 0.5 * step_size * grad[i];
            q[i] += step_size * inv_mass[i] * p[i];
        }
        lp = target.log_density_and_grad(q, grad);
        for i in 0..q.len() {
            p[i] += 0.5 * step_size * grad[i];
        }
    }
    lp
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    m: f64,
    target: f64,
}

impl DualAveraging {
    fn new(eps0: f64, target: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            h_bar: 0.0,
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            m: 0.0,
            target,
        }
    }

    fn update(&mut self, accept_prob: f64) -> f64 {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.m += 1.0;
        let w = 1.0 / (self.m + T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - self.m.sqrt() / GAMMA * self.h_bar;
        let eta = self.m.powf(-KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
        self.log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

struct ChainOut {
    samples: Vec<Vec<f64>>,
    acceptance: f64,
    step: f64,
    abs_dh: f64,
}

fn run_chain<T: LogDensity + ?Sized>(target: &T, init: &[f64], cfg: &HmcConfig, chain: usize) -> ChainOut {
    let dim = init.len();
    let mut rng = rng::stream(cfg.seed, chain as u64);
    let mass = cfg.mass.clone().unwrap_or_else(|| vec![1.0; dim]);
    let inv_mass: Vec<f64> = mass.iter().map(|m| 1.0 / m).collect();
    let sqrt_mass: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();

    let mut q = init.to_vec();
    let mut grad = vec![0.0; dim];
    let mut lp = target.log_density_and_grad(&q, &mut grad);
    let mut step = cfg.step_size;
    let mut da = DualAveraging::new(step, cfg.target_accept);
    let burnin = cfg.burnin();

    let mut samples = Vec::with_capacity(cfg.n_samples);
    let (mut accepted, mut abs_dh) = (0usize, 0.0);
    let mut q_new = vec![0.0; dim];
    let mut p = vec![0.0; dim];
    let mut grad_new = vec![0.0; dim];

    for it in 0..burnin + cfg.n_samples {
        for i in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            p[i] = z * sqrt_mass[i];
        }
        let h0 = -lp + kinetic(&p, &inv_mass);
        q_new.copy_from_slice(&q);
        grad_new.copy_from_slice(&grad);
        let lp_new = leapfrog(target, &mut q_new, &mut p, &mut grad_new, step, cfg.leapfrog_steps, &inv_mass);
        let h1 = -lp_new + kinetic(&p, &inv_mass);
        let dh = h1 - h0;
        let accept_prob = if dh.is_finite() { (-dh).exp().min(1.0) } else { 0.0 };
        let u: f64 = rng.random();
        let accept = u < accept_prob;
        if accept {
            std::mem::swap(&mut q, &mut q_new);
            std::mem::swap(&mut grad, &mut grad_new);
            lp = lp_new;
        }
        if it < burnin {
            if cfg.adapt {
                step = da.update(accept_prob);
                if it + 1 == burnin {
                    step = da.final_step();
                }
            }
        } else {
            accepted += accept as usize;
            abs_dh += if dh.is_finite() { dh.abs() } else { f64::INFINITY };
            samples.push(q.clone());
        }
    }
    ChainOut {
        acceptance: accepted as f64 / cfg.n_samples as f64,
        abs_dh: abs_dh / cfg.n_samples as f64,
        samples,
        step,
    }
}

/// Runs `cfg.n_chains` independent chains from `init`, each on its own
/// random stream of `cfg.seed`.
pub fn hmc_sample<T: LogDensity + ?Sized>(target: &T, init: &[f64], cfg: &HmcConfig) -> Result<HmcChain> {
    check_dim(target.dim(), init.len())?;
    cfg.validate(init.len())?;
    let mut grad = vec![0.0; init.len()];
    let lp = target.log_density_and_grad(init, &mut grad);
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("log density {lp} at the initial point")));
    }
    let outs: Vec<ChainOut> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(target, init, cfg, c))
        .collect();
    let acceptance: Vec<f64> = outs.iter().map(|o| o.acceptance).collect();
    let step_sizes: Vec<f64> = outs.iter().map(|o| o.step).collect();
    if let Some((c, &a)) = acceptance.iter().enumerate().find(|(_, a)| **a < 0.01) {
        return Err(Error::Divergence {
            acceptance: a,
            step_size: step_sizes[c],
        });
    }
    Ok(HmcChain {
        mean_abs_energy_error: outs.iter().map(|o| o.abs_dh).collect(),
        samples: outs.into_iter().flat_map(|o| o.samples).collect(),
        acceptance,
        step_sizes,
    })
}
