//! Exact Gaussian-process regression with a Gaussian likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::kernel::Kernel;

/// Multipliers of the mean Gram diagonal tried, in order, as jitter.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub kernel: Kernel,
    pub noise_var: f64,
}

impl GpModel {
    pub fn new(kernel: Kernel, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::param("noise_var", format!("must be >= 0, got {noise_var}")));
        }
        Ok(Self { kernel, noise_var })
    }

    pub fn fit(&self, x: &[Vec<f64>], y: &[f64]) -> Result<GpPosterior> {
        gp_fit(self, x, y)
    }
}

#[derive(Clone, Debug)]
pub struct GpPosterior {
    model: GpModel,
    x: Vec<Vec<f64>>,
    y: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

pub fn gp_fit(model: &GpModel, x: &[Vec<f64>], y: &[f64]) -> Result<GpPosterior> {
    if x.is_empty() {
        return Err(Error::InvalidData("need at least one training point".into()));
    }
    check_dim(x.len(), y.len())?;
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data".into()));
    }
    let n = x.len();
    let mut gram = model.kernel.gram(x)?;
    for i in 0..n {
        gram[(i, i)] += model.noise_var;
    }
    let mean_diag = gram.diagonal().mean();
    let norm = gram.norm();
    let mut last_jitter = 0.0;
    for mult in JITTER_LADDER {
        let jitter = mult * mean_diag;
        last_jitter = jitter;
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        let Some(chol) = Cholesky::new(a.clone()) else {
            continue;
        };
        let l = chol.l();
        let recon = (&l * l.transpose() - &a).norm();
        if !(recon <= 1e-8 * norm.max(f64::MIN_POSITIVE)) {
            continue;
        }
        let yv = DVector::from_column_slice(y);
        let alpha = chol.solve(&yv);
        if alpha.iter().any(|v| !v.is_finite()) {
            continue;
        }
        return Ok(GpPosterior {
            model: model.clone(),
            x: x.to_vec(),
            y: yv,
            chol,
            alpha,
            jitter,
        });
    }
    let min_eigenvalue = SymmetricEigen::new(gram).eigenvalues.min();
    Err(Error::NotPositiveDefinite {
        min_eigenvalue,
        jitter: last_jitter,
    })
}

impl GpPosterior {
    pub fn model(&self) -> &GpModel {
        &self.model
    }

    /// Jitter that was added to the diagonal to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    /// Lower-triangular factor of `K + σ²_n I + jitter I`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Predictive mean and covariance of the latent function.
    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if xs.is_empty() {
            return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
        }
        let ks = self.model.kernel.cross(&self.x, xs)?;
        let mean = ks.transpose() * &self.alpha;
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("Cholesky factor has a positive diagonal");
        let cov = self.model.kernel.gram(xs)? - v.transpose() * v;
        Ok((mean, cov))
    }

    /// Predictive mean and variance of the latent function, without forming
    /// the full covariance.
    pub fn predict_marginal(&self, xs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        if xs.is_empty() {
            return Ok((vec![], vec![]));
        }
        let ks = self.model.kernel.cross(&self.x, xs)?;
        let mean = ks.transpose() * &self.alpha;
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("Cholesky factor has a positive diagonal");
        let prior = self.model.kernel.diag(xs)?;
        let var = prior
            .iter()
            .zip(v.column_iter())
            .map(|(p, c)| p - c.norm_squared())
            .collect();
        Ok((mean.as_slice().to_vec(), var))
    }

    /// `−½ yᵀα − Σ log Lᵢᵢ − (n/2) log 2π`
    pub fn log_marginal(&self) -> f64 {
        let n = self.y.len() as f64;
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * self.y.dot(&self.alpha) - log_det - 0.5 * n * (2.0 * PI).ln()
    }
}

pub fn gp_predict(post: &GpPosterior, xs: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    post.predict(xs)
}

pub fn gp_log_marginal(post: &GpPosterior) -> f64 {
    post.log_marginal()
}
