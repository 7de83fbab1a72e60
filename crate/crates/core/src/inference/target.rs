use nalgebra::{DMatrix, DVector};

use crate::bnn::{ArchSpec, Network, ParamSet};
use crate::error::{check_dim, Error, Result};

/// An unnormalized log density with gradient.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.log_density_and_grad(theta, &mut g)
    }

    /// Overwrites `grad` with the gradient and returns the log density.
    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;
}

/// Multivariate normal target, used to calibrate samplers.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), cov.nrows())?;
        check_dim(mean.len(), cov.ncols())?;
        let precision = cov
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                min_eigenvalue: f64::NAN,
                jitter: 0.0,
            })?
            .inverse();
        Ok(Self {
            mean: DVector::from_vec(mean),
            precision,
        })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            precision: DMatrix::identity(dim, dim),
        }
    }
}

impl LogDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let d = DVector::from_column_slice(theta) - &self.mean;
        let pd = &self.precision * &d;
        grad.iter_mut().zip(pd.iter()).for_each(|(g, v)| *g = -v);
        -0.5 * d.dot(&pd)
    }
}

/// Gaussian likelihood with noise `σ²_n` times the architecture's Gaussian
/// priors, over the parameters whose prior variance is positive.
#[derive(Clone, Debug)]
pub struct PosteriorTarget {
    net: Network,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    noise_var: f64,
    free: Vec<usize>,
    free_var: Vec<f64>,
}

impl PosteriorTarget {
    pub fn new(arch: &ArchSpec, x: &[Vec<f64>], y: &[f64], noise_var: f64) -> Result<Self> {
        let net = Network::new(arch)?;
        check_dim(x.len(), y.len())?;
        for xi in x {
            check_dim(net.input_dim(), xi.len())?;
        }
        if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training data".into()));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::param("noise_var", format!("must be > 0, got {noise_var}")));
        }
        let (free, free_var) = net
            .prior_variances()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        Ok(Self {
            net,
            x: x.to_vec(),
            y: y.to_vec(),
            noise_var,
            free,
            free_var,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Prior variance of each free parameter.
    pub fn prior_variances(&self) -> &[f64] {
        &self.free_var
    }

    /// Expands free parameters to a full `ParamSet`; fixed ones are zero.
    pub fn full_params(&self, theta: &[f64]) -> ParamSet {
        let mut values = vec![0.0; self.net.n_params()];
        for (&i, &t) in self.free.iter().zip(theta) {
            values[i] = t;
        }
        ParamSet { values }
    }

    pub fn free_params(&self, params: &ParamSet) -> Vec<f64> {
        self.free.iter().map(|&i| params.values[i]).collect()
    }
}

impl LogDensity for PosteriorTarget {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let full = self.full_params(theta).values;
        let mut full_grad = vec![0.0; full.len()];
        let outputs = self.net.outputs();
        let mut lp = 0.0;
        for (x, y) in self.x.iter().zip(&self.y) {
            self.net.forward_backward_raw(&full, x, &mut full_grad, |f| {
                let r = y - f[0];
                lp -= 0.5 * r * r / self.noise_var;
                let mut d = vec![0.0; outputs];
                d[0] = r / self.noise_var;
                d
            });
        }
        for (k, (&i, &v)) in self.free.iter().zip(&self.free_var).enumerate() {
            lp -= 0.5 * theta[k] * theta[k] / v;
            grad[k] = full_grad[i] - theta[k] / v;
        }
        lp
    }
}
