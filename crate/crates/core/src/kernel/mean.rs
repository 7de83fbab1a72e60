//! Expected hidden-unit activations `m(x) = E[ψ(x)]` under the first-layer
//! priors. These feed the cross terms that appear when two sub-networks are
//! summed at their hidden layer.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::params::dot;
use crate::error::{Error, Result};
use crate::warp::Warp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeanFn {
    /// Odd activations (erf, tanh) under zero-mean priors.
    Zero,
    Constant { value: f64 },
    /// `√(s(x,x) / 2π)`
    Relu { sigma2_w1: f64, sigma2_b1: f64 },
    /// `exp(−(σ²_w1 xᵀx + σ²_b1)/2)`
    Cosine { sigma2_w1: f64, sigma2_b1: f64 },
    /// `Π_d √(σ²_g/(σ²_g+σ²_u)) exp(−x_d²/2(σ²_g+σ²_u))`
    Rbf { sigma2_g: f64, sigma2_u: f64 },
    Warp { base: Box<MeanFn>, warp: Warp },
    Project { base: Box<MeanFn>, dims: Vec<usize> },
    Sum { children: Vec<MeanFn> },
    Product { children: Vec<MeanFn> },
}

impl MeanFn {
    pub fn is_zero(&self) -> bool {
        match self {
            MeanFn::Zero => true,
            MeanFn::Constant { value } => *value == 0.0,
            MeanFn::Warp { base, .. } | MeanFn::Project { base, .. } => base.is_zero(),
            MeanFn::Sum { children } => children.iter().all(MeanFn::is_zero),
            MeanFn::Product { children } => children.iter().any(MeanFn::is_zero),
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeanFn::Constant { value } if !value.is_finite() => {
                Err(Error::param("value", "mean constant must be finite"))
            }
            MeanFn::Relu { sigma2_w1, sigma2_b1 } | MeanFn::Cosine { sigma2_w1, sigma2_b1 }
                if !(*sigma2_w1 >= 0.0 && *sigma2_b1 >= 0.0) =>
            {
                Err(Error::param("sigma2_w1/sigma2_b1", "must be >= 0"))
            }
            MeanFn::Rbf { sigma2_g, sigma2_u } if !(*sigma2_g > 0.0 && *sigma2_u > 0.0) => {
                Err(Error::param("sigma2_g/sigma2_u", "must be > 0"))
            }
            MeanFn::Warp { base, warp } => {
                warp.validate()?;
                base.validate()
            }
            MeanFn::Project { base, dims } => {
                if dims.is_empty() {
                    return Err(Error::param("dims", "projection needs at least one index"));
                }
                base.validate()
            }
            MeanFn::Sum { children } | MeanFn::Product { children } => {
                children.iter().try_for_each(MeanFn::validate)
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFn::Zero => 0.0,
            MeanFn::Constant { value } => *value,
            MeanFn::Relu { sigma2_w1, sigma2_b1 } => {
                ((sigma2_b1 + sigma2_w1 * dot(x, x)) / (2.0 * PI)).sqrt()
            }
            MeanFn::Cosine { sigma2_w1, sigma2_b1 } => {
                (-0.5 * (sigma2_w1 * dot(x, x) + sigma2_b1)).exp()
            }
            MeanFn::Rbf { sigma2_g, sigma2_u } => {
                let v = sigma2_g + sigma2_u;
                x.iter()
                    .map(|xi| (sigma2_g / v).sqrt() * (-xi * xi / (2.0 * v)).exp())
                    .product()
            }
            MeanFn::Warp { base, warp } => base.eval(&warp.apply(x)),
            MeanFn::Project { base, dims } => {
                let sub: Vec<f64> = dims.iter().map(|&i| x[i]).collect();
                base.eval(&sub)
            }
            MeanFn::Sum { children } => children.iter().map(|m| m.eval(x)).sum(),
            MeanFn::Product { children } => children.iter().map(|m| m.eval(x)).product(),
        }
    }
}
