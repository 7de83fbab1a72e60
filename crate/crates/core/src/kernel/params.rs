use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

fn nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Squared-exponential hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    /// Output variance.
    pub sigma2: f64,
    pub length_scale: f64,
}

impl SeParams {
    pub fn new(sigma2: f64, length_scale: f64) -> Result<Self> {
        let p = Self { sigma2, length_scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma2", self.sigma2)?;
        positive("length_scale", self.length_scale)
    }
}

/// Exponential-sine-squared (periodic) hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssParams {
    pub sigma2: f64,
    /// Length scale in the warped (unit-circle) space, dimensionless.
    pub length_scale: f64,
    /// Period in input units.
    pub period: f64,
}

impl EssParams {
    pub fn new(sigma2: f64, length_scale: f64, period: f64) -> Result<Self> {
        let p = Self {
            sigma2,
            length_scale,
            period,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma2", self.sigma2)?;
        positive("length_scale", self.length_scale)?;
        positive("period", self.period)
    }
}

/// Gaussian prior variances of a single-hidden-layer network.
///
/// `sigma2_w2` is the variance *after* width scaling: a network of width `H`
/// draws its output weights from `N(0, sigma2_w2 / H)`, so the kernels built
/// from this record do not depend on the width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub sigma2_w1: f64,
    pub sigma2_b1: f64,
    pub sigma2_w2: f64,
}

impl PriorSpec {
    pub fn new(sigma2_w1: f64, sigma2_b1: f64, sigma2_w2: f64) -> Result<Self> {
        let p = Self {
            sigma2_w1,
            sigma2_b1,
            sigma2_w2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        nonnegative("sigma2_w1", self.sigma2_w1)?;
        nonnegative("sigma2_b1", self.sigma2_b1)?;
        positive("sigma2_w2", self.sigma2_w2)
    }

    /// Covariance of first-layer pre-activations, `σ²_b1 + σ²_w1 aᵀb`.
    pub fn preact_cov(&self, a: &[f64], b: &[f64]) -> f64 {
        self.sigma2_b1 + self.sigma2_w1 * dot(a, b)
    }

    pub fn with_output_variance(self, sigma2_w2: f64) -> Self {
        Self { sigma2_w2, ..self }
    }
}

/// Hyperparameters of a layer of RBF units `exp(-‖x − c‖² / 2σ²_g)` with
/// centers `c ~ N(0, σ²_u I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfLayerParams {
    pub sigma2_g: f64,
    pub sigma2_u: f64,
}

impl RbfLayerParams {
    pub fn new(sigma2_g: f64, sigma2_u: f64) -> Result<Self> {
        let p = Self { sigma2_g, sigma2_u };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma2_g", self.sigma2_g)?;
        positive("sigma2_u", self.sigma2_u)
    }

    /// `1/σ²_e = 2/σ²_g + 1/σ²_u`
    pub fn sigma2_e(&self) -> f64 {
        1.0 / (2.0 / self.sigma2_g + 1.0 / self.sigma2_u)
    }

    /// `σ²_s = 2σ²_g + σ⁴_g/σ²_u`
    pub fn sigma2_s(&self) -> f64 {
        2.0 * self.sigma2_g + self.sigma2_g * self.sigma2_g / self.sigma2_u
    }

    /// `σ²_m = 2σ²_u + σ²_g`
    pub fn sigma2_m(&self) -> f64 {
        2.0 * self.sigma2_u + self.sigma2_g
    }

    /// ESS parameters matching this layer applied to `(cos 2πx/p, sin 2πx/p)`:
    /// on the unit circle the RBF kernel is `(σ_e/σ_u)² exp(−1/σ²_m)
    /// exp(−2 sin²(πΔ/p)/σ²_s)`.
    pub fn periodic_ess(&self, period: f64) -> Result<EssParams> {
        let sigma2 = (self.sigma2_e() / self.sigma2_u) * (-1.0 / self.sigma2_m()).exp();
        EssParams::new(sigma2, self.sigma2_s().sqrt(), period)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_bad_values() {
        assert!(SeParams::new(0.0, 1.0).is_err());
        assert!(SeParams::new(1.0, -1.0).is_err());
        assert!(EssParams::new(1.0, 1.0, 0.0).is_err());
        assert!(PriorSpec::new(-1.0, 0.0, 1.0).is_err());
        assert!(PriorSpec::new(0.0, 0.0, 0.0).is_err());
        assert!(PriorSpec::new(0.0, 0.0, 1.0).is_ok());
        assert!(RbfLayerParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn rbf_derived_quantities() {
        let p = RbfLayerParams::new(0.5, 2.0).unwrap();
        assert!((1.0 / p.sigma2_e() - (4.0 + 0.5)).abs() < 1e-15);
        assert!((p.sigma2_s() - (1.0 + 0.125)).abs() < 1e-15);
        assert!((p.sigma2_m() - 4.5).abs() < 1e-15);
    }
}
