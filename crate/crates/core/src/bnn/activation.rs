use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Erf,
    Tanh,
    Cosine,
    /// `exp(−‖x − c‖² / 2σ²_g)` around a center `c` drawn from the weight
    /// prior; RBF units carry no bias.
    Rbf { sigma2_g: f64 },
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => {
                Err(Error::param("slope", format!("must lie in (0, 1), got {slope}")))
            }
            Activation::Rbf { sigma2_g } if !(sigma2_g > 0.0 && sigma2_g.is_finite()) => {
                Err(Error::param("sigma2_g", format!("must be > 0, got {sigma2_g}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_rbf(&self) -> bool {
        matches!(self, Activation::Rbf { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu { .. } => "leaky_relu",
            Activation::Erf => "erf",
            Activation::Tanh => "tanh",
            Activation::Cosine => "cosine",
            Activation::Rbf { .. } => "rbf",
        }
    }

    /// Pointwise nonlinearity on a pre-activation. Not meaningful for RBF.
    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Erf => libm::erf(z),
            Activation::Tanh => z.tanh(),
            Activation::Cosine => z.cos(),
            Activation::Rbf { .. } => unreachable!("RBF units are evaluated from distances"),
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Erf => 2.0 / PI.sqrt() * (-z * z).exp(),
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Cosine => -z.sin(),
            Activation::Rbf { .. } => unreachable!("RBF units are evaluated from distances"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_central_differences() {
        let acts = [
            Activation::Relu,
            Activation::LeakyRelu { slope: 0.2 },
            Activation::Erf,
            Activation::Tanh,
            Activation::Cosine,
        ];
        for a in acts {
            for z in [-1.3, -0.2, 0.4, 2.1] {
                let h = 1e-6;
                let fd = (a.apply(z + h) - a.apply(z - h)) / (2.0 * h);
                assert!((fd - a.derivative(z)).abs() < 1e-6, "{a:?} at {z}");
            }
        }
    }

    #[test]
    fn validation() {
        assert!(Activation::LeakyRelu { slope: 1.5 }.validate().is_err());
        assert!(Activation::Rbf { sigma2_g: 0.0 }.validate().is_err());
        assert!(Activation::Rbf { sigma2_g: 0.3 }.validate().is_ok());
    }
}
