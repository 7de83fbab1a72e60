//! Input warpings `u: R^d -> R^m` shared by kernels and architectures.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Maps a scalar onto the unit circle: `(cos 2πx/p, sin 2πx/p)`.
pub fn warp_periodic(x: f64, period: f64) -> Result<[f64; 2]> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::param("period", format!("must be positive, got {period}")));
    }
    let phase = 2.0 * PI * x / period;
    Ok([phase.cos(), phase.sin()])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Warp {
    Identity,
    /// Replaces coordinate `index` by its periodic embedding; the two circle
    /// coordinates come first, followed by the untouched coordinates in order.
    Periodic {
        period: f64,
        #[serde(default)]
        index: usize,
    },
    /// Sends every input to the same point.
    Constant { value: Vec<f64> },
}

impl Warp {
    pub fn periodic(period: f64) -> Result<Self> {
        let w = Warp::Periodic { period, index: 0 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Warp::Periodic { period, .. } if !(*period > 0.0) || !period.is_finite() => {
                Err(Error::param("period", format!("must be positive, got {period}")))
            }
            Warp::Constant { value } if value.is_empty() => {
                Err(Error::param("value", "constant warp needs at least one coordinate"))
            }
            _ => Ok(()),
        }
    }

    /// Output dimension for a given input dimension.
    pub fn output_dim(&self, input_dim: usize) -> Result<usize> {
        match self {
            Warp::Identity => Ok(input_dim),
            Warp::Periodic { index, .. } => {
                if *index >= input_dim {
                    Err(Error::param(
                        "index",
                        format!("periodic warp index {index} out of range for input dimension {input_dim}"),
                    ))
                } else {
                    Ok(input_dim + 1)
                }
            }
            Warp::Constant { value } => Ok(value.len()),
        }
    }

    /// Smallest input dimension this warp can be applied to.
    pub fn min_input_dim(&self) -> usize {
        match self {
            Warp::Periodic { index, .. } => index + 1,
            _ => 0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            Warp::Identity => out.extend_from_slice(x),
            Warp::Periodic { period, index } => {
                let phase = 2.0 * PI * x[*index] / period;
                out.push(phase.cos());
                out.push(phase.sin());
                out.extend(
                    x.iter()
                        .enumerate()
                        .filter(|(i, _)| i != index)
                        .map(|(_, v)| *v),
                );
            }
            Warp::Constant { value } => out.extend_from_slice(value),
        }
    }
}
