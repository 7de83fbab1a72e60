//! Architecture trees.
//!
//! An [`ArchSpec`] produces scalar (or small-vector) outputs; its `Network`
//! nodes own an output layer and a [`HiddenSpec`] tree that produces `width`
//! hidden units. Hidden trees combine sub-networks pointwise at the hidden
//! layer (`HiddenMul`, `HiddenAdd`) and therefore share one output layer;
//! `OutputSum` children each keep their own.

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};
use crate::kernel::PriorSpec;
use crate::warp::Warp;

fn one() -> usize {
    1
}

/// One fully connected layer inside a `Deep` stack.
///
/// The first layer draws weights from `N(0, sigma2_w)`; later layers use the
/// width-scaled `N(0, sigma2_w / fan_in)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub activation: Activation,
    pub sigma2_w: f64,
    pub sigma2_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HiddenSpec {
    /// A single hidden layer. For RBF units `sigma2_w1` is the center prior
    /// variance and `sigma2_b1` is ignored.
    Basic {
        activation: Activation,
        sigma2_w1: f64,
        sigma2_b1: f64,
        /// Input coordinates this branch sees (all when absent).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dims: Option<Vec<usize>>,
        /// Applied after `dims`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        warp: Option<Warp>,
    },
    Deep {
        layers: Vec<DenseLayer>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dims: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        warp: Option<Warp>,
    },
    HiddenMul {
        children: Vec<HiddenSpec>,
    },
    HiddenAdd {
        children: Vec<HiddenSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArchSpec {
    Network {
        hidden: HiddenSpec,
        width: usize,
        /// Output-weight variance after width scaling.
        sigma2_w2: f64,
        /// Final-bias variance; zero means no final bias.
        #[serde(default)]
        sigma2_b2: f64,
        #[serde(default = "one")]
        input_dim: usize,
        #[serde(default = "one")]
        outputs: usize,
    },
    OutputSum {
        children: Vec<ArchSpec>,
    },
    /// Networks multiplied at their outputs. This does not give a GP with the
    /// product kernel; it exists for the negative result.
    OutputProduct {
        children: Vec<ArchSpec>,
    },
}

impl HiddenSpec {
    pub fn basic(activation: Activation, sigma2_w1: f64, sigma2_b1: f64) -> Self {
        HiddenSpec::Basic {
            activation,
            sigma2_w1,
            sigma2_b1,
            dims: None,
            warp: None,
        }
    }

    pub fn deep(layers: Vec<DenseLayer>) -> Self {
        HiddenSpec::Deep {
            layers,
            dims: None,
            warp: None,
        }
    }

    /// RBF units on the periodic embedding of input coordinate 0.
    pub fn periodic_rbf(sigma2_g: f64, sigma2_u: f64, period: f64) -> Self {
        HiddenSpec::basic(Activation::Rbf { sigma2_g }, sigma2_u, 0.0)
            .with_warp(Warp::Periodic { period, index: 0 })
    }

    pub fn with_dims(mut self, new_dims: Vec<usize>) -> Self {
        match &mut self {
            HiddenSpec::Basic { dims, .. } | HiddenSpec::Deep { dims, .. } => *dims = Some(new_dims),
            _ => panic!("dims apply to Basic and Deep branches only"),
        }
        self
    }

    pub fn with_warp(mut self, new_warp: Warp) -> Self {
        match &mut self {
            HiddenSpec::Basic { warp, .. } | HiddenSpec::Deep { warp, .. } => *warp = Some(new_warp),
            _ => panic!("warps apply to Basic and Deep branches only"),
        }
        self
    }

    pub(crate) fn contains_deep(&self) -> bool {
        match self {
            HiddenSpec::Basic { .. } => false,
            HiddenSpec::Deep { .. } => true,
            HiddenSpec::HiddenMul { children } | HiddenSpec::HiddenAdd { children } => {
                children.iter().any(HiddenSpec::contains_deep)
            }
        }
    }

    /// Dimension after input selection and warping.
    pub(crate) fn branch_input_dim(
        input_dim: usize,
        dims: &Option<Vec<usize>>,
        warp: &Option<Warp>,
    ) -> Result<usize> {
        let mut d = input_dim;
        if let Some(dims) = dims {
            if dims.is_empty() {
                return Err(Error::param("dims", "input subset must not be empty"));
            }
            if let Some(&bad) = dims.iter().find(|&&i| i >= input_dim) {
                return Err(Error::param(
                    "dims",
                    format!("index {bad} out of range for input dimension {input_dim}"),
                ));
            }
            d = dims.len();
        }
        if let Some(w) = warp {
            w.validate()?;
            d = w.output_dim(d)?;
        }
        Ok(d)
    }

    fn validate(&self, input_dim: usize) -> Result<()> {
        match self {
            HiddenSpec::Basic {
                activation,
                sigma2_w1,
                sigma2_b1,
                dims,
                warp,
            } => {
                activation.validate()?;
                Self::branch_input_dim(input_dim, dims, warp)?;
                if activation.is_rbf() {
                    if !(*sigma2_w1 > 0.0) {
                        return Err(Error::param("sigma2_w1", "RBF center variance must be > 0"));
                    }
                } else if !(*sigma2_w1 >= 0.0 && *sigma2_b1 >= 0.0) {
                    return Err(Error::param("sigma2_w1/sigma2_b1", "must be >= 0"));
                }
                Ok(())
            }
            HiddenSpec::Deep { layers, dims, warp } => {
                if layers.is_empty() {
                    return Err(Error::param("layers", "deep branch needs at least one layer"));
                }
                Self::branch_input_dim(input_dim, dims, warp)?;
                for l in layers {
                    l.activation.validate()?;
                    if l.activation.is_rbf() && !(l.sigma2_w > 0.0) {
                        return Err(Error::param("sigma2_w", "RBF center variance must be > 0"));
                    }
                    if !(l.sigma2_w >= 0.0 && l.sigma2_b >= 0.0) {
                        return Err(Error::param("sigma2_w/sigma2_b", "must be >= 0"));
                    }
                }
                Ok(())
            }
            HiddenSpec::HiddenMul { children } | HiddenSpec::HiddenAdd { children } => {
                if children.is_empty() {
                    return Err(Error::param("children", "hidden combinator needs children"));
                }
                children.iter().try_for_each(|c| c.validate(input_dim))
            }
        }
    }
}

impl ArchSpec {
    pub fn network(hidden: HiddenSpec, width: usize, sigma2_w2: f64, input_dim: usize) -> Self {
        ArchSpec::Network {
            hidden,
            width,
            sigma2_w2,
            sigma2_b2: 0.0,
            input_dim,
            outputs: 1,
        }
    }

    /// Single-hidden-layer network.
    pub fn basic(activation: Activation, priors: PriorSpec, width: usize, input_dim: usize) -> Self {
        Self::network(
            HiddenSpec::basic(activation, priors.sigma2_w1, priors.sigma2_b1),
            width,
            priors.sigma2_w2,
            input_dim,
        )
    }

    pub fn hidden_mul(children: Vec<HiddenSpec>, width: usize, sigma2_w2: f64, input_dim: usize) -> Self {
        Self::network(HiddenSpec::HiddenMul { children }, width, sigma2_w2, input_dim)
    }

    pub fn hidden_add(children: Vec<HiddenSpec>, width: usize, sigma2_w2: f64, input_dim: usize) -> Self {
        Self::network(HiddenSpec::HiddenAdd { children }, width, sigma2_w2, input_dim)
    }

    pub fn output_sum(children: Vec<ArchSpec>) -> Self {
        ArchSpec::OutputSum { children }
    }

    pub fn output_product(children: Vec<ArchSpec>) -> Self {
        ArchSpec::OutputProduct { children }
    }

    pub fn with_final_bias(mut self, variance: f64) -> Self {
        if let ArchSpec::Network { sigma2_b2, .. } = &mut self {
            *sigma2_b2 = variance;
        }
        self
    }

    pub fn with_outputs(mut self, n: usize) -> Self {
        match &mut self {
            ArchSpec::Network { outputs, .. } => *outputs = n,
            ArchSpec::OutputSum { children } | ArchSpec::OutputProduct { children } => {
                for c in children {
                    *c = c.clone().with_outputs(n);
                }
            }
        }
        self
    }

    /// Same tree with every network resized to `width` hidden units.
    pub fn with_width(&self, new_width: usize) -> Self {
        let mut a = self.clone();
        a.set_width(new_width);
        a
    }

    fn set_width(&mut self, new_width: usize) {
        match self {
            ArchSpec::Network { width, .. } => *width = new_width,
            ArchSpec::OutputSum { children } | ArchSpec::OutputProduct { children } => {
                children.iter_mut().for_each(|c| c.set_width(new_width))
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ArchSpec::Network { input_dim, .. } => *input_dim,
            ArchSpec::OutputSum { children } | ArchSpec::OutputProduct { children } => {
                children.first().map_or(1, ArchSpec::input_dim)
            }
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            ArchSpec::Network { outputs, .. } => *outputs,
            ArchSpec::OutputSum { children } | ArchSpec::OutputProduct { children } => {
                children.first().map_or(1, ArchSpec::outputs)
            }
        }
    }

    /// True when every network has a single hidden layer and outputs are
    /// only ever summed: the variance-reduced kernel estimator applies.
    pub fn is_single_layer(&self) -> bool {
        match self {
            ArchSpec::Network { hidden, .. } => !hidden.contains_deep(),
            ArchSpec::OutputSum { children } => children.iter().all(ArchSpec::is_single_layer),
            ArchSpec::OutputProduct { .. } => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArchSpec::Network {
                hidden,
                width,
                sigma2_w2,
                sigma2_b2,
                input_dim,
                outputs,
            } => {
                if *width == 0 {
                    return Err(Error::param("width", "must be >= 1"));
                }
                if *input_dim == 0 || *outputs == 0 {
                    return Err(Error::param("input_dim/outputs", "must be >= 1"));
                }
                if !(*sigma2_w2 > 0.0 && sigma2_w2.is_finite()) {
                    return Err(Error::param("sigma2_w2", format!("must be > 0, got {sigma2_w2}")));
                }
                if !(*sigma2_b2 >= 0.0) {
                    return Err(Error::param("sigma2_b2", "must be >= 0"));
                }
                hidden.validate(*input_dim)
            }
            ArchSpec::OutputSum { children } | ArchSpec::OutputProduct { children } => {
                let first = children
                    .first()
                    .ok_or_else(|| Error::param("children", "output combinator needs children"))?;
                for c in children {
                    c.validate()?;
                    if c.input_dim() != first.input_dim() {
                        return Err(Error::DimensionMismatch {
                            expected: first.input_dim(),
                            found: c.input_dim(),
                        });
                    }
                    if c.outputs() != first.outputs() {
                        return Err(Error::DimensionMismatch {
                            expected: first.outputs(),
                            found: c.outputs(),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}
