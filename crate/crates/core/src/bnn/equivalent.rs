//! Infinite-width kernels of architecture trees.

use super::activation::Activation;
use super::arch::{ArchSpec, HiddenSpec};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, MeanFn, PriorSpec, RbfLayerParams};
use crate::kernel::{hidden_add_kernel, Kernel};
use crate::warp::Warp;

impl Activation {
    /// `E[ψ(x)]` for a unit with these priors, where it has a closed form.
    pub fn mean_fn(&self, sigma2_w1: f64, sigma2_b1: f64) -> Result<MeanFn> {
        match *self {
            Activation::Relu => Ok(MeanFn::Relu { sigma2_w1, sigma2_b1 }),
            Activation::Erf | Activation::Tanh => Ok(MeanFn::Zero),
            Activation::Cosine => Ok(MeanFn::Cosine { sigma2_w1, sigma2_b1 }),
            Activation::Rbf { sigma2_g } => Ok(MeanFn::Rbf {
                sigma2_g,
                sigma2_u: sigma2_w1,
            }),
            Activation::LeakyRelu { .. } => Err(Error::NoAnalyticKernel(
                "leaky ReLU units have no mean function here".into(),
            )),
        }
    }

    /// `E[ψ(x) ψ(x')]` for a unit with these priors.
    pub fn unit_kernel(&self, sigma2_w1: f64, sigma2_b1: f64) -> Result<KernelSpec> {
        let priors = PriorSpec {
            sigma2_w1,
            sigma2_b1,
            sigma2_w2: 1.0,
        };
        match *self {
            Activation::Relu => Ok(KernelSpec::Relu(priors)),
            Activation::Erf => Ok(KernelSpec::Erf(priors)),
            Activation::Cosine => Ok(KernelSpec::CosBnn(priors)),
            Activation::Rbf { sigma2_g } => Ok(KernelSpec::RbfBnn(RbfLayerParams {
                sigma2_g,
                sigma2_u: sigma2_w1,
            })),
            Activation::LeakyRelu { .. } | Activation::Tanh => Err(Error::NoAnalyticKernel(format!(
                "no closed-form kernel for {} units",
                self.name()
            ))),
        }
    }
}

fn wrap_inputs<T>(
    base: T,
    dims: &Option<Vec<usize>>,
    warp: &Option<Warp>,
    warp_fn: impl FnOnce(T, Warp) -> T,
    project_fn: impl FnOnce(T, Vec<usize>) -> T,
) -> T {
    let mut out = base;
    if let Some(w) = warp {
        if *w != Warp::Identity {
            out = warp_fn(out, w.clone());
        }
    }
    if let Some(d) = dims {
        out = project_fn(out, d.clone());
    }
    out
}

impl HiddenSpec {
    /// Kernel of one hidden unit, `E[ψ(x) ψ(x')]`, and its mean `E[ψ(x)]`.
    pub fn unit_kernel(&self) -> Result<(KernelSpec, MeanFn)> {
        match self {
            HiddenSpec::Basic {
                activation,
                sigma2_w1,
                sigma2_b1,
                dims,
                warp,
            } => {
                let k = activation.unit_kernel(*sigma2_w1, *sigma2_b1)?;
                let m = activation.mean_fn(*sigma2_w1, *sigma2_b1)?;
                let k = wrap_inputs(
                    k,
                    dims,
                    warp,
                    |b, warp| KernelSpec::Warp { base: Box::new(b), warp },
                    |b, dims| KernelSpec::Project { base: Box::new(b), dims },
                );
                let m = wrap_inputs(
                    m,
                    dims,
                    warp,
                    |b, warp| MeanFn::Warp { base: Box::new(b), warp },
                    |b, dims| MeanFn::Project { base: Box::new(b), dims },
                );
                Ok((k, m))
            }
            HiddenSpec::Deep { .. } => Err(Error::NoAnalyticKernel(
                "deep stacks have no closed-form kernel here".into(),
            )),
            HiddenSpec::HiddenMul { children } => {
                let parts = children.iter().map(HiddenSpec::unit_kernel).collect::<Result<Vec<_>>>()?;
                let (ks, ms): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
                Ok((KernelSpec::Product { children: ks }, MeanFn::Product { children: ms }))
            }
            HiddenSpec::HiddenAdd { children } => {
                let mut parts = children.iter().map(HiddenSpec::unit_kernel);
                let (mut k, mut m) = parts
                    .next()
                    .ok_or_else(|| Error::param("children", "hidden combinator needs children"))??;
                for part in parts {
                    let (kb, mb) = part?;
                    let ka = Kernel::new(k)?;
                    let kb = Kernel::new(kb)?;
                    k = hidden_add_kernel(&ka, &kb, m.clone(), mb.clone(), 1.0)?.spec().clone();
                    m = MeanFn::Sum { children: vec![m, mb] };
                }
                Ok((k, m))
            }
        }
    }
}

impl ArchSpec {
    /// The covariance of output 0 in the infinite-width limit.
    ///
    /// Fails for deep stacks, activations without closed forms, and
    /// `OutputProduct` trees, whose limit is not Gaussian.
    pub fn equivalent_kernel(&self) -> Result<Kernel> {
        self.validate()?;
        Kernel::new(self.equivalent_spec()?)
    }

    fn equivalent_spec(&self) -> Result<KernelSpec> {
        match self {
            ArchSpec::Network {
                hidden,
                sigma2_w2,
                sigma2_b2,
                ..
            } => {
                let (unit, _) = hidden.unit_kernel()?;
                let mut k = if *sigma2_w2 == 1.0 {
                    unit
                } else {
                    KernelSpec::Product {
                        children: vec![KernelSpec::Constant { value: *sigma2_w2 }, unit],
                    }
                };
                if *sigma2_b2 > 0.0 {
                    k = KernelSpec::Sum {
                        children: vec![k, KernelSpec::Constant { value: *sigma2_b2 }],
                    };
                }
                Ok(k)
            }
            ArchSpec::OutputSum { children } => Ok(KernelSpec::Sum {
                children: children.iter().map(ArchSpec::equivalent_spec).collect::<Result<_>>()?,
            }),
            ArchSpec::OutputProduct { .. } => Err(Error::NoAnalyticKernel(
                "a product of network outputs is not a Gaussian process".into(),
            )),
        }
    }
}
