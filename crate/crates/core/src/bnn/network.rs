//! Compiled architectures: a flat parameter layout plus forward and
//! reverse-mode evaluation.
//!
//! Parameters are laid out depth-first. Within a layer the weight matrix
//! comes first (row-major, one row per unit), then the bias vector if the
//! layer has one. A network's output weights (`outputs × width`, row-major)
//! follow its hidden tree, then the optional final bias.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::arch::{ArchSpec, HiddenSpec};
use crate::error::{check_dim, Result};
use crate::warp::Warp;

/// One concrete draw of every weight and bias of an architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Branch {
    dims: Option<Vec<usize>>,
    warp: Option<Warp>,
}

impl Branch {
    fn prepare(&self, x: &[f64]) -> Vec<f64> {
        let selected: Vec<f64> = match &self.dims {
            Some(d) => d.iter().map(|&i| x[i]).collect(),
            None => x.to_vec(),
        };
        match &self.warp {
            Some(w) => w.apply(&selected),
            None => selected,
        }
    }
}

#[derive(Clone, Debug)]
struct Layer {
    activation: Activation,
    fan_in: usize,
    width: usize,
    weights: usize,
    bias: Option<usize>,
}

impl Layer {
    /// Returns (pre-activations, outputs). For RBF units the "pre-activation"
    /// is the squared distance to the center.
    fn forward(&self, theta: &[f64], a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pre = Vec::with_capacity(self.width);
        let mut out = Vec::with_capacity(self.width);
        match self.activation {
            Activation::Rbf { sigma2_g } => {
                for i in 0..self.width {
                    let c = &theta[self.weights + i * self.fan_in..][..self.fan_in];
                    let d2: f64 = a.iter().zip(c).map(|(x, c)| (x - c) * (x - c)).sum();
                    pre.push(d2);
                    out.push((-d2 / (2.0 * sigma2_g)).exp());
                }
            }
            act => {
                for i in 0..self.width {
                    let w = &theta[self.weights + i * self.fan_in..][..self.fan_in];
                    let mut z: f64 = w.iter().zip(a).map(|(w, x)| w * x).sum();
                    if let Some(b) = self.bias {
                        z += theta[b + i];
                    }
                    pre.push(z);
                    out.push(act.apply(z));
                }
            }
        }
        (pre, out)
    }

    /// Accumulates parameter gradients and, when `want_input` is set,
    /// returns the gradient with respect to the layer input.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        theta: &[f64],
        a: &[f64],
        pre: &[f64],
        out: &[f64],
        dout: &[f64],
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let mut da = if want_input {
            Some(vec![0.0; self.fan_in])
        } else {
            None
        };
        match self.activation {
            Activation::Rbf { sigma2_g } => {
                for i in 0..self.width {
                    let g = dout[i] * out[i] / sigma2_g;
                    if g == 0.0 {
                        continue;
                    }
                    let off = self.weights + i * self.fan_in;
                    for j in 0..self.fan_in {
                        let diff = a[j] - theta[off + j];
                        grad[off + j] += g * diff;
                        if let Some(da) = da.as_mut() {
                            da[j] -= g * diff;
                        }
                    }
                }
            }
            act => {
                for i in 0..self.width {
                    let dz = dout[i] * act.derivative(pre[i]);
                    if dz == 0.0 {
                        continue;
                    }
                    let off = self.weights + i * self.fan_in;
                    for j in 0..self.fan_in {
                        grad[off + j] += dz * a[j];
                        if let Some(da) = da.as_mut() {
                            da[j] += theta[off + j] * dz;
                        }
                    }
                    if let Some(b) = self.bias {
                        grad[b + i] += dz;
                    }
                }
            }
        }
        da
    }
}

#[derive(Clone, Debug)]
enum HNode {
    Stack { branch: Branch, layers: Vec<Layer> },
    Mul(Vec<HNode>),
    Add(Vec<HNode>),
}

#[derive(Clone, Debug)]
struct Net {
    hidden: HNode,
    width: usize,
    outputs: usize,
    weights: usize,
    bias: Option<usize>,
    sigma2_w2: f64,
    sigma2_b2: f64,
}

#[derive(Clone, Debug)]
enum ONode {
    Net(Net),
    Sum(Vec<ONode>),
    Product(Vec<ONode>),
}

enum HCache {
    Stack {
        inputs: Vec<Vec<f64>>,
        pres: Vec<Vec<f64>>,
        outs: Vec<Vec<f64>>,
    },
    Combine {
        children: Vec<HCache>,
        values: Vec<Vec<f64>>,
    },
}

enum OCache {
    Net { hidden: HCache, h: Vec<f64> },
    Combine {
        children: Vec<OCache>,
        values: Vec<Vec<f64>>,
    },
}

struct Builder {
    prior_var: Vec<f64>,
}

impl Builder {
    fn alloc(&mut self, n: usize, var: f64) -> usize {
        let off = self.prior_var.len();
        self.prior_var.extend(std::iter::repeat_n(var, n));
        off
    }

    fn hidden(&mut self, spec: &HiddenSpec, input_dim: usize, width: usize) -> Result<HNode> {
        Ok(match spec {
            HiddenSpec::Basic {
                activation,
                sigma2_w1,
                sigma2_b1,
                dims,
                warp,
            } => {
                let fan_in = HiddenSpec::branch_input_dim(input_dim, dims, warp)?;
                let weights = self.alloc(width * fan_in, *sigma2_w1);
                let bias = (!activation.is_rbf() && *sigma2_b1 > 0.0)
                    .then(|| self.alloc(width, *sigma2_b1));
                HNode::Stack {
                    branch: Branch {
                        dims: dims.clone(),
                        warp: warp.clone(),
                    },
                    layers: vec![Layer {
                        activation: *activation,
                        fan_in,
                        width,
                        weights,
                        bias,
                    }],
                }
            }
            HiddenSpec::Deep { layers, dims, warp } => {
                let mut fan_in = HiddenSpec::branch_input_dim(input_dim, dims, warp)?;
                let mut out = Vec::with_capacity(layers.len());
                for (k, l) in layers.iter().enumerate() {
                    let wvar = if k == 0 { l.sigma2_w } else { l.sigma2_w / fan_in as f64 };
                    let weights = self.alloc(width * fan_in, wvar);
                    let bias = (!l.activation.is_rbf() && l.sigma2_b > 0.0)
                        .then(|| self.alloc(width, l.sigma2_b));
                    out.push(Layer {
                        activation: l.activation,
                        fan_in,
                        width,
                        weights,
                        bias,
                    });
                    fan_in = width;
                }
                HNode::Stack {
                    branch: Branch {
                        dims: dims.clone(),
                        warp: warp.clone(),
                    },
                    layers: out,
                }
            }
            HiddenSpec::HiddenMul { children } => HNode::Mul(
                children
                    .iter()
                    .map(|c| self.hidden(c, input_dim, width))
                    .collect::<Result<_>>()?,
            ),
            HiddenSpec::HiddenAdd { children } => HNode::Add(
                children
                    .iter()
                    .map(|c| self.hidden(c, input_dim, width))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn output(&mut self, spec: &ArchSpec) -> Result<ONode> {
        Ok(match spec {
            ArchSpec::Network {
                hidden,
                width,
                sigma2_w2,
                sigma2_b2,
                input_dim,
                outputs,
            } => {
                let hidden = self.hidden(hidden, *input_dim, *width)?;
                let weights = self.alloc(outputs * width, sigma2_w2 / *width as f64);
                let bias = (*sigma2_b2 > 0.0).then(|| self.alloc(*outputs, *sigma2_b2));
                ONode::Net(Net {
                    hidden,
                    width: *width,
                    outputs: *outputs,
                    weights,
                    bias,
                    sigma2_w2: *sigma2_w2,
                    sigma2_b2: *sigma2_b2,
                })
            }
            ArchSpec::OutputSum { children } => {
                ONode::Sum(children.iter().map(|c| self.output(c)).collect::<Result<_>>()?)
            }
            ArchSpec::OutputProduct { children } => {
                ONode::Product(children.iter().map(|c| self.output(c)).collect::<Result<_>>()?)
            }
        })
    }
}

fn hidden_forward(node: &HNode, theta: &[f64], x: &[f64]) -> (Vec<f64>, HCache) {
    match node {
        HNode::Stack { branch, layers } => {
            let mut a = branch.prepare(x);
            let mut inputs = Vec::with_capacity(layers.len());
            let mut pres = Vec::with_capacity(layers.len());
            let mut outs = Vec::with_capacity(layers.len());
            for l in layers {
                let (pre, out) = l.forward(theta, &a);
                inputs.push(std::mem::replace(&mut a, out.clone()));
                pres.push(pre);
                outs.push(out);
            }
            (a, HCache::Stack { inputs, pres, outs })
        }
        HNode::Mul(children) | HNode::Add(children) => {
            let mul = matches!(node, HNode::Mul(_));
            let mut caches = Vec::with_capacity(children.len());
            let mut values = Vec::with_capacity(children.len());
            for c in children {
                let (h, cache) = hidden_forward(c, theta, x);
                values.push(h);
                caches.push(cache);
            }
            let width = values[0].len();
            let h: Vec<f64> = (0..width)
                .map(|i| {
                    if mul {
                        values.iter().map(|v| v[i]).product()
                    } else {
                        values.iter().map(|v| v[i]).sum()
                    }
                })
                .collect();
            (
                h,
                HCache::Combine {
                    children: caches,
                    values,
                },
            )
        }
    }
}

fn hidden_backward(node: &HNode, theta: &[f64], cache: &HCache, dh: &[f64], grad: &mut [f64]) {
    match (node, cache) {
        (HNode::Stack { layers, .. }, HCache::Stack { inputs, pres, outs }) => {
            let mut d = dh.to_vec();
            for k in (0..layers.len()).rev() {
                match layers[k].backward(theta, &inputs[k], &pres[k], &outs[k], &d, grad, k > 0) {
                    Some(da) => d = da,
                    None => break,
                }
            }
        }
        (HNode::Add(children), HCache::Combine { children: caches, .. }) => {
            for (c, cache) in children.iter().zip(caches) {
                hidden_backward(c, theta, cache, dh, grad);
            }
        }
        (HNode::Mul(children), HCache::Combine { children: caches, values }) => {
            for (k, (c, cache)) in children.iter().zip(caches).enumerate() {
                let dk: Vec<f64> = (0..dh.len())
                    .map(|i| {
                        let others: f64 = values
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != k)
                            .map(|(_, v)| v[i])
                            .product();
                        dh[i] * others
                    })
                    .collect();
                hidden_backward(c, theta, cache, &dk, grad);
            }
        }
        _ => unreachable!("cache shape follows the node"),
    }
}

fn output_forward(node: &ONode, theta: &[f64], x: &[f64]) -> (Vec<f64>, OCache) {
    match node {
        ONode::Net(net) => {
            let (h, hidden) = hidden_forward(&net.hidden, theta, x);
            let f = (0..net.outputs)
                .map(|k| {
                    let w = &theta[net.weights + k * net.width..][..net.width];
                    let mut v: f64 = w.iter().zip(&h).map(|(w, h)| w * h).sum();
                    if let Some(b) = net.bias {
                        v += theta[b + k];
                    }
                    v
                })
                .collect();
            (f, OCache::Net { hidden, h })
        }
        ONode::Sum(children) | ONode::Product(children) => {
            let product = matches!(node, ONode::Product(_));
            let mut caches = Vec::with_capacity(children.len());
            let mut values = Vec::with_capacity(children.len());
            for c in children {
                let (f, cache) = output_forward(c, theta, x);
                values.push(f);
                caches.push(cache);
            }
            let n = values[0].len();
            let f = (0..n)
                .map(|k| {
                    if product {
                        values.iter().map(|v| v[k]).product()
                    } else {
                        values.iter().map(|v| v[k]).sum()
                    }
                })
                .collect();
            (
                f,
                OCache::Combine {
                    children: caches,
                    values,
                },
            )
        }
    }
}

fn output_backward(node: &ONode, theta: &[f64], cache: &OCache, dout: &[f64], grad: &mut [f64]) {
    match (node, cache) {
        (ONode::Net(net), OCache::Net { hidden, h }) => {
            let mut dh = vec![0.0; net.width];
            for (k, &d) in dout.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let off = net.weights + k * net.width;
                for i in 0..net.width {
                    grad[off + i] += d * h[i];
                    dh[i] += theta[off + i] * d;
                }
                if let Some(b) = net.bias {
                    grad[b + k] += d;
                }
            }
            hidden_backward(&net.hidden, theta, hidden, &dh, grad);
        }
        (ONode::Sum(children), OCache::Combine { children: caches, .. }) => {
            for (c, cache) in children.iter().zip(caches) {
                output_backward(c, theta, cache, dout, grad);
            }
        }
        (ONode::Product(children), OCache::Combine { children: caches, values }) => {
            for (j, (c, cache)) in children.iter().zip(caches).enumerate() {
                let d: Vec<f64> = (0..dout.len())
                    .map(|k| {
                        let others: f64 = values
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| *i != j)
                            .map(|(_, v)| v[k])
                            .product();
                        dout[k] * others
                    })
                    .collect();
                output_backward(c, theta, cache, &d, grad);
            }
        }
        _ => unreachable!("cache shape follows the node"),
    }
}

fn conditional_moment(node: &ONode, theta: &[f64], x: &[f64], xp: &[f64]) -> Option<f64> {
    match node {
        ONode::Net(net) => {
            let (h, _) = hidden_forward(&net.hidden, theta, x);
            let (hp, _) = hidden_forward(&net.hidden, theta, xp);
            let s: f64 = h.iter().zip(&hp).map(|(a, b)| a * b).sum();
            Some(net.sigma2_w2 / net.width as f64 * s + net.sigma2_b2)
        }
        ONode::Sum(children) => children
            .iter()
            .map(|c| conditional_moment(c, theta, x, xp))
            .sum(),
        ONode::Product(_) => None,
    }
}

fn collect_output_ranges(node: &ONode, out: &mut Vec<Range<usize>>) {
    match node {
        ONode::Net(net) => out.push(net.weights..net.weights + net.outputs * net.width),
        ONode::Sum(c) | ONode::Product(c) => c.iter().for_each(|c| collect_output_ranges(c, out)),
    }
}

/// An [`ArchSpec`] compiled to a flat parameter layout.
#[derive(Clone, Debug)]
pub struct Network {
    spec: ArchSpec,
    root: ONode,
    prior_var: Vec<f64>,
}

impl Network {
    pub fn new(spec: &ArchSpec) -> Result<Self> {
        spec.validate()?;
        let mut b = Builder {
            prior_var: Vec::new(),
        };
        let root = b.output(spec)?;
        Ok(Network {
            spec: spec.clone(),
            root,
            prior_var: b.prior_var,
        })
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.prior_var.len()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn outputs(&self) -> usize {
        self.spec.outputs()
    }

    /// Prior variance of each parameter, in layout order.
    pub fn prior_variances(&self) -> &[f64] {
        &self.prior_var
    }

    /// Index ranges of every output-weight block.
    pub fn output_weight_ranges(&self) -> Vec<Range<usize>> {
        let mut v = Vec::new();
        collect_output_ranges(&self.root, &mut v);
        v
    }

    fn check(&self, params: &[f64], x: &[f64]) -> Result<()> {
        check_dim(self.n_params(), params.len())?;
        check_dim(self.input_dim(), x.len())
    }

    /// All outputs at `x`.
    pub fn forward_multi(&self, params: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
        self.check(&params.values, x)?;
        Ok(output_forward(&self.root, &params.values, x).0)
    }

    /// First output at `x`.
    pub fn forward(&self, params: &ParamSet, x: &[f64]) -> Result<f64> {
        Ok(self.forward_multi(params, x)?[0])
    }

    /// Unchecked evaluation on a raw parameter slice.
    pub(crate) fn eval_raw(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        output_forward(&self.root, theta, x).0
    }

    /// Outputs at `x`; adds `dout · ∂f/∂θ` into `grad`.
    pub fn backward(&self, theta: &[f64], x: &[f64], dout: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        self.check(theta, x)?;
        check_dim(self.n_params(), grad.len())?;
        check_dim(self.outputs(), dout.len())?;
        Ok(self.backward_raw(theta, x, dout, grad))
    }

    pub(crate) fn backward_raw(&self, theta: &[f64], x: &[f64], dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (f, cache) = output_forward(&self.root, theta, x);
        output_backward(&self.root, theta, &cache, dout, grad);
        f
    }

    /// Forward pass, then adds `dout(f) · ∂f/∂θ` into `grad`. Returns `f`.
    pub(crate) fn forward_backward_raw(
        &self,
        theta: &[f64],
        x: &[f64],
        grad: &mut [f64],
        dout: impl FnOnce(&[f64]) -> Vec<f64>,
    ) -> Vec<f64> {
        let (f, cache) = output_forward(&self.root, theta, x);
        let d = dout(&f);
        output_backward(&self.root, theta, &cache, &d, grad);
        f
    }

    /// `E[f(x) f(x') | hidden parameters]`, i.e. the second moment with the
    /// output weights integrated out. `None` when outputs are multiplied.
    pub fn conditional_second_moment(&self, params: &ParamSet, x: &[f64], x_p: &[f64]) -> Result<Option<f64>> {
        self.check(&params.values, x)?;
        check_dim(self.input_dim(), x_p.len())?;
        Ok(conditional_moment(&self.root, &params.values, x, x_p))
    }

    pub(crate) fn conditional_second_moment_raw(&self, theta: &[f64], x: &[f64], xp: &[f64]) -> Option<f64> {
        conditional_moment(&self.root, theta, x, xp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::arch::DenseLayer;
    use crate::kernel::PriorSpec;

    #[test]
    fn hand_set_relu_unit() {
        let arch = ArchSpec::basic(Activation::Relu, PriorSpec::new(1.0, 1.0, 1.0).unwrap(), 1, 1);
        let net = Network::new(&arch).unwrap();
        assert_eq!(net.n_params(), 3);
        let p = ParamSet {
            values: vec![1.0, -0.5, 2.0],
        };
        assert_eq!(net.forward(&p, &[1.0]).unwrap(), 1.0);
        assert!(net.forward(&p, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn layout_and_prior_variances() {
        let arch = ArchSpec::basic(Activation::Erf, PriorSpec::new(2.0, 0.5, 3.0).unwrap(), 4, 2)
            .with_final_bias(0.7);
        let net = Network::new(&arch).unwrap();
        let v = net.prior_variances();
        assert_eq!(v.len(), 8 + 4 + 4 + 1);
        assert!(v[..8].iter().all(|&s| s == 2.0));
        assert!(v[8..12].iter().all(|&s| s == 0.5));
        assert!(v[12..16].iter().all(|&s| s == 0.75));
        assert_eq!(v[16], 0.7);
        assert_eq!(net.output_weight_ranges(), vec![12..16]);
    }

    fn gradient_check(arch: &ArchSpec, x: &[f64]) {
        use rand::Rng;
        let net = Network::new(arch).unwrap();
        let mut rng = crate::rng::from_seed(3);
        let theta: Vec<f64> = (0..net.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dout: Vec<f64> = (0..net.outputs()).map(|k| 1.0 + k as f64).collect();
        let mut grad = vec![0.0; theta.len()];
        net.backward(&theta, x, &dout, &mut grad).unwrap();
        let obj = |t: &[f64]| -> f64 {
            net.eval_raw(t, x).iter().zip(&dout).map(|(f, d)| f * d).sum()
        };
        for i in 0..theta.len() {
            let h = 1e-6;
            let mut tp = theta.clone();
            tp[i] += h;
            let mut tm = theta.clone();
            tm[i] -= h;
            let fd = (obj(&tp) - obj(&tm)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {i}: fd {fd} vs {}",
                grad[i]
            );
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let pr = PriorSpec::new(1.0, 1.0, 1.0).unwrap();
        gradient_check(&ArchSpec::basic(Activation::Tanh, pr, 5, 2), &[0.3, -0.8]);
        gradient_check(
            &ArchSpec::hidden_mul(
                vec![
                    HiddenSpec::basic(Activation::Erf, 1.0, 0.5),
                    HiddenSpec::periodic_rbf(0.4, 1.0, 1.3),
                ],
                4,
                1.0,
                1,
            ),
            &[0.7],
        );
        gradient_check(
            &ArchSpec::output_product(vec![
                ArchSpec::basic(Activation::Cosine, pr, 3, 1),
                ArchSpec::hidden_add(
                    vec![
                        HiddenSpec::basic(Activation::Tanh, 1.0, 1.0),
                        HiddenSpec::basic(Activation::Rbf { sigma2_g: 0.5 }, 1.0, 0.0),
                    ],
                    3,
                    1.0,
                    1,
                ),
            ]),
            &[0.2],
        );
        let deep = HiddenSpec::deep(vec![
            DenseLayer {
                activation: Activation::Tanh,
                sigma2_w: 1.0,
                sigma2_b: 1.0,
            },
            DenseLayer {
                activation: Activation::Erf,
                sigma2_w: 1.0,
                sigma2_b: 0.1,
            },
        ])
        .with_warp(Warp::Periodic { period: 6.0, index: 0 });
        gradient_check(
            &ArchSpec::hidden_mul(
                vec![deep, HiddenSpec::basic(Activation::Tanh, 0.2, 0.2).with_dims(vec![0])],
                4,
                10.0,
                2,
            )
            .with_final_bias(1.0)
            .with_outputs(3),
            &[2.5, -0.4],
        );
    }
}
