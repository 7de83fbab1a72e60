//! Analytic kernels and the kernel-combination algebra.
//!
//! A [`Kernel`] is an immutable, validated tree. Leaves are closed-form
//! covariance functions; interior nodes add, multiply, raise to a power,
//! warp inputs, select input coordinates, or form the hidden-layer sum with
//! its mean cross terms. The tree serializes to a tagged JSON form
//! ([`KernelSpec`]) that mirrors the architecture schema in [`crate::bnn`].

mod analytic;
mod mean;
mod params;

pub use analytic::{k_cos_bnn, k_erf, k_ess, k_rbf_bnn, k_relu, k_relu_periodic, k_se};
pub use mean::MeanFn;
pub use params::{EssParams, PriorSpec, RbfLayerParams, SeParams};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::warp::Warp;

/// Declarative kernel description, as read from and written to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Se(SeParams),
    Ess(EssParams),
    Relu(PriorSpec),
    Erf(PriorSpec),
    RbfBnn(RbfLayerParams),
    CosBnn(PriorSpec),
    ReluPeriodic {
        period: f64,
        #[serde(flatten)]
        priors: PriorSpec,
    },
    Constant {
        value: f64,
    },
    Sum {
        children: Vec<KernelSpec>,
    },
    Product {
        children: Vec<KernelSpec>,
    },
    Power {
        base: Box<KernelSpec>,
        exponent: u32,
    },
    Warp {
        base: Box<KernelSpec>,
        warp: Warp,
    },
    Project {
        base: Box<KernelSpec>,
        dims: Vec<usize>,
    },
    HiddenSum {
        a: Box<KernelSpec>,
        b: Box<KernelSpec>,
        mean_a: MeanFn,
        mean_b: MeanFn,
        sigma2_w2: f64,
    },
}

/// Which input dimensions a kernel accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputDim {
    Exact(usize),
    AtLeast(usize),
}

impl InputDim {
    pub fn accepts(self, d: usize) -> bool {
        match self {
            InputDim::Exact(n) => d == n,
            InputDim::AtLeast(n) => d >= n,
        }
    }

    fn unify(self, other: InputDim) -> Result<InputDim> {
        use InputDim::*;
        match (self, other) {
            (Exact(a), Exact(b)) if a == b => Ok(Exact(a)),
            (Exact(a), Exact(b)) => Err(Error::DimensionMismatch { expected: a, found: b }),
            (Exact(a), AtLeast(b)) | (AtLeast(b), Exact(a)) => {
                if a >= b {
                    Ok(Exact(a))
                } else {
                    Err(Error::DimensionMismatch { expected: b, found: a })
                }
            }
            (AtLeast(a), AtLeast(b)) => Ok(AtLeast(a.max(b))),
        }
    }

    fn min(self) -> usize {
        match self {
            InputDim::Exact(n) | InputDim::AtLeast(n) => n,
        }
    }
}

impl KernelSpec {
    fn input_dim(&self) -> Result<InputDim> {
        use KernelSpec::*;
        match self {
            Se(p) => p.validate().map(|_| InputDim::AtLeast(1)),
            Relu(p) | Erf(p) | CosBnn(p) => p.validate().map(|_| InputDim::AtLeast(1)),
            RbfBnn(p) => p.validate().map(|_| InputDim::AtLeast(1)),
            Ess(p) => p.validate().map(|_| InputDim::Exact(1)),
            ReluPeriodic { period, priors } => {
                priors.validate()?;
                if !(*period > 0.0) {
                    return Err(Error::param("period", format!("must be positive, got {period}")));
                }
                if !(priors.sigma2_b1 + priors.sigma2_w1 > 0.0) {
                    return Err(Error::param("sigma2_b1 + sigma2_w1", "must be positive"));
                }
                Ok(InputDim::Exact(1))
            }
            Constant { value } => {
                if *value >= 0.0 && value.is_finite() {
                    Ok(InputDim::AtLeast(1))
                } else {
                    Err(Error::param("value", format!("constant kernel must be >= 0, got {value}")))
                }
            }
            Sum { children } | Product { children } => {
                if children.is_empty() {
                    return Err(Error::param("children", "combinator needs at least one child"));
                }
                children
                    .iter()
                    .try_fold(InputDim::AtLeast(1), |acc, c| acc.unify(c.input_dim()?))
            }
            Power { base, exponent } => {
                if *exponent == 0 {
                    return Err(Error::param(
                        "exponent",
                        "must be >= 1; use an explicit constant kernel for the zeroth power",
                    ));
                }
                base.input_dim()
            }
            Warp { base, warp } => {
                warp.validate()?;
                let inner = base.input_dim()?;
                match warp {
                    crate::warp::Warp::Identity => Ok(inner),
                    crate::warp::Warp::Periodic { index, .. } => match inner {
                        InputDim::Exact(m) => {
                            if m < 2 || *index > m - 2 {
                                Err(Error::DimensionMismatch { expected: index + 2, found: m })
                            } else {
                                Ok(InputDim::Exact(m - 1))
                            }
                        }
                        InputDim::AtLeast(m) => {
                            Ok(InputDim::AtLeast((index + 1).max(m.saturating_sub(1))))
                        }
                    },
                    crate::warp::Warp::Constant { value } => {
                        if inner.accepts(value.len()) {
                            Ok(InputDim::AtLeast(1))
                        } else {
                            Err(Error::DimensionMismatch {
                                expected: inner.min(),
                                found: value.len(),
                            })
                        }
                    }
                }
            }
            Project { base, dims } => {
                if dims.is_empty() {
                    return Err(Error::param("dims", "projection needs at least one index"));
                }
                let inner = base.input_dim()?;
                if !inner.accepts(dims.len()) {
                    return Err(Error::DimensionMismatch {
                        expected: inner.min(),
                        found: dims.len(),
                    });
                }
                Ok(InputDim::AtLeast(dims.iter().max().unwrap() + 1))
            }
            HiddenSum {
                a,
                b,
                mean_a,
                mean_b,
                sigma2_w2,
            } => {
                if !(*sigma2_w2 > 0.0) {
                    return Err(Error::param("sigma2_w2", "must be > 0"));
                }
                mean_a.validate()?;
                mean_b.validate()?;
                a.input_dim()?.unify(b.input_dim()?)
            }
        }
    }

    fn eval(&self, x: &[f64], xp: &[f64]) -> f64 {
        use KernelSpec::*;
        match self {
            Se(p) => analytic::se_unchecked(x, xp, p),
            Ess(p) => k_ess(x[0], xp[0], p),
            Relu(p) => {
                let sxx = p.preact_cov(x, x);
                let spp = p.preact_cov(xp, xp);
                if sxx <= 0.0 || spp <= 0.0 {
                    // zero-variance pre-activation: the unit is identically zero
                    0.0
                } else {
                    analytic::relu_from_cov(sxx, spp, p.preact_cov(x, xp), p.sigma2_w2)
                }
            }
            Erf(p) => analytic::erf_unchecked(x, xp, p),
            RbfBnn(p) => analytic::rbf_unchecked(x, xp, p),
            CosBnn(p) => analytic::cos_unchecked(x, xp, p),
            ReluPeriodic { period, priors } => {
                analytic::relu_periodic_unchecked(x[0], xp[0], *period, priors)
            }
            Constant { value } => *value,
            Sum { children } => children.iter().map(|c| c.eval(x, xp)).sum(),
            Product { children } => children.iter().map(|c| c.eval(x, xp)).product(),
            Power { base, exponent } => base.eval(x, xp).powi(*exponent as i32),
            Warp { base, warp } => base.eval(&warp.apply(x), &warp.apply(xp)),
            Project { base, dims } => {
                let a: Vec<f64> = dims.iter().map(|&i| x[i]).collect();
                let b: Vec<f64> = dims.iter().map(|&i| xp[i]).collect();
                base.eval(&a, &b)
            }
            HiddenSum {
                a,
                b,
                mean_a,
                mean_b,
                sigma2_w2,
            } => {
                let cross = mean_a.eval(x) * mean_b.eval(xp) + mean_a.eval(xp) * mean_b.eval(x);
                a.eval(x, xp) + b.eval(x, xp) + sigma2_w2 * cross
            }
        }
    }
}

/// A validated covariance function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct Kernel {
    spec: KernelSpec,
    dim: InputDim,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        let dim = spec.input_dim()?;
        Ok(Kernel { spec, dim })
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        k.spec
    }
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        Self::try_from(spec)
    }

    pub fn se(params: SeParams) -> Result<Self> {
        Self::new(KernelSpec::Se(params))
    }

    pub fn ess(params: EssParams) -> Result<Self> {
        Self::new(KernelSpec::Ess(params))
    }

    pub fn relu(priors: PriorSpec) -> Result<Self> {
        Self::new(KernelSpec::Relu(priors))
    }

    pub fn erf(priors: PriorSpec) -> Result<Self> {
        Self::new(KernelSpec::Erf(priors))
    }

    pub fn rbf_bnn(params: RbfLayerParams) -> Result<Self> {
        Self::new(KernelSpec::RbfBnn(params))
    }

    pub fn cos_bnn(priors: PriorSpec) -> Result<Self> {
        Self::new(KernelSpec::CosBnn(priors))
    }

    pub fn relu_periodic(period: f64, priors: PriorSpec) -> Result<Self> {
        Self::new(KernelSpec::ReluPeriodic { period, priors })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(KernelSpec::Constant { value })
    }

    pub fn zero() -> Self {
        Self::constant(0.0).expect("zero is a valid constant")
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> InputDim {
        self.dim
    }

    pub fn eval(&self, x: &[f64], x_p: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        self.check_input(x_p)?;
        if x.len() != x_p.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: x_p.len(),
            });
        }
        Ok(self.spec.eval(x, x_p))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if self.dim.accepts(x.len()) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim.min(),
                found: x.len(),
            })
        }
    }

    fn check_points(&self, xs: &[Vec<f64>]) -> Result<()> {
        if let Some(first) = xs.first() {
            for x in xs {
                self.check_input(x)?;
                if x.len() != first.len() {
                    return Err(Error::DimensionMismatch {
                        expected: first.len(),
                        found: x.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Symmetric Gram matrix `K[i, j] = k(xs[i], xs[j])`.
    pub fn gram(&self, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.check_points(xs)?;
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.spec.eval(&xs[i], &xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Cross-covariance `K[i, j] = k(xs[i], ys[j])`.
    pub fn cross(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.check_points(xs)?;
        self.check_points(ys)?;
        if let (Some(a), Some(b)) = (xs.first(), ys.first()) {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    found: b.len(),
                });
            }
        }
        Ok(DMatrix::from_fn(xs.len(), ys.len(), |i, j| {
            self.spec.eval(&xs[i], &ys[j])
        }))
    }

    pub fn diag(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_points(xs)?;
        Ok(xs.iter().map(|x| self.spec.eval(x, x)).collect())
    }
}

/// `(x, x') ↦ K_A(x, x') + K_B(x, x')`
pub fn kernel_add(a: &Kernel, b: &Kernel) -> Result<Kernel> {
    Kernel::new(KernelSpec::Sum {
        children: vec![a.spec.clone(), b.spec.clone()],
    })
}

/// `(x, x') ↦ K_A(x, x') K_B(x, x')`
pub fn kernel_mul(a: &Kernel, b: &Kernel) -> Result<Kernel> {
    Kernel::new(KernelSpec::Product {
        children: vec![a.spec.clone(), b.spec.clone()],
    })
}

/// `(x, x') ↦ K_A(x, x')ⁿ`, `n ≥ 1`.
pub fn kernel_pow(a: &Kernel, n: u32) -> Result<Kernel> {
    Kernel::new(KernelSpec::Power {
        base: Box::new(a.spec.clone()),
        exponent: n,
    })
}

/// `(x, x') ↦ K_A(u(x), u(x'))`
pub fn kernel_warp(a: &Kernel, warp: Warp) -> Result<Kernel> {
    Kernel::new(KernelSpec::Warp {
        base: Box::new(a.spec.clone()),
        warp,
    })
}

/// `(x, x') ↦ K_A(x[dims], x'[dims])`
pub fn kernel_project(a: &Kernel, dims: &[usize]) -> Result<Kernel> {
    Kernel::new(KernelSpec::Project {
        base: Box::new(a.spec.clone()),
        dims: dims.to_vec(),
    })
}

/// Kernel of two sub-networks summed at a shared hidden layer:
/// `K_A + K_B + σ²_w2 (m_A(x) m_B(x') + m_A(x') m_B(x))`.
///
/// `K_A` and `K_B` must already include the shared output variance. When
/// either mean vanishes the cross terms drop out and this is `kernel_add`.
pub fn hidden_add_kernel(
    a: &Kernel,
    b: &Kernel,
    mean_a: MeanFn,
    mean_b: MeanFn,
    sigma2_w2: f64,
) -> Result<Kernel> {
    if mean_a.is_zero() || mean_b.is_zero() {
        if !(sigma2_w2 > 0.0) {
            return Err(Error::param("sigma2_w2", "must be > 0"));
        }
        return kernel_add(a, b);
    }
    Kernel::new(KernelSpec::HiddenSum {
        a: Box::new(a.spec.clone()),
        b: Box::new(b.spec.clone()),
        mean_a,
        mean_b,
        sigma2_w2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};

    fn se(s2: f64, l: f64) -> Kernel {
        Kernel::se(SeParams::new(s2, l).unwrap()).unwrap()
    }

    fn ess(s2: f64, l: f64, p: f64) -> Kernel {
        Kernel::ess(EssParams::new(s2, l, p).unwrap()).unwrap()
    }

    fn e(k: &Kernel, a: f64, b: f64) -> f64 {
        k.eval(&[a], &[b]).unwrap()
    }

    #[test]
    fn add_examples() {
        let k = se(1.3, 0.7);
        let sum = kernel_add(&k, &k).unwrap();
        assert!((e(&sum, 0.2, 0.2) - 2.6).abs() < 1e-15);

        let with_zero = kernel_add(&k, &Kernel::zero()).unwrap();
        for (a, b) in [(0.0, 1.0), (-2.0, 0.3), (4.0, 4.0)] {
            assert_eq!(e(&with_zero, a, b), e(&k, a, b));
        }

        let p = 2.0;
        let kp = ess(0.9, 1.0, p);
        let kse = se(0.4, 3.0);
        let mix = kernel_add(&kp, &kse).unwrap();
        assert!((e(&mix, 0.0, p) - (0.9 + e(&kse, 0.0, p))).abs() < 1e-12);
    }

    #[test]
    fn add_rejects_dimension_mismatch() {
        let two_d = kernel_project(&se(1.0, 1.0), &[0, 1]).unwrap();
        let ess1 = ess(1.0, 1.0, 1.0);
        // ESS is strictly 1-D
        let two_d_exact = kernel_warp(&ess1, Warp::Identity).unwrap();
        assert!(kernel_add(&two_d_exact, &two_d).is_err());
        assert!(ess1.eval(&[0.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn mul_examples() {
        let k = ess(1.1, 0.8, 3.0);
        let one = Kernel::constant(1.0).unwrap();
        let prod = kernel_mul(&k, &one).unwrap();
        let other = se(2.0, 0.5);
        let kk = kernel_mul(&k, &other).unwrap();
        for (a, b) in [(0.0, 1.0), (-2.0, 0.3), (4.0, 4.0)] {
            assert_eq!(e(&prod, a, b), e(&k, a, b));
        }
        assert!((e(&kk, 0.4, 0.4) - e(&k, 0.4, 0.4) * e(&other, 0.4, 0.4)).abs() < 1e-15);

        // ESS × SE is p-periodic only if the SE factor is (nearly) constant
        let p = 3.0;
        let per = kernel_mul(&k, &Kernel::constant(0.5).unwrap()).unwrap();
        let not_per = kernel_mul(&k, &se(1.0, 1.0)).unwrap();
        let mut max_dev = 0.0f64;
        for i in 0..20 {
            let x = -3.0 + 0.3 * i as f64;
            for j in 0..20 {
                let y = -3.0 + 0.3 * j as f64;
                assert!((e(&per, x, y + p) - e(&per, x, y)).abs() < 1e-12);
                max_dev = max_dev.max((e(&not_per, x, y + p) - e(&not_per, x, y)).abs());
            }
        }
        assert!(max_dev > 1e-3);
    }

    #[test]
    fn pow_examples() {
        let k = se(1.7, 0.9);
        assert!(kernel_pow(&k, 0).is_err());
        let p1 = kernel_pow(&k, 1).unwrap();
        let p2 = kernel_pow(&k, 2).unwrap();
        let m = kernel_mul(&k, &k).unwrap();
        for (a, b) in [(0.0, 1.0), (-2.0, 0.3), (4.0, 4.0)] {
            assert_eq!(e(&p1, a, b), e(&k, a, b));
            assert!((e(&p2, a, b) - e(&m, a, b)).abs() < 1e-15);
        }
        assert!((e(&p2, 1.0, 1.0) - 1.7 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn warp_examples() {
        let k = se(1.0, 0.6);
        let id = kernel_warp(&k, Warp::Identity).unwrap();
        assert_eq!(e(&id, 0.3, -0.4), e(&k, 0.3, -0.4));

        let c = kernel_warp(&k, Warp::Constant { value: vec![0.25] }).unwrap();
        let base = e(&c, 0.0, 0.0);
        assert_eq!(e(&c, 5.0, -1.0), base);
        assert_eq!(c.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), base);

        // ESS takes scalars, so the 2-D periodic embedding cannot feed it
        assert!(kernel_warp(&ess(1.0, 1.0, 1.0), Warp::periodic(1.0).unwrap()).is_err());
    }

    #[test]
    fn project_examples() {
        let k = se(1.0, 0.8);
        let all = kernel_project(&k, &[0, 1]).unwrap();
        let (a, b) = ([0.2, -0.7], [1.0, 0.4]);
        assert_eq!(all.eval(&a, &b).unwrap(), k.eval(&a, &b).unwrap());

        let first = kernel_project(&k, &[0]).unwrap();
        let v0 = first.eval(&[0.2, 0.0], &[1.0, 0.0]).unwrap();
        for t in [-3.0, 0.5, 9.0] {
            assert_eq!(first.eval(&[0.2, t], &[1.0, -t]).unwrap(), v0);
        }

        let kb = ess(0.5, 1.0, 2.0);
        let sep = kernel_add(&kernel_project(&k, &[0]).unwrap(), &kernel_project(&kb, &[1]).unwrap())
            .unwrap();
        let want = k.eval(&[a[0]], &[b[0]]).unwrap() + kb.eval(&[a[1]], &[b[1]]).unwrap();
        assert!((sep.eval(&a, &b).unwrap() - want).abs() < 1e-15);

        let three = kernel_project(&k, &[2]).unwrap();
        assert!(three.eval(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(kernel_project(&k, &[]).is_err());
    }

    #[test]
    fn hidden_add_examples() {
        let pr = PriorSpec::new(1.0, 0.5, 2.0).unwrap();
        let ka = Kernel::erf(pr).unwrap();
        let kb = Kernel::erf(PriorSpec::new(3.0, 0.1, 2.0).unwrap()).unwrap();
        let plain = kernel_add(&ka, &kb).unwrap();
        let odd = hidden_add_kernel(&ka, &kb, MeanFn::Zero, MeanFn::Zero, 2.0).unwrap();
        assert_eq!(e(&odd, 0.3, -1.0), e(&plain, 0.3, -1.0));

        let sig = hidden_add_kernel(
            &ka,
            &kb,
            MeanFn::Constant { value: 0.5 },
            MeanFn::Constant { value: 0.5 },
            2.0,
        )
        .unwrap();
        for (a, b) in [(0.0, 1.0), (-2.0, 0.3)] {
            assert!((e(&sig, a, b) - e(&plain, a, b) - 0.5 * 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let k = hidden_add_kernel(
            &kernel_warp(
                &Kernel::rbf_bnn(RbfLayerParams::new(0.5, 1.0).unwrap()).unwrap(),
                Warp::periodic(12.0).unwrap(),
            )
            .unwrap(),
            &Kernel::relu(PriorSpec::new(1.0, 1.0, 1.0).unwrap()).unwrap(),
            MeanFn::Constant { value: 0.1 },
            MeanFn::Relu {
                sigma2_w1: 1.0,
                sigma2_b1: 1.0,
            },
            1.0,
        )
        .unwrap();
        let s = serde_json::to_string(&k).unwrap();
        let back: Kernel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);

        let bad = r#"{"type":"power","base":{"type":"se","sigma2":1.0,"length_scale":1.0},"exponent":0}"#;
        assert!(serde_json::from_str::<Kernel>(bad).is_err());
        let bad = r#"{"type":"se","sigma2":-1.0,"length_scale":1.0}"#;
        assert!(serde_json::from_str::<Kernel>(bad).is_err());
        let ok = r#"{"type":"relu_periodic","period":2.0,"sigma2_w1":1.0,"sigma2_b1":0.0,"sigma2_w2":1.0}"#;
        assert!(serde_json::from_str::<Kernel>(ok).is_ok());
    }

    /// One of every node type, on 1-D inputs.
    fn zoo() -> Vec<(&'static str, Kernel)> {
        let pr = PriorSpec::new(1.2, 0.4, 1.5).unwrap();
        let rbf = Kernel::rbf_bnn(RbfLayerParams::new(0.7, 1.1).unwrap()).unwrap();
        let relu = Kernel::relu(pr).unwrap();
        vec![
            ("se", se(1.2, 0.8)),
            ("ess", ess(0.9, 0.7, 1.3)),
            ("relu", relu.clone()),
            ("erf", Kernel::erf(pr).unwrap()),
            ("rbf_bnn", rbf.clone()),
            ("cos_bnn", Kernel::cos_bnn(pr).unwrap()),
            ("relu_periodic", Kernel::relu_periodic(1.7, pr).unwrap()),
            ("sum", kernel_add(&relu, &ess(0.5, 1.0, 2.0)).unwrap()),
            ("product", kernel_mul(&relu, &se(1.0, 2.0)).unwrap()),
            ("power", kernel_pow(&relu, 3).unwrap()),
            ("warped_rbf", kernel_warp(&rbf, Warp::periodic(1.5).unwrap()).unwrap()),
            (
                "hidden_sum",
                hidden_add_kernel(
                    &relu,
                    &rbf,
                    MeanFn::Relu {
                        sigma2_w1: 1.2,
                        sigma2_b1: 0.4,
                    },
                    MeanFn::Rbf {
                        sigma2_g: 0.7,
                        sigma2_u: 1.1,
                    },
                    1.5,
                )
                .unwrap(),
            ),
        ]
    }

    #[test]
    fn every_kernel_is_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (name, k) in zoo() {
            for _ in 0..100 {
                let a: f64 = rng.random_range(-3.0..3.0);
                let b: f64 = rng.random_range(-3.0..3.0);
                let d = (e(&k, a, b) - e(&k, b, a)).abs();
                assert!(d <= 1e-12, "{name}: asymmetry {d}");
            }
        }
    }

    #[test]
    fn every_gram_is_psd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for (name, k) in zoo() {
            let xs: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random_range(-3.0..3.0)]).collect();
            let g = k.gram(&xs).unwrap();
            let trace = g.trace();
            let min = SymmetricEigen::new(g).eigenvalues.min();
            assert!(min >= -1e-8 * trace, "{name}: min eigenvalue {min}, trace {trace}");
        }
    }

    #[test]
    fn periodic_kernels_repeat_and_cosine_does_not() {
        let p = 1.7;
        let pr = PriorSpec::new(1.2, 0.4, 1.5).unwrap();
        let kess = ess(0.9, 0.7, p);
        let krp = Kernel::relu_periodic(p, pr).unwrap();
        let kcos = Kernel::cos_bnn(pr).unwrap();
        let mut cos_dev = 0.0f64;
        for i in 0..25 {
            let x = -2.0 + 0.17 * i as f64;
            for j in 0..25 {
                let y = -2.0 + 0.17 * j as f64;
                assert!((e(&kess, x, y + p) - e(&kess, x, y)).abs() <= 1e-12);
                assert!((e(&krp, x, y + p) - e(&krp, x, y)).abs() <= 1e-12);
                cos_dev = cos_dev.max((e(&kcos, x, y + p) - e(&kcos, x, y)).abs());
            }
        }
        assert!(cos_dev > 1e-3, "{cos_dev}");
    }

    proptest::proptest! {
        #[test]
        fn algebra_laws(a in -4.0f64..4.0, b in -4.0f64..4.0) {
            let k1 = se(1.3, 0.7);
            let k2 = ess(0.6, 1.1, 2.3);
            let k3 = Kernel::relu(PriorSpec::new(0.5, 0.5, 1.0).unwrap()).unwrap();
            let ab = kernel_add(&k1, &k2).unwrap();
            let ba = kernel_add(&k2, &k1).unwrap();
            proptest::prop_assert!((e(&ab, a, b) - e(&ba, a, b)).abs() < 1e-14);
            let l = kernel_add(&kernel_add(&k1, &k2).unwrap(), &k3).unwrap();
            let r = kernel_add(&k1, &kernel_add(&k2, &k3).unwrap()).unwrap();
            proptest::prop_assert!((e(&l, a, b) - e(&r, a, b)).abs() < 1e-12);
            let m1 = kernel_mul(&k1, &k3).unwrap();
            let m2 = kernel_mul(&k3, &k1).unwrap();
            proptest::prop_assert!((e(&m1, a, b) - e(&m2, a, b)).abs() < 1e-14);
            let sq = kernel_pow(&k3, 2).unwrap();
            let mm = kernel_mul(&k3, &k3).unwrap();
            proptest::prop_assert!((e(&sq, a, b) - e(&mm, a, b)).abs() < 1e-12);
        }
    }
}
