//! Monte-Carlo oracles for the analytic kernels and the architecture
//! identities.

use combnn::bnn::{
    empirical_kernel, empirical_kernel_with, mixture_ks_distance, sample_params, sample_prior_functions, Activation,
    ArchSpec, Estimator, HiddenSpec, Network,
};
use combnn::kernel::{
    hidden_add_kernel, k_cos_bnn, k_erf, k_rbf_bnn, k_relu, k_relu_periodic, kernel_add, kernel_mul,
    Kernel, MeanFn, PriorSpec, RbfLayerParams,
};
use combnn::stats;
use combnn::Warp;

const N: usize = 200_000;

fn pr(w1: f64, b1: f64, w2: f64) -> PriorSpec {
    PriorSpec::new(w1, b1, w2).unwrap()
}

fn assert_within(arch: &ArchSpec, x: &[f64], xp: &[f64], exact: f64, seed: u64) {
    let est = empirical_kernel(arch, x, xp, N, seed).unwrap();
    assert!(
        est.z_score(exact) <= 3.0,
        "x={x:?} x'={xp:?}: exact {exact}, estimate {} ± {}",
        est.estimate,
        est.std_error
    );
}

#[test]
fn relu_off_diagonal() {
    let p = pr(1.0, 1.0, 1.0);
    let arch = ArchSpec::basic(Activation::Relu, p, 1, 1);
    assert_within(&arch, &[1.0], &[2.0], k_relu(&[1.0], &[2.0], &p).unwrap(), 11);
}

#[test]
fn erf_opposite_points() {
    let p = pr(1.0, 1.0, 1.0);
    let arch = ArchSpec::basic(Activation::Erf, p, 1, 1);
    assert_within(&arch, &[0.5], &[-0.5], k_erf(&[0.5], &[-0.5], &p).unwrap(), 12);
}

#[test]
fn rbf_units() {
    let rp = RbfLayerParams::new(1.0, 1.0).unwrap();
    let arch = ArchSpec::network(HiddenSpec::basic(Activation::Rbf { sigma2_g: 1.0 }, 1.0, 0.0), 1, 1.0, 1);
    assert_within(&arch, &[1.0], &[0.0], k_rbf_bnn(&[1.0], &[0.0], &rp).unwrap(), 13);
    // two-dimensional centers
    let rp = RbfLayerParams::new(0.7, 1.3).unwrap();
    let arch = ArchSpec::network(HiddenSpec::basic(Activation::Rbf { sigma2_g: 0.7 }, 1.3, 0.0), 1, 1.0, 2);
    let (x, xp) = ([0.4, -0.2], [-0.3, 0.9]);
    assert_within(&arch, &x, &xp, k_rbf_bnn(&x, &xp, &rp).unwrap(), 14);
}

#[test]
fn cosine_units() {
    let p = pr(1.0, 1.0, 1.0);
    let arch = ArchSpec::basic(Activation::Cosine, p, 1, 1);
    assert_within(&arch, &[0.3], &[0.7], k_cos_bnn(&[0.3], &[0.7], &p).unwrap(), 15);
    let p = pr(1.0, 0.0, 2.0);
    let arch = ArchSpec::basic(Activation::Cosine, p, 1, 1);
    assert_within(&arch, &[1.0], &[-1.0], 0.567_667_641_618_306_3 * 2.0, 16);
}

#[test]
fn relu_on_periodic_warp() {
    let p = pr(1.5, 0.5, 0.8);
    let period = 3.0;
    let arch = ArchSpec::network(
        HiddenSpec::basic(Activation::Relu, p.sigma2_w1, p.sigma2_b1).with_warp(Warp::periodic(period).unwrap()),
        1,
        2.0 * p.sigma2_w2 / (p.sigma2_w1 + p.sigma2_b1),
        1,
    );
    for (i, (x, xp)) in [(0.2, 1.9), (-1.0, 4.5)].into_iter().enumerate() {
        let exact = k_relu_periodic(x, xp, period, &p).unwrap();
        assert_within(&arch, &[x], &[xp], exact, 17 + i as u64);
    }
}

#[test]
fn hidden_mul_is_product_kernel() {
    let p = pr(1.0, 1.0, 1.0);
    let relu = HiddenSpec::basic(Activation::Relu, 1.0, 1.0);
    let arch = ArchSpec::hidden_mul(vec![relu.clone(), relu], 1, 1.0, 1);
    for (i, (x, xp)) in [(1.0, 2.0), (-0.5, 0.8), (0.0, -1.2)].into_iter().enumerate() {
        let k = k_relu(&[x], &[xp], &p).unwrap();
        assert_within(&arch, &[x], &[xp], k * k, 30 + i as u64);
    }
}

#[test]
fn output_sum_is_sum_kernel() {
    let pa = pr(1.0, 1.0, 1.0);
    let pb = pr(2.0, 0.5, 0.7);
    let arch = ArchSpec::output_sum(vec![
        ArchSpec::basic(Activation::Relu, pa, 1, 1),
        ArchSpec::basic(Activation::Erf, pb, 1, 1),
    ]);
    let ka = Kernel::relu(pa).unwrap();
    let kb = Kernel::erf(pb).unwrap();
    let k = kernel_add(&ka, &kb).unwrap();
    for (i, (x, xp)) in [(1.0, 2.0), (-0.5, 0.8)].into_iter().enumerate() {
        assert_within(&arch, &[x], &[xp], k.eval(&[x], &[xp]).unwrap(), 40 + i as u64);
    }
}

#[test]
fn hidden_add_relu_artefact() {
    let p = pr(1.0, 1.0, 1.0);
    let relu = HiddenSpec::basic(Activation::Relu, 1.0, 1.0);
    let arch = ArchSpec::hidden_add(vec![relu.clone(), relu], 1, 1.0, 1);
    let kr = Kernel::relu(p).unwrap();
    let m = MeanFn::Relu {
        sigma2_w1: 1.0,
        sigma2_b1: 1.0,
    };
    let k = hidden_add_kernel(&kr, &kr, m.clone(), m, 1.0).unwrap();
    let plain = kernel_add(&kr, &kr).unwrap();
    let (x, xp) = ([1.0], [2.0]);
    let exact = k.eval(&x, &xp).unwrap();
    assert!(exact - plain.eval(&x, &xp).unwrap() > 0.1);
    assert_within(&arch, &x, &xp, exact, 50);
}

#[test]
fn hidden_add_odd_activations_have_no_artefact() {
    let p = pr(1.0, 1.0, 1.0);
    let erf = HiddenSpec::basic(Activation::Erf, 1.0, 1.0);
    let arch = ArchSpec::hidden_add(vec![erf.clone(), erf], 1, 1.0, 1);
    let ke = Kernel::erf(p).unwrap();
    let k = kernel_add(&ke, &ke).unwrap();
    assert_within(&arch, &[0.3], &[-1.1], k.eval(&[0.3], &[-1.1]).unwrap(), 51);
}

#[test]
fn equivalent_kernels_of_combined_trees() {
    let relu = HiddenSpec::basic(Activation::Relu, 1.0, 0.5);
    let per = HiddenSpec::periodic_rbf(0.8, 1.0, 2.0);
    let arches = [
        ArchSpec::hidden_mul(vec![relu.clone(), per.clone()], 1, 0.6, 1),
        ArchSpec::hidden_add(vec![relu.clone(), per.clone()], 1, 0.6, 1),
        ArchSpec::output_sum(vec![
            ArchSpec::network(relu.clone(), 1, 1.3, 1),
            ArchSpec::network(per.clone(), 1, 0.4, 1).with_final_bias(0.2),
        ]),
        ArchSpec::hidden_mul(
            vec![relu.with_dims(vec![1]), HiddenSpec::basic(Activation::Cosine, 1.0, 0.2).with_dims(vec![0])],
            1,
            1.0,
            2,
        ),
    ];
    let pairs = [(vec![0.3, -0.4], vec![1.4, 0.9]), (vec![-1.0, 0.2], vec![-0.1, 0.2])];
    for (a, arch) in arches.iter().enumerate() {
        let k = arch.equivalent_kernel().unwrap();
        for (i, (x, xp)) in pairs.iter().enumerate() {
            let x = &x[..arch.input_dim()];
            let xp = &xp[..arch.input_dim()];
            assert_within(arch, x, xp, k.eval(x, xp).unwrap(), 60 + 10 * a as u64 + i as u64);
        }
    }
}

#[test]
fn hidden_mul_with_one_child_is_basic() {
    let relu = HiddenSpec::basic(Activation::Relu, 1.0, 1.0);
    let a = ArchSpec::hidden_mul(vec![relu.clone()], 16, 1.0, 1);
    let b = ArchSpec::network(relu, 16, 1.0, 1);
    let (na, nb) = (Network::new(&a).unwrap(), Network::new(&b).unwrap());
    let p = sample_params(&na, 3);
    for x in [-1.0, 0.0, 2.5] {
        assert_eq!(na.forward(&p, &[x]).unwrap(), nb.forward(&p, &[x]).unwrap());
    }
}

#[test]
fn output_sum_forward_is_sum_of_children() {
    let a = ArchSpec::basic(Activation::Tanh, pr(1.0, 1.0, 1.0), 8, 1);
    let b = ArchSpec::basic(Activation::Relu, pr(0.5, 1.0, 2.0), 4, 1);
    let s = ArchSpec::output_sum(vec![a.clone(), b.clone()]);
    let (na, nb, ns) = (Network::new(&a).unwrap(), Network::new(&b).unwrap(), Network::new(&s).unwrap());
    let p = sample_params(&ns, 8);
    let split = na.n_params();
    let pa = combnn::bnn::ParamSet { values: p.values[..split].to_vec() };
    let pb = combnn::bnn::ParamSet { values: p.values[split..].to_vec() };
    for x in [-1.0, 0.4] {
        let lhs = ns.forward(&p, &[x]).unwrap();
        let rhs = na.forward(&pa, &[x]).unwrap() + nb.forward(&pb, &[x]).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }
}

#[test]
fn output_weights_follow_width_scaling() {
    let width = 100_000;
    let arch = ArchSpec::basic(Activation::Relu, pr(1.0, 1.0, 3.0), width, 1);
    let net = Network::new(&arch).unwrap();
    let p = sample_params(&net, 21);
    let range = net.output_weight_ranges()[0].clone();
    let w2 = &p.values[range];
    assert_eq!(w2.len(), width);
    let target = 3.0 / width as f64;
    let se = (target / width as f64).sqrt();
    assert!(stats::mean(w2).abs() < 4.0 * se);
    assert!((stats::variance(w2) / target - 1.0).abs() < 0.05);
}

#[test]
fn prior_functions_have_zero_mean_and_kernel_variance() {
    let p = pr(1.0, 1.0, 1.0);
    let arch = ArchSpec::basic(Activation::Relu, p, 4096, 1);
    let net = Network::new(&arch).unwrap();
    let grid: Vec<Vec<f64>> = [-1.5, 0.0, 2.0].iter().map(|&x| vec![x]).collect();
    let n = 10_000;
    let draws = sample_prior_functions(&net, &grid, n, 500).unwrap();
    assert_eq!(draws, sample_prior_functions(&net, &grid, n, 500).unwrap());
    for (j, x) in grid.iter().enumerate() {
        let col: Vec<f64> = draws.iter().map(|r| r[j]).collect();
        let kxx = k_relu(x, x, &p).unwrap();
        assert!(stats::mean(&col).abs() < 4.0 * (kxx / n as f64).sqrt());
        // the draws are close to Gaussian, so var(s²) ≈ 2K²/n
        let se = kxx * (2.0 / n as f64).sqrt();
        assert!((stats::variance(&col) - kxx).abs() < 3.0 * se, "x={x:?}");
    }
}

#[test]
fn warped_draws_are_periodic() {
    let period = 12.0;
    let arches = [
        ArchSpec::network(HiddenSpec::periodic_rbf(1.0, 1.0, period), 50, 1.0, 1),
        ArchSpec::network(
            HiddenSpec::basic(Activation::Tanh, 1.0, 1.0).with_warp(Warp::periodic(period).unwrap()),
            50,
            1.0,
            1,
        ),
    ];
    for arch in &arches {
        let net = Network::new(arch).unwrap();
        for seed in 0..20 {
            let p = sample_params(&net, seed);
            for i in 0..25 {
                let x = -30.0 + 2.5 * i as f64;
                let a = net.forward(&p, &[x]).unwrap();
                let b = net.forward(&p, &[x + period]).unwrap();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn deep_trees_use_the_raw_or_conditional_estimator() {
    use combnn::bnn::DenseLayer;
    let layer = |a| DenseLayer {
        activation: a,
        sigma2_w: 1.0,
        sigma2_b: 0.5,
    };
    let arch = ArchSpec::network(
        HiddenSpec::deep(vec![layer(Activation::Relu), layer(Activation::Tanh)]),
        16,
        1.0,
        1,
    );
    assert!(arch.equivalent_kernel().is_err());
    assert!(empirical_kernel_with(&arch, &[0.2], &[0.5], 4000, 1, Estimator::SingleUnit).is_err());
    let a = empirical_kernel_with(&arch, &[0.2], &[0.5], 20_000, 1, Estimator::Conditional).unwrap();
    let b = empirical_kernel_with(&arch, &[0.2], &[0.5], 80_000, 2, Estimator::Raw).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.estimate - b.estimate).abs() < 4.0 * se, "{a:?} {b:?}");
}

#[test]
fn periodic_rbf_matches_ess_form() {
    let rp = RbfLayerParams::new(0.9, 1.7).unwrap();
    let period = 2.5;
    let warped = combnn::kernel::kernel_warp(&Kernel::rbf_bnn(rp).unwrap(), Warp::periodic(period).unwrap()).unwrap();
    let ess = Kernel::ess(rp.periodic_ess(period).unwrap()).unwrap();
    for i in 0..20 {
        for j in 0..20 {
            let (x, xp) = (-3.0 + 0.37 * i as f64, -2.0 + 0.41 * j as f64);
            let a = warped.eval(&[x], &[xp]).unwrap();
            let b = ess.eval(&[x], &[xp]).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }
    assert!(kernel_mul(&warped, &ess).is_ok());
}

fn standardize(xs: &[f64]) -> Vec<f64> {
    let (m, s) = (stats::mean(xs), stats::variance(xs).sqrt());
    xs.iter().map(|x| (x - m) / s).collect()
}

#[test]
fn output_product_draws_are_heavy_tailed() {
    let relu = ArchSpec::basic(Activation::Relu, pr(1.0, 1.0, 1.0), 512, 1);
    let prod = ArchSpec::output_product(vec![relu.clone(), relu.clone()]);
    let net = Network::new(&prod).unwrap();
    let draws = combnn::bnn::prior_draws_at(&net, &[0.7], 10_000, 90).unwrap();
    // two independent Gaussians multiplied have excess kurtosis 6
    let k = stats::excess_kurtosis(&standardize(&draws));
    assert!(k > 0.5, "{k}");
    assert!(mixture_ks_distance(&net, &[0.7], 100, 1).is_err());
}

#[test]
fn clt_distance_shrinks_with_width() {
    let x = [0.7];
    let mut last = f64::INFINITY;
    for (i, width) in [8, 64, 512, 4096].into_iter().enumerate() {
        let net = Network::new(&ArchSpec::basic(Activation::Relu, pr(1.0, 1.0, 1.0), width, 1)).unwrap();
        let d = mixture_ks_distance(&net, &x, 20_000, 300 + i as u64).unwrap();
        assert!(d <= last, "width {width}: {d} > {last}");
        last = d;
    }
    assert!(last < 0.02);
    let net = Network::new(&ArchSpec::basic(Activation::Relu, pr(1.0, 1.0, 1.0), 4096, 1)).unwrap();
    let draws = combnn::bnn::prior_draws_at(&net, &x, 20_000, 7).unwrap();
    let d = stats::ks_distance_normal(&standardize(&draws));
    assert!(d < 0.02, "{d}");
}
