//! Subcommand implementations. Every command computes all of its results
//! before it creates the output directory, so a failing run leaves nothing
//! behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use combnn::bnn::{empirical_kernel_with, sample_params, sample_prior_functions, Network, ParamSet, MIN_KERNEL_SAMPLES};
use combnn::gp::GpModel;
use combnn::inference::{
    anchored_ensemble_train, hmc_sample, map_estimate, predictive_moments, PosteriorTarget,
};
use combnn::kernel::Kernel;
use combnn::manifest::{config_hash, VERSION};
use combnn::pendulum::{evaluate, train_run, write_curve_csv, write_qslice_csv, Agent, AgentSnapshot, EpisodeLog};
use combnn::rng;
use combnn::timeseries::{load_series, run_experiment, ExperimentConfig, Prediction};
use serde::Serialize;

use crate::config::{
    self, check_name, default_pairs, BnnFitConfig, BnnInference, GpFitConfig, KernelCheckConfig, PriorSampleConfig,
    RlEvalConfig, RlTrainConfig,
};

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize, E: Serialize> {
    command: &'a str,
    version: &'a str,
    config_version: u32,
    config_hash: String,
    seed: u64,
    outputs: Vec<String>,
    config: &'a C,
    results: E,
}

fn write_manifest<C: Serialize, E: Serialize>(
    out: &Path,
    command: &str,
    config: &C,
    seed: u64,
    outputs: &[&str],
    results: E,
) -> Result<()> {
    let m = RunManifest {
        command,
        version: VERSION,
        config_version: config::CONFIG_VERSION,
        config_hash: config_hash(config)?,
        seed,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        config,
        results,
    };
    std::fs::write(out.join(MANIFEST), serde_json::to_vec_pretty(&m)?)?;
    Ok(())
}

fn create_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

pub fn required<'a>(p: &'a Option<PathBuf>, flag: &str, cmd: &str) -> Result<&'a Path> {
    p.as_deref().with_context(|| format!("{cmd} needs {flag}"))
}

/// Reads a two-column `x,y` CSV.
pub fn read_xy(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening data file {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    ensure!(
        headers.iter().map(str::trim).eq(["x", "y"]),
        "{}: expected header \"x,y\", found {:?}",
        path.display(),
        headers.iter().collect::<Vec<_>>()
    );
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.with_context(|| format!("{} line {line}", path.display()))?;
        let parse = |j: usize| -> Result<f64> {
            let v: f64 = rec
                .get(j)
                .with_context(|| format!("{} line {line}: missing column", path.display()))?
                .trim()
                .parse()
                .with_context(|| format!("{} line {line}: not a number", path.display()))?;
            ensure!(v.is_finite(), "{} line {line}: non-finite value", path.display());
            Ok(v)
        };
        x.push(vec![parse(0)?]);
        y.push(parse(1)?);
    }
    ensure!(!y.is_empty(), "{}: no data rows", path.display());
    Ok((x, y))
}

pub fn prior_sample(cfg_path: &Path, out: &Path, seed: u64, samples: Option<usize>) -> Result<()> {
    let mut cfg: PriorSampleConfig = config::load(cfg_path)?;
    if let Some(n) = samples {
        cfg.draws = n;
    }
    ensure!(cfg.draws >= 1, "need at least one draw");
    ensure!(!cfg.models.is_empty(), "config lists no models");
    let grid = cfg.grid.values()?;
    let xs: Vec<Vec<f64>> = grid.iter().map(|&x| vec![x]).collect();
    let mut tables = Vec::new();
    for (i, m) in cfg.models.iter().enumerate() {
        check_name(&m.name)?;
        ensure!(
            cfg.models[..i].iter().all(|o| o.name != m.name),
            "duplicate model name {:?}",
            m.name
        );
        let net = Network::new(&m.arch).with_context(|| format!("model {:?}", m.name))?;
        ensure!(net.input_dim() == 1, "model {:?}: prior sampling needs a 1-D input", m.name);
        let draws = sample_prior_functions(&net, &xs, cfg.draws, rng::derive(seed, i as u64))?;
        tables.push((format!("prior_{}.csv", m.name), draws));
    }
    create_out(out)?;
    for (file, draws) in &tables {
        let mut w = csv::Writer::from_path(out.join(file))?;
        w.write_record(["draw_id", "x", "f"])?;
        for (d, row) in draws.iter().enumerate() {
            for (x, f) in grid.iter().zip(row) {
                w.write_record([d.to_string(), x.to_string(), f.to_string()])?;
            }
        }
        w.flush()?;
    }
    let files: Vec<&str> = tables.iter().map(|(f, _)| f.as_str()).collect();
    write_manifest(out, "prior-sample", &cfg, seed, &files, ())
}

#[derive(Serialize)]
pub struct PairReport {
    pub x: Vec<f64>,
    pub x_p: Vec<f64>,
    pub analytic: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct KernelReport {
    pub n_samples: usize,
    pub tolerance_se: f64,
    pub passed: usize,
    pub total: usize,
    pub all_pass: bool,
    pub pairs: Vec<PairReport>,
}

/// Returns whether every pair agreed within three standard errors.
pub fn kernel_check(cfg_path: &Path, out: &Path, seed: u64, samples: Option<usize>) -> Result<bool> {
    let mut cfg: KernelCheckConfig = config::load(cfg_path)?;
    if let Some(n) = samples {
        cfg.n_samples = n;
    }
    ensure!(
        cfg.n_samples >= MIN_KERNEL_SAMPLES,
        "n_samples = {} is below the minimum of {MIN_KERNEL_SAMPLES}",
        cfg.n_samples
    );
    let kernel = Kernel::new(cfg.kernel.clone()).context("kernel")?;
    let dim = cfg.arch.input_dim();
    ensure!(
        kernel.input_dim().accepts(dim),
        "dimension mismatch: the architecture takes {dim}-D inputs but the kernel accepts {:?}",
        kernel.input_dim()
    );
    Network::new(&cfg.arch).context("architecture")?;
    let pairs = cfg.pairs.clone().unwrap_or_else(|| default_pairs(dim));
    ensure!(!pairs.is_empty(), "no input pairs");
    let mut reports = Vec::with_capacity(pairs.len());
    for (i, (x, xp)) in pairs.iter().enumerate() {
        ensure!(
            x.len() == dim && xp.len() == dim,
            "pair {i}: expected {dim}-D inputs, got {} and {}",
            x.len(),
            xp.len()
        );
        let analytic = kernel.eval(x, xp)?;
        let mc = empirical_kernel_with(&cfg.arch, x, xp, cfg.n_samples, rng::derive(seed, i as u64), cfg.estimator)?;
        let z = mc.z_score(analytic);
        reports.push(PairReport {
            x: x.clone(),
            x_p: xp.clone(),
            analytic,
            estimate: mc.estimate,
            std_error: mc.std_error,
            z,
            pass: z <= 3.0,
        });
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    let report = KernelReport {
        n_samples: cfg.n_samples,
        tolerance_se: 3.0,
        passed,
        total: reports.len(),
        all_pass: passed == reports.len(),
        pairs: reports,
    };
    create_out(out)?;
    std::fs::write(out.join("kernel_check.json"), serde_json::to_vec_pretty(&report)?)?;
    write_manifest(
        out,
        "kernel-check",
        &cfg,
        seed,
        &["kernel_check.json"],
        serde_json::json!({ "passed": report.passed, "total": report.total }),
    )?;
    println!("{}/{} pairs within 3 standard errors", report.passed, report.total);
    Ok(report.all_pass)
}

pub fn gp_fit(cfg_path: &Path, data: &Path, out: &Path, seed: u64) -> Result<()> {
    let cfg: GpFitConfig = config::load(cfg_path)?;
    let (x, y) = read_xy(data)?;
    let grid = cfg.grid.values()?;
    let xs: Vec<Vec<f64>> = grid.iter().map(|&g| vec![g]).collect();
    let kernel = Kernel::new(cfg.kernel.clone()).context("kernel")?;
    let post = GpModel::new(kernel, cfg.noise_var)?.fit(&x, &y)?;
    let (mean, var) = post.predict_marginal(&xs)?;
    let noise = if cfg.observation_noise { cfg.noise_var } else { 0.0 };
    let pred = Prediction {
        x: grid,
        std: var.iter().map(|v| (v.max(0.0) + noise).sqrt()).collect(),
        mean,
    };
    create_out(out)?;
    pred.write_csv(&out.join("prediction.csv"))?;
    write_manifest(
        out,
        "gp-fit",
        &cfg,
        seed,
        &["prediction.csv"],
        serde_json::json!({
            "n_train": y.len(),
            "log_marginal": post.log_marginal(),
            "jitter": post.jitter(),
        }),
    )
}

pub fn bnn_fit(cfg_path: &Path, data: &Path, out: &Path, seed: u64, samples: Option<usize>) -> Result<()> {
    let mut cfg: BnnFitConfig = config::load(cfg_path)?;
    if let Some(n) = samples {
        cfg.hmc.n_samples = n;
    }
    let (x, y) = read_xy(data)?;
    ensure!(cfg.arch.input_dim() == 1, "bnn-fit needs a 1-D input architecture");
    let grid = cfg.grid.values()?;
    let xs: Vec<Vec<f64>> = grid.iter().map(|&g| vec![g]).collect();
    let noise = if cfg.observation_noise { cfg.noise_var } else { 0.0 };
    let started = Instant::now();
    let (mean, std, snapshot, results) = match cfg.inference {
        BnnInference::Hmc => {
            let target = PosteriorTarget::new(&cfg.arch, &x, &y, cfg.noise_var)?;
            let init = target.free_params(&sample_params(target.network(), rng::derive(seed, 0)));
            let init = map_estimate(&target, init, cfg.map_steps, 0.01)?;
            let mut hmc = cfg.hmc.clone();
            hmc.seed = rng::derive(seed, 1);
            if hmc.mass.is_none() {
                hmc.mass = Some(target.prior_variances().iter().map(|v| 1.0 / v).collect());
            }
            let chain = hmc_sample(&target, &init, &hmc)?;
            let params: Vec<ParamSet> = chain.samples.iter().map(|s| target.full_params(s)).collect();
            let (m, s) = predictive_moments(target.network(), &params, &xs, noise)?;
            let results = serde_json::json!({
                "acceptance": chain.acceptance,
                "step_sizes": chain.step_sizes,
            });
            let snap = cfg.save_samples.then(|| serde_json::to_vec(&chain)).transpose()?;
            (m, s, snap, results)
        }
        BnnInference::Ensemble => {
            let ens = combnn::inference::EnsembleConfig {
                noise_var: cfg.noise_var,
                ..cfg.ensemble.clone()
            };
            let model = anchored_ensemble_train(&cfg.arch, &x, &y, &ens, rng::derive(seed, 2))?;
            let (m, s) = model.predict(&xs, cfg.observation_noise)?;
            let snap = cfg.save_samples.then(|| serde_json::to_vec(&model)).transpose()?;
            (m, s, snap, serde_json::json!({}))
        }
    };
    if mean.iter().chain(&std).any(|v| !v.is_finite()) {
        bail!("non-finite predictions");
    }
    let pred = Prediction { x: grid, mean, std };
    create_out(out)?;
    pred.write_csv(&out.join("prediction.csv"))?;
    let mut files = vec!["prediction.csv"];
    if let Some(bytes) = snapshot {
        std::fs::write(out.join("samples.json"), bytes)?;
        files.push("samples.json");
    }
    write_manifest(
        out,
        "bnn-fit",
        &cfg,
        seed,
        &files,
        serde_json::json!({
            "n_train": y.len(),
            "runtime_s": started.elapsed().as_secs_f64(),
            "inference": results,
        }),
    )
}

pub fn timeseries(cfg_path: &Path, data: &Path, out: &Path, seed: Option<u64>, samples: Option<usize>) -> Result<()> {
    let mut cfg: ExperimentConfig = config::load(cfg_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = samples {
        cfg.hmc.n_samples = n;
    }
    let series = load_series(data).with_context(|| format!("loading series {}", data.display()))?;
    let manifest = run_experiment(&series, &cfg, out)?;
    for m in &manifest.models {
        println!("{}: {} ({:.1}s)", m.name, m.file, m.runtime_s);
    }
    Ok(())
}

pub fn rl_train(cfg_path: Option<&Path>, out: &Path, seed: u64, episodes: Option<usize>) -> Result<()> {
    let mut cfg = match cfg_path {
        Some(p) => config::load::<RlTrainConfig>(p)?,
        None => RlTrainConfig::default(),
    };
    if let Some(e) = episodes {
        cfg.episodes = e;
    }
    ensure!(cfg.episodes >= 1, "need at least one episode");
    let thetas = cfg.slice.values()?;
    let result = train_run(&cfg.agent, cfg.episodes, seed)?;
    ensure!(
        result.curve.iter().all(|e| e.cumulative_reward.is_finite()),
        "non-finite episode reward"
    );
    create_out(out)?;
    write_curve_csv(&out.join("curve.csv"), &result.curve)?;
    result.agent.snapshot().save(&out.join("agent.json"))?;
    write_qslice_csv(&out.join("qslice.csv"), &result.agent, &thetas, 0.0)?;
    let last = result.curve.last().map(|e| e.cumulative_reward);
    write_manifest(
        out,
        "rl-train",
        &cfg,
        seed,
        &["curve.csv", "agent.json", "qslice.csv"],
        serde_json::json!({ "architecture": cfg.agent.arch.name(), "final_episode_reward": last }),
    )?;
    println!(
        "{} episodes, final cumulative reward {:.1}",
        cfg.episodes,
        last.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn rl_eval(cfg_path: Option<&Path>, snapshot: &Path, out: &Path, seed: u64, episodes: Option<usize>) -> Result<()> {
    let mut cfg = match cfg_path {
        Some(p) => config::load::<RlEvalConfig>(p)?,
        None => RlEvalConfig::default(),
    };
    if let Some(e) = episodes {
        cfg.episodes = e;
    }
    ensure!(cfg.episodes >= 1, "need at least one episode");
    let thetas = cfg.slice.values()?;
    let snap = AgentSnapshot::load(snapshot).with_context(|| format!("reading agent snapshot {}", snapshot.display()))?;
    let agent = Agent::from_snapshot(&snap, seed)?;
    let rewards = evaluate(&agent, cfg.episodes, seed)?;
    let log: Vec<EpisodeLog> = rewards
        .iter()
        .enumerate()
        .map(|(episode, &cumulative_reward)| EpisodeLog {
            episode,
            cumulative_reward,
            steps: agent.config().env.episode_len,
        })
        .collect();
    create_out(out)?;
    write_curve_csv(&out.join("eval.csv"), &log)?;
    write_qslice_csv(&out.join("qslice.csv"), &agent, &thetas, 0.0)?;
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    write_manifest(
        out,
        "rl-eval",
        &cfg,
        seed,
        &["eval.csv", "qslice.csv"],
        serde_json::json!({
            "architecture": snap.config.arch.name(),
            "snapshot_hash": config_hash(&snap)?,
            "mean_reward": mean,
        }),
    )?;
    println!("mean cumulative reward over {} episodes: {mean:.1}", cfg.episodes);
    Ok(())
}
