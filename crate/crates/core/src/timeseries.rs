//! Gap interpolation and extrapolation on monthly series.
//!
//! Months `[36, 60)` are removed from a ten-year series, every model is fit
//! on the remainder (inputs and targets standardized), and predictive means
//! and standard deviations are reported over the training months, the gap
//! and the following ten years.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bnn::{sample_params, ArchSpec, HiddenSpec, Activation};
use crate::error::{check_dim, Error, Result};
use crate::gp::GpModel;
use crate::inference::{
    anchored_ensemble_train, bnn_predictive_hmc, hmc_sample, map_estimate, EnsembleConfig, HmcConfig, PosteriorTarget,
};
use crate::kernel::{kernel_add, kernel_mul, kernel_warp, Kernel, PriorSpec, RbfLayerParams};
use crate::manifest::{config_hash, VERSION};
use crate::rng;
use crate::stats;
use crate::warp::Warp;

pub const GAP_START: f64 = 36.0;
pub const GAP_END: f64 = 60.0;
pub const TRAIN_END: f64 = 120.0;
pub const EXTRAPOLATION_END: f64 = 240.0;
pub const MIN_ROWS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    /// Months since the start of the record.
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_dim(t.len(), y.len())?;
        if let Some(i) = t.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite value at position {i}")));
        }
        if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(format!(
                "t must be strictly increasing: t[{}] = {} follows {}",
                i + 1,
                t[i + 1],
                t[i]
            )));
        }
        Ok(Self { name: name.into(), t, y })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Reads a CSV with header `t,y`.
pub fn load_series(path: &Path) -> Result<TimeSeries> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t", "y"] {
        return Err(Error::InvalidData(format!(
            "{}: expected header \"t,y\", found {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize, name: &str| -> Result<f64> {
            let s = rec.get(k).map(str::trim).unwrap_or("");
            if s.is_empty() {
                return Err(Error::InvalidData(format!("{}:{line}: missing {name}", path.display())));
            }
            s.parse()
                .map_err(|_| Error::InvalidData(format!("{}:{line}: cannot parse {name} = {s:?}", path.display())))
        };
        t.push(field(0, "t")?);
        y.push(field(1, "y")?);
    }
    if t.len() < MIN_ROWS {
        return Err(Error::InvalidData(format!(
            "{}: {} rows, need at least {MIN_ROWS}",
            path.display(),
            t.len()
        )));
    }
    let name = path.file_stem().map_or("series".into(), |s| s.to_string_lossy().into_owned());
    TimeSeries::new(name, t, y)
}

pub fn save_series(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "y"])?;
    for (t, y) in series.t.iter().zip(&series.y) {
        w.write_record([t.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// `t/12 + sin(2πt/12)`
    Additive,
    /// `(1 + t/24)(1 + sin(2πt/12)/2)`
    Multiplicative,
}

/// Trend plus annual seasonality over `months` months, with Gaussian noise.
pub fn synthetic_series(kind: SyntheticKind, months: usize, noise_std: f64, seed: u64) -> TimeSeries {
    let mut rng = rng::from_seed(seed);
    let t: Vec<f64> = (0..months).map(|m| m as f64).collect();
    let y = t
        .iter()
        .map(|&t| {
            let season = (2.0 * PI * t / 12.0).sin();
            let clean = match kind {
                SyntheticKind::Additive => t / 12.0 + season,
                SyntheticKind::Multiplicative => (1.0 + t / 24.0) * (1.0 + 0.5 * season),
            };
            let z: f64 = rng.sample(StandardNormal);
            clean + noise_std * z
        })
        .collect();
    let name = match kind {
        SyntheticKind::Additive => "synthetic_additive",
        SyntheticKind::Multiplicative => "synthetic_multiplicative",
    };
    TimeSeries::new(name, t, y).expect("generated series is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSplit {
    pub train_t: Vec<f64>,
    pub train_y: Vec<f64>,
    pub gap_grid: Vec<f64>,
    pub extrapolation_grid: Vec<f64>,
}

pub fn make_gap_split(series: &TimeSeries) -> Result<GapSplit> {
    if series.t.first().is_none_or(|&t| t > 0.0) || series.t.last().is_none_or(|&t| t < TRAIN_END - 1.0) {
        return Err(Error::InvalidData(format!(
            "series must cover months 0 to {}; got {:?} to {:?}",
            TRAIN_END - 1.0,
            series.t.first(),
            series.t.last()
        )));
    }
    let (train_t, train_y) = series
        .t
        .iter()
        .zip(&series.y)
        .filter(|(&t, _)| (0.0..TRAIN_END).contains(&t) && !(GAP_START..GAP_END).contains(&t))
        .map(|(&t, &y)| (t, y))
        .unzip();
    Ok(GapSplit {
        train_t,
        train_y,
        gap_grid: (GAP_START as usize..GAP_END as usize).map(|m| m as f64).collect(),
        extrapolation_grid: (TRAIN_END as usize + 1..=EXTRAPOLATION_END as usize).map(|m| m as f64).collect(),
    })
}

impl GapSplit {
    /// Training months, gap and extrapolation months, in increasing order.
    pub fn query_grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self
            .train_t
            .iter()
            .chain(&self.gap_grid)
            .chain(&self.extrapolation_grid)
            .copied()
            .collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }
}

/// Affine maps to zero-mean, unit-variance inputs and targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub t_mean: f64,
    pub t_std: f64,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Standardizer {
    pub fn fit(t: &[f64], y: &[f64]) -> Result<Self> {
        if t.len() < 2 {
            return Err(Error::InvalidData("need at least two training points".into()));
        }
        let s = Standardizer {
            t_mean: stats::mean(t),
            t_std: stats::variance(t).sqrt(),
            y_mean: stats::mean(y),
            y_std: stats::variance(y).sqrt(),
        };
        if !(s.t_std > 0.0 && s.y_std > 0.0) {
            return Err(Error::InvalidData("training inputs or targets are constant".into()));
        }
        Ok(s)
    }

    pub fn t(&self, t: f64) -> f64 {
        (t - self.t_mean) / self.t_std
    }

    pub fn y(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }

    pub fn y_back(&self, y: f64) -> f64 {
        y * self.y_std + self.y_mean
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ReluBnn,
    PeriodicBnn,
    CombinedBnnAdd,
    CombinedBnnMul,
    CombinedGpAdd,
    CombinedGpMul,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ReluBnn => "relu_bnn",
            ModelKind::PeriodicBnn => "periodic_bnn",
            ModelKind::CombinedBnnAdd => "combined_bnn_add",
            ModelKind::CombinedBnnMul => "combined_bnn_mul",
            ModelKind::CombinedGpAdd => "combined_gp_add",
            ModelKind::CombinedGpMul => "combined_gp_mul",
        }
    }

    pub fn is_gp(self) -> bool {
        matches!(self, ModelKind::CombinedGpAdd | ModelKind::CombinedGpMul)
    }

    pub fn uses_relu(self) -> bool {
        self != ModelKind::PeriodicBnn
    }

    pub fn uses_periodic(self) -> bool {
        self != ModelKind::ReluBnn
    }

    fn is_mul(self) -> bool {
        matches!(self, ModelKind::CombinedBnnMul | ModelKind::CombinedGpMul)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceKind {
    Hmc,
    Ensemble,
    /// Exact GP regression with the model's infinite-width kernel.
    ExactGp,
}

/// Prior hyperparameters on standardized scales.
///
/// `relu.sigma2_w2` is the ReLU output variance, and the shared output
/// variance of the multiplicative model; `sigma2_w2_periodic` is the output
/// variance of the periodic network when it has its own output layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub relu: PriorSpec,
    pub rbf: RbfLayerParams,
    pub sigma2_w2_periodic: f64,
}

fn default_width() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Output file stem; the kind name when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: ModelKind,
    /// HMC for network kinds and exact GP for GP kinds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceKind>,
    /// Chosen by grid search on the GP log marginal likelihood when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper: Option<Hyper>,
    #[serde(default = "default_width")]
    pub width: usize,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            name: None,
            kind,
            inference: None,
            hyper: None,
            width: default_width(),
        }
    }

    pub fn with_inference(mut self, inference: InferenceKind) -> Self {
        self.inference = Some(inference);
        self
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn inference(&self) -> InferenceKind {
        self.inference.unwrap_or(if self.kind.is_gp() {
            InferenceKind::ExactGp
        } else {
            InferenceKind::Hmc
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_gp() && self.inference() != InferenceKind::ExactGp {
            return Err(Error::Config(format!(
                "{} is a GP model and needs exact_gp inference, not {:?}",
                self.kind.name(),
                self.inference()
            )));
        }
        if self.width == 0 {
            return Err(Error::Config("width must be >= 1".into()));
        }
        let label = self.label();
        if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config(format!(
                "model name {label:?} must be non-empty and use only letters, digits, '_' and '-'"
            )));
        }
        if let Some(h) = &self.hyper {
            h.relu.validate()?;
            h.rbf.validate()?;
            if !(h.sigma2_w2_periodic > 0.0) {
                return Err(Error::param("sigma2_w2_periodic", "must be > 0"));
            }
        }
        Ok(())
    }
}

fn default_period() -> f64 {
    12.0
}

fn default_noise() -> f64 {
    0.01
}

fn default_map_steps() -> usize {
    3000
}

fn default_hmc() -> HmcConfig {
    HmcConfig {
        n_samples: 400,
        ..HmcConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Observation noise variance on standardized targets.
    #[serde(default = "default_noise")]
    pub noise_var: f64,
    /// Seasonal period in months.
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "default_hmc")]
    pub hmc: HmcConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    /// Adam steps towards the posterior mode before HMC starts.
    #[serde(default = "default_map_steps")]
    pub map_steps: usize,
}

impl ExperimentConfig {
    pub fn new(models: Vec<ModelConfig>, seed: u64) -> Self {
        ExperimentConfig {
            version: 1,
            models,
            seed,
            noise_var: default_noise(),
            period: default_period(),
            hmc: default_hmc(),
            ensemble: EnsembleConfig::default(),
            map_steps: default_map_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Config(format!("unsupported config version {}", self.version)));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".into()));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::param("noise_var", "must be > 0"));
        }
        if !(self.period > 0.0) {
            return Err(Error::param("period", "must be > 0"));
        }
        let mut seen = HashSet::new();
        for m in &self.models {
            m.validate()?;
            if !seen.insert(m.label()) {
                return Err(Error::Config(format!("duplicate model name {:?}", m.label())));
            }
        }
        Ok(())
    }
}

fn relu_hidden(h: &Hyper) -> HiddenSpec {
    HiddenSpec::basic(Activation::Relu, h.relu.sigma2_w1, h.relu.sigma2_b1)
}

fn periodic_hidden(h: &Hyper, period: f64) -> HiddenSpec {
    HiddenSpec::periodic_rbf(h.rbf.sigma2_g, h.rbf.sigma2_u, period)
}

/// Network architecture of a model kind; GP kinds map to the network whose
/// infinite-width limit they are. `period` is in standardized input units.
pub fn build_arch(kind: ModelKind, h: &Hyper, period: f64, width: usize) -> ArchSpec {
    let relu = || ArchSpec::network(relu_hidden(h), width, h.relu.sigma2_w2, 1);
    let per = || ArchSpec::network(periodic_hidden(h, period), width, h.sigma2_w2_periodic, 1);
    match kind {
        ModelKind::ReluBnn => relu(),
        ModelKind::PeriodicBnn => per(),
        ModelKind::CombinedBnnAdd | ModelKind::CombinedGpAdd => ArchSpec::output_sum(vec![relu(), per()]),
        ModelKind::CombinedBnnMul | ModelKind::CombinedGpMul => {
            ArchSpec::hidden_mul(vec![relu_hidden(h), periodic_hidden(h, period)], width, h.relu.sigma2_w2, 1)
        }
    }
}

/// Closed-form kernel of a model kind, built with the kernel algebra.
pub fn build_kernel(kind: ModelKind, h: &Hyper, period: f64) -> Result<Kernel> {
    let warped_rbf = kernel_warp(&Kernel::rbf_bnn(h.rbf)?, Warp::periodic(period)?)?;
    if kind.is_mul() {
        return kernel_mul(&Kernel::relu(h.relu)?, &warped_rbf);
    }
    let relu = Kernel::relu(h.relu)?;
    let per = kernel_mul(&Kernel::constant(h.sigma2_w2_periodic)?, &warped_rbf)?;
    match kind {
        ModelKind::ReluBnn => Ok(relu),
        ModelKind::PeriodicBnn => Ok(per),
        _ => kernel_add(&relu, &per),
    }
}

const GRID_W1: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const GRID_B1: [f64; 3] = [0.5, 1.0, 2.0];
const GRID_W2: [f64; 4] = [0.25, 1.0, 4.0, 16.0];
const GRID_G: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
const GRID_U: [f64; 3] = [0.5, 1.0, 2.0];
const GRID_W2_PERIODIC: [f64; 4] = [0.1, 0.3, 1.0, 3.0];

/// Coarse grid search maximizing the GP log marginal likelihood of the
/// kind's kernel on standardized data. Returns the best hyperparameters and
/// their log marginal likelihood.
pub fn select_hyperparameters(
    kind: ModelKind,
    x: &[Vec<f64>],
    y: &[f64],
    noise_var: f64,
    period: f64,
) -> Result<(Hyper, f64)> {
    let one = [1.0];
    let relu_grid = |g: &'static [f64]| if kind.uses_relu() { g } else { &one[..] };
    let per_grid = |g: &'static [f64]| if kind.uses_periodic() { g } else { &one[..] };
    let w2p: &[f64] = if kind.uses_periodic() && !kind.is_mul() { &GRID_W2_PERIODIC } else { &one };
    let w2: &[f64] = if kind.uses_relu() { &GRID_W2 } else { &one };
    let mut best: Option<(Hyper, f64)> = None;
    for &w1 in relu_grid(&GRID_W1) {
        for &b1 in relu_grid(&GRID_B1) {
            for &w2 in w2 {
                for &g in per_grid(&GRID_G) {
                    for &u in per_grid(&GRID_U) {
                        for &wp in w2p {
                            let h = Hyper {
                                relu: PriorSpec::new(w1, b1, w2)?,
                                rbf: RbfLayerParams::new(g, u)?,
                                sigma2_w2_periodic: wp,
                            };
                            let k = build_kernel(kind, &h, period)?;
                            let Ok(post) = GpModel::new(k, noise_var)?.fit(x, y) else {
                                continue;
                            };
                            let lml = post.log_marginal();
                            if best.as_ref().is_none_or(|(_, b)| lml > *b) {
                                best = Some((h, lml));
                            }
                        }
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::InvalidData("no hyperparameter setting gave a valid GP fit".into()))
}

/// Predictions of one model on the query grid, in original units. `std`
/// includes the observation noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Prediction {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "mean", "std"])?;
        for i in 0..self.x.len() {
            w.write_record([self.x[i].to_string(), self.mean[i].to_string(), self.std[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Entries whose `x` lies in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Prediction {
        let idx: Vec<usize> = (0..self.x.len()).filter(|&i| self.x[i] >= lo && self.x[i] <= hi).collect();
        Prediction {
            x: idx.iter().map(|&i| self.x[i]).collect(),
            mean: idx.iter().map(|&i| self.mean[i]).collect(),
            std: idx.iter().map(|&i| self.std[i]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub kind: ModelKind,
    pub inference: InferenceKind,
    pub hyper: Hyper,
    pub seed: u64,
    pub file: String,
    pub runtime_s: f64,
    /// Log marginal likelihood of the kind's kernel at `hyper`.
    pub log_marginal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc_acceptance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc_step_sizes: Option<Vec<f64>>,
}

pub struct FitResult {
    pub report: ModelReport,
    pub prediction: Prediction,
}

/// Fits one model on the split and predicts over its query grid.
pub fn fit_model(split: &GapSplit, model: &ModelConfig, exp: &ExperimentConfig, seed: u64) -> Result<FitResult> {
    model.validate()?;
    let started = Instant::now();
    let sd = Standardizer::fit(&split.train_t, &split.train_y)?;
    let x: Vec<Vec<f64>> = split.train_t.iter().map(|&t| vec![sd.t(t)]).collect();
    let y: Vec<f64> = split.train_y.iter().map(|&v| sd.y(v)).collect();
    let grid = split.query_grid();
    let xs: Vec<Vec<f64>> = grid.iter().map(|&t| vec![sd.t(t)]).collect();
    let period = exp.period / sd.t_std;
    let noise = exp.noise_var;

    let (hyper, log_marginal) = match model.hyper {
        Some(h) => {
            let post = GpModel::new(build_kernel(model.kind, &h, period)?, noise)?.fit(&x, &y)?;
            (h, post.log_marginal())
        }
        None => select_hyperparameters(model.kind, &x, &y, noise, period)?,
    };
    let arch = build_arch(model.kind, &hyper, period, model.width);

    let mut hmc_acceptance = None;
    let mut hmc_step_sizes = None;
    let (mean, std) = match model.inference() {
        InferenceKind::ExactGp => {
            let post = GpModel::new(build_kernel(model.kind, &hyper, period)?, noise)?.fit(&x, &y)?;
            let (m, v) = post.predict_marginal(&xs)?;
            (m, v.iter().map(|v| (v.max(0.0) + noise).sqrt()).collect())
        }
        InferenceKind::Hmc => {
            let target = PosteriorTarget::new(&arch, &x, &y, noise)?;
            let init = target.free_params(&sample_params(target.network(), rng::derive(seed, 0)));
            let init = map_estimate(&target, init, exp.map_steps, 0.01)?;
            let mut cfg = exp.hmc.clone();
            cfg.seed = rng::derive(seed, 1);
            if cfg.mass.is_none() {
                cfg.mass = Some(target.prior_variances().iter().map(|v| 1.0 / v).collect());
            }
            let chain = hmc_sample(&target, &init, &cfg)?;
            hmc_acceptance = Some(chain.acceptance.clone());
            hmc_step_sizes = Some(chain.step_sizes.clone());
            bnn_predictive_hmc(&target, &chain, &xs)?
        }
        InferenceKind::Ensemble => {
            let cfg = EnsembleConfig {
                noise_var: noise,
                ..exp.ensemble.clone()
            };
            anchored_ensemble_train(&arch, &x, &y, &cfg, rng::derive(seed, 2))?.predict(&xs, true)?
        }
    };
    let prediction = Prediction {
        x: grid,
        mean: mean.iter().map(|&m| sd.y_back(m)).collect(),
        std: std.iter().map(|&s| s * sd.y_std).collect(),
    };
    if prediction.mean.iter().chain(&prediction.std).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("predictions of {}", model.label())));
    }
    Ok(FitResult {
        report: ModelReport {
            name: model.label(),
            kind: model.kind,
            inference: model.inference(),
            hyper,
            seed,
            file: format!("{}.csv", model.label()),
            runtime_s: started.elapsed().as_secs_f64(),
            log_marginal,
            hmc_acceptance,
            hmc_step_sizes,
        },
        prediction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub series: String,
    pub n_train: usize,
    pub standardization: Standardizer,
    /// Reported standard deviations include the observation noise.
    pub observation_noise_in_bands: bool,
    pub models: Vec<ModelReport>,
    pub config: ExperimentConfig,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Fits every configured model, writes `<name>.csv` per model and
/// `manifest.json` into `out_dir`. Nothing is written unless every model
/// fits.
pub fn run_experiment(series: &TimeSeries, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let split = make_gap_split(series)?;
    let sd = Standardizer::fit(&split.train_t, &split.train_y)?;
    let results = cfg
        .models
        .iter()
        .enumerate()
        .map(|(i, m)| fit_model(&split, m, cfg, rng::derive(cfg.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir)?;
    for r in &results {
        r.prediction.write_csv(&out_dir.join(&r.report.file))?;
    }
    let manifest = Manifest {
        version: VERSION.into(),
        config_hash: config_hash(cfg)?,
        seed: cfg.seed,
        series: series.name.clone(),
        n_train: split.train_t.len(),
        standardization: sd,
        observation_noise_in_bands: true,
        models: results.into_iter().map(|r| r.report).collect(),
        config: cfg.clone(),
    };
    std::fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let s = synthetic_series(SyntheticKind::Additive, 120, 0.0, 0);
        let split = make_gap_split(&s).unwrap();
        assert_eq!(split.train_t.len(), 96);
        assert!(split.gap_grid.iter().all(|t| (GAP_START..GAP_END).contains(t)));
        assert!(split.extrapolation_grid.iter().all(|&t| t > TRAIN_END && t <= EXTRAPOLATION_END));
        assert!(split.train_t.iter().all(|t| !(GAP_START..GAP_END).contains(t)));
        assert_eq!(split.query_grid().len(), 96 + 24 + 120);
    }

    #[test]
    fn short_series_is_rejected() {
        let s = synthetic_series(SyntheticKind::Additive, 100, 0.0, 0);
        assert!(make_gap_split(&s).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::new("a", vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(TimeSeries::new("a", vec![0.0, 1.0], vec![0.0; 3]).is_err());
        assert!(TimeSeries::new("a", vec![0.0, f64::NAN], vec![0.0; 2]).is_err());
    }

    #[test]
    fn gp_kind_needs_exact_inference() {
        let m = ModelConfig::new(ModelKind::CombinedGpAdd).with_inference(InferenceKind::Hmc);
        assert!(m.validate().is_err());
        assert!(ModelConfig::new(ModelKind::CombinedGpMul).validate().is_ok());
        let mut bad = ModelConfig::new(ModelKind::ReluBnn);
        bad.name = Some("../x".into());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kernels_match_architectures() {
        let h = Hyper {
            relu: PriorSpec::new(1.5, 0.7, 2.0).unwrap(),
            rbf: RbfLayerParams::new(0.6, 1.4).unwrap(),
            sigma2_w2_periodic: 0.3,
        };
        let kinds = [
            ModelKind::ReluBnn,
            ModelKind::PeriodicBnn,
            ModelKind::CombinedGpAdd,
            ModelKind::CombinedGpMul,
        ];
        for kind in kinds {
            let k = build_kernel(kind, &h, 0.4).unwrap();
            let eq = build_arch(kind, &h, 0.4, 50).equivalent_kernel().unwrap();
            for (a, b) in [(-1.0, 0.3), (0.5, 0.5), (1.7, -2.2)] {
                let (u, v) = (k.eval(&[a], &[b]).unwrap(), eq.eval(&[a], &[b]).unwrap());
                assert!((u - v).abs() < 1e-12 * u.abs().max(1.0), "{kind:?}");
            }
        }
    }
}
