//! Versioned JSON configuration files.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use combnn::bnn::{ArchSpec, Estimator};
use combnn::inference::{EnsembleConfig, HmcConfig};
use combnn::kernel::KernelSpec;
use combnn::pendulum::AgentConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Parses `path` as `T` after checking its `version` field. Parse errors
/// carry the line and column reported by serde_json.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CONFIG_VERSION as u64 => {}
        Some(v) => bail!("config {}: unsupported version {v} (expected {CONFIG_VERSION})", path.display()),
        None => bail!("config {}: missing integer field \"version\"", path.display()),
    }
    serde_json::from_str(&text).with_context(|| format!("config {} does not match the schema", path.display()))
}

fn version() -> u32 {
    CONFIG_VERSION
}

/// Evenly spaced 1-D grid, both ends included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        ensure!(self.points >= 1, "grid needs at least one point");
        ensure!(self.start.is_finite() && self.end.is_finite(), "grid bounds must be finite");
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.end - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

/// Names become file names, so they are restricted to `[A-Za-z0-9_-]`.
pub fn check_name(name: &str) -> Result<()> {
    ensure!(
        !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
        "name {name:?} must be non-empty and use only letters, digits, '_' and '-'"
    );
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedArch {
    pub name: String,
    pub arch: ArchSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSampleConfig {
    pub version: u32,
    pub grid: Grid,
    pub models: Vec<NamedArch>,
    #[serde(default = "default_draws")]
    pub draws: usize,
}

fn default_draws() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    pub version: u32,
    pub arch: ArchSpec,
    pub kernel: KernelSpec,
    /// Input pairs; ten fixed pairs when absent.
    #[serde(default)]
    pub pairs: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    #[serde(default = "default_kernel_samples")]
    pub n_samples: usize,
}

fn default_estimator() -> Estimator {
    Estimator::Auto
}

fn default_kernel_samples() -> usize {
    20_000
}

/// Ten deterministic pairs spread over roughly `[−2, 2]^d`.
pub fn default_pairs(dim: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..10)
        .map(|i| {
            let i = i as f64;
            let x = (0..dim).map(|d| -1.8 + 0.4 * i + 0.15 * d as f64).collect();
            let xp = (0..dim).map(|d| 1.7 - 0.35 * i - 0.1 * d as f64).collect();
            (x, xp)
        })
        .collect()
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpFitConfig {
    pub version: u32,
    pub kernel: KernelSpec,
    pub noise_var: f64,
    pub grid: Grid,
    /// Add the noise variance to the reported predictive variance.
    #[serde(default = "yes")]
    pub observation_noise: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnnInference {
    Hmc,
    Ensemble,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnFitConfig {
    pub version: u32,
    pub arch: ArchSpec,
    pub noise_var: f64,
    pub grid: Grid,
    #[serde(default = "default_inference")]
    pub inference: BnnInference,
    #[serde(default)]
    pub hmc: HmcConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    /// Adam steps towards the posterior mode before HMC starts.
    #[serde(default = "default_map_steps")]
    pub map_steps: usize,
    #[serde(default = "yes")]
    pub observation_noise: bool,
    /// Also write the posterior samples (HMC) or members (ensemble) as JSON.
    #[serde(default)]
    pub save_samples: bool,
}

fn default_inference() -> BnnInference {
    BnnInference::Hmc
}

fn default_map_steps() -> usize {
    1000
}

/// Q-slice grid over three revolutions.
pub fn default_slice() -> Grid {
    Grid {
        start: -PI,
        end: 5.0 * PI,
        points: 181,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlTrainConfig {
    #[serde(default = "version")]
    pub version: u32,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default = "default_train_episodes")]
    pub episodes: usize,
    #[serde(default = "default_slice")]
    pub slice: Grid,
}

impl Default for RlTrainConfig {
    fn default() -> Self {
        RlTrainConfig {
            version: CONFIG_VERSION,
            agent: AgentConfig::default(),
            episodes: default_train_episodes(),
            slice: default_slice(),
        }
    }
}

fn default_train_episodes() -> usize {
    50
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlEvalConfig {
    #[serde(default = "version")]
    pub version: u32,
    #[serde(default = "default_eval_episodes")]
    pub episodes: usize,
    #[serde(default = "default_slice")]
    pub slice: Grid,
}

impl Default for RlEvalConfig {
    fn default() -> Self {
        RlEvalConfig {
            version: CONFIG_VERSION,
            episodes: default_eval_episodes(),
            slice: default_slice(),
        }
    }
}

fn default_eval_episodes() -> usize {
    10
}
