//! `combnn`: prior sampling, kernel checks, GP/BNN fits and the two
//! experiment harnesses from one binary.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "combnn", version, about = "Composable BNN priors, GP ground truth and experiment harnesses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Versioned JSON configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw prior functions of each configured architecture on a 1-D grid.
    PriorSample {
        #[command(flatten)]
        common: Common,
        /// Draws per architecture (overrides the config).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Compare an architecture's Monte-Carlo kernel with a closed-form kernel.
    /// Exits with status 3 when any pair is outside 3 standard errors.
    KernelCheck {
        #[command(flatten)]
        common: Common,
        /// Monte-Carlo samples per pair (overrides the config).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Exact GP regression on an `x,y` CSV.
    GpFit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// BNN regression on an `x,y` CSV with HMC or an anchored ensemble.
    BnnFit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// HMC samples per chain (overrides the config).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Gap time-series experiment on a `t,y` CSV.
    Timeseries {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// HMC samples per chain (overrides the config).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Train a Q-learning agent on the pendulum task.
    RlTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a saved agent greedily and emit its Q-slice.
    RlEval {
        #[command(flatten)]
        common: Common,
        /// Agent snapshot written by rl-train.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let name = cli.command.name();
    let result = dispatch(cli.command);
    result.with_context(|| name.to_string())
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PriorSample { .. } => "prior-sample",
            Command::KernelCheck { .. } => "kernel-check",
            Command::GpFit { .. } => "gp-fit",
            Command::BnnFit { .. } => "bnn-fit",
            Command::Timeseries { .. } => "timeseries",
            Command::RlTrain { .. } => "rl-train",
            Command::RlEval { .. } => "rl-eval",
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    use commands::*;
    match command {
        Command::PriorSample { common, samples } => {
            let cfg = required(&common.config, "--config", "prior-sample")?;
            prior_sample(cfg, &common.out, common.seed.unwrap_or(0), samples)?;
        }
        Command::KernelCheck { common, samples } => {
            let cfg = required(&common.config, "--config", "kernel-check")?;
            return kernel_check(cfg, &common.out, common.seed.unwrap_or(0), samples);
        }
        Command::GpFit { common, data } => {
            let cfg = required(&common.config, "--config", "gp-fit")?;
            gp_fit(cfg, &data, &common.out, common.seed.unwrap_or(0))?;
        }
        Command::BnnFit { common, data, samples } => {
            let cfg = required(&common.config, "--config", "bnn-fit")?;
            bnn_fit(cfg, &data, &common.out, common.seed.unwrap_or(0), samples)?;
        }
        Command::Timeseries { common, data, samples } => {
            let cfg = required(&common.config, "--config", "timeseries")?;
            timeseries(cfg, &data, &common.out, common.seed, samples)?;
        }
        Command::RlTrain { common, episodes } => {
            rl_train(common.config.as_deref(), &common.out, common.seed.unwrap_or(0), episodes)?;
        }
        Command::RlEval { common, data, episodes } => {
            rl_eval(common.config.as_deref(), &data, &common.out, common.seed.unwrap_or(0), episodes)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
