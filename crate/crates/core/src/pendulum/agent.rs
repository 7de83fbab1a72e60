//! Bayesian Q-learning with an anchored ensemble of Q-networks.
//!
//! Each member has its own anchor, optimizer, target network and minibatch
//! stream. Exploration is Thompson-style: one member is drawn per episode
//! and followed greedily.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{EnvParams, Pendulum, PendulumState, TORQUES};
use crate::bnn::{Activation, ArchSpec, DenseLayer, HiddenSpec, Network, ParamSet};
use crate::error::{Error, Result};
use crate::inference::AnchoredMember;
use crate::rng::{self, Rng};
use crate::warp::Warp;

/// Action index of zero torque.
pub const ZERO_TORQUE: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    /// Two ReLU layers on raw `(θ, θ̇)`.
    Relu,
    /// As `Relu` after replacing `θ` by `(cos θ, sin θ)`.
    Periodic,
    /// `Periodic` multiplied at the hidden layer by a single TanH layer that
    /// sees only `θ`.
    PeriodicXTanh,
}

impl ArchKind {
    pub const ALL: [ArchKind; 3] = [ArchKind::Relu, ArchKind::Periodic, ArchKind::PeriodicXTanh];

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::Relu => "relu",
            ArchKind::Periodic => "periodic",
            ArchKind::PeriodicXTanh => "periodic_x_tanh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// One member drawn per episode, followed greedily.
    Thompson,
    /// Greedy under the ensemble-mean Q.
    Mean,
}

/// Prior variances of the Q-networks. The hidden→hidden and output values
/// are per-weight variances; they are converted to the width-scaled
/// convention of [`ArchSpec`] when the network is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QPriors {
    pub sigma2_w1: f64,
    pub sigma2_b1: f64,
    pub hidden_sigma2_w: f64,
    pub hidden_sigma2_b: f64,
    pub output_sigma2_w: f64,
    pub output_sigma2_b: f64,
    pub tanh_sigma2_w1: f64,
    pub tanh_sigma2_b1: f64,
}

impl Default for QPriors {
    fn default() -> Self {
        QPriors {
            sigma2_w1: 1.0,
            sigma2_b1: 1.0,
            hidden_sigma2_w: 1.0 / 50.0,
            hidden_sigma2_b: 1.0 / 50.0,
            output_sigma2_w: 10.0,
            output_sigma2_b: 10.0,
            tanh_sigma2_w1: 0.2,
            tanh_sigma2_b1: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub arch: ArchKind,
    pub width: usize,
    pub priors: QPriors,
    pub members: usize,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Gradient updates between target-network refreshes.
    pub target_update: usize,
    pub learning_rate: f64,
    /// Observation-noise variance in the anchored loss.
    pub noise_var: f64,
    /// Environment steps between updates.
    pub train_every: usize,
    /// Replay size before the first update.
    pub warmup: usize,
    pub exploration: Exploration,
    pub env: EnvParams,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            arch: ArchKind::PeriodicXTanh,
            width: 50,
            priors: QPriors::default(),
            members: 5,
            gamma: 0.99,
            replay_capacity: 50_000,
            batch_size: 32,
            target_update: 200,
            learning_rate: 1e-3,
            noise_var: 1.0,
            train_every: 1,
            warmup: 200,
            exploration: Exploration::Thompson,
            env: EnvParams::default(),
        }
    }
}

impl AgentConfig {
    pub fn new(arch: ArchKind) -> Self {
        AgentConfig {
            arch,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) && self.gamma != 0.0 {
            return Err(Error::param("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        for (name, v) in [
            ("width", self.width),
            ("members", self.members),
            ("replay_capacity", self.replay_capacity),
            ("batch_size", self.batch_size),
            ("target_update", self.target_update),
            ("train_every", self.train_every),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be >= 1"));
            }
        }
        for (name, v) in [("learning_rate", self.learning_rate), ("noise_var", self.noise_var)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        self.env.validate()?;
        self.arch_spec()?.validate()
    }

    /// The Q-network: input `(θ, θ̇)`, one output per torque.
    pub fn arch_spec(&self) -> Result<ArchSpec> {
        let p = &self.priors;
        let h = self.width as f64;
        let layers = vec![
            DenseLayer {
                activation: Activation::Relu,
                sigma2_w: p.sigma2_w1,
                sigma2_b: p.sigma2_b1,
            },
            DenseLayer {
                activation: Activation::Relu,
                sigma2_w: p.hidden_sigma2_w * h,
                sigma2_b: p.hidden_sigma2_b,
            },
        ];
        let periodic = || -> Result<HiddenSpec> {
            let warp = Warp::periodic(2.0 * PI)?;
            Ok(HiddenSpec::deep(layers.clone()).with_warp(warp))
        };
        let hidden = match self.arch {
            ArchKind::Relu => HiddenSpec::deep(layers.clone()),
            ArchKind::Periodic => periodic()?,
            ArchKind::PeriodicXTanh => HiddenSpec::HiddenMul {
                children: vec![
                    periodic()?,
                    HiddenSpec::basic(Activation::Tanh, p.tanh_sigma2_w1, p.tanh_sigma2_b1).with_dims(vec![0]),
                ],
            },
        };
        Ok(ArchSpec::Network {
            hidden,
            width: self.width,
            sigma2_w2: p.output_sigma2_w * h,
            sigma2_b2: p.output_sigma2_b,
            input_dim: 2,
            outputs: TORQUES.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: PendulumState,
    pub action: usize,
    pub reward: f64,
    pub next: PendulumState,
}

/// Fixed-capacity experience buffer; the oldest transition is evicted first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    buf: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            buf: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.buf.get(i)
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<Transition> {
        (0..n).map(|_| self.buf[rng.random_range(0..self.buf.len())]).collect()
    }
}

fn features(s: &PendulumState) -> [f64; 2] {
    [s.theta, s.theta_dot]
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
struct Member {
    inner: AnchoredMember,
    target: ParamSet,
    rng: Rng,
}

pub struct Agent {
    config: AgentConfig,
    net: Network,
    members: Vec<Member>,
    replay: ReplayBuffer,
    rng: Rng,
    active: usize,
    env_steps: u64,
    updates: u64,
}

/// Serializable parameter dump of a trained agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub config: AgentConfig,
    pub arch: ArchSpec,
    pub members: Vec<ParamSet>,
    pub anchors: Vec<ParamSet>,
    pub targets: Vec<ParamSet>,
    pub env_steps: u64,
    pub updates: u64,
}

impl AgentSnapshot {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: AgentSnapshot = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok(s)
    }
}

impl Agent {
    /// A fresh agent. Member `j` draws its initialization, anchor and
    /// minibatches from `rng::derive(seed, j + 1)`; exploration uses
    /// stream 0 of `seed`.
    pub fn new(config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let net = Network::new(&config.arch_spec()?)?;
        let members = (0..config.members as u64)
            .map(|j| {
                let s = rng::derive(seed, j + 1);
                let inner = AnchoredMember::new(&net, s, config.learning_rate);
                Member {
                    target: inner.params.clone(),
                    inner,
                    rng: rng::stream(s, 3),
                }
            })
            .collect();
        Ok(Agent {
            replay: ReplayBuffer::new(config.replay_capacity),
            rng: rng::stream(seed, 0),
            net,
            members,
            config,
            active: 0,
            env_steps: 0,
            updates: 0,
        })
    }

    /// Rebuilds an agent for evaluation from a snapshot (optimizer state and
    /// replay are not restored).
    pub fn from_snapshot(snap: &AgentSnapshot, seed: u64) -> Result<Self> {
        let mut agent = Agent::new(snap.config.clone(), seed)?;
        if snap.members.len() != agent.members.len()
            || snap.anchors.len() != agent.members.len()
            || snap.targets.len() != agent.members.len()
        {
            return Err(Error::Config("snapshot member count does not match its config".into()));
        }
        let n = agent.net.n_params();
        for (j, m) in agent.members.iter_mut().enumerate() {
            for p in [&snap.members[j], &snap.anchors[j], &snap.targets[j]] {
                crate::error::check_dim(n, p.values.len())?;
            }
            m.inner.params = snap.members[j].clone();
            m.inner.anchor = snap.anchors[j].clone();
            m.target = snap.targets[j].clone();
        }
        agent.env_steps = snap.env_steps;
        agent.updates = snap.updates;
        Ok(agent)
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        AgentSnapshot {
            config: self.config.clone(),
            arch: self.net.spec().clone(),
            members: self.members.iter().map(|m| m.inner.params.clone()).collect(),
            anchors: self.members.iter().map(|m| m.inner.anchor.clone()).collect(),
            targets: self.members.iter().map(|m| m.target.clone()).collect(),
            env_steps: self.env_steps,
            updates: self.updates,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn active_member(&self) -> usize {
        self.active
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn member_params(&self, j: usize) -> &ParamSet {
        &self.members[j].inner.params
    }

    pub fn set_member_params(&mut self, j: usize, params: ParamSet) -> Result<()> {
        crate::error::check_dim(self.net.n_params(), params.values.len())?;
        self.members[j].inner.params = params;
        Ok(())
    }

    pub fn member_anchor(&self, j: usize) -> &ParamSet {
        &self.members[j].inner.anchor
    }

    pub fn target_params(&self, j: usize) -> &ParamSet {
        &self.members[j].target
    }

    /// Q-values of every action under member `j`.
    pub fn q_member(&self, j: usize, s: &PendulumState) -> Vec<f64> {
        self.net.eval_raw(&self.members[j].inner.params.values, &features(s))
    }

    /// Ensemble-mean Q-values of every action.
    pub fn q_mean(&self, s: &PendulumState) -> Vec<f64> {
        let mut acc = vec![0.0; TORQUES.len()];
        for j in 0..self.members.len() {
            for (a, q) in acc.iter_mut().zip(self.q_member(j, s)) {
                *a += q;
            }
        }
        let m = self.members.len() as f64;
        acc.iter().map(|v| v / m).collect()
    }

    /// Draws the member followed during the next episode.
    pub fn begin_episode(&mut self) {
        self.active = self.rng.random_range(0..self.members.len());
    }

    /// Greedy action under the exploration rule.
    pub fn act(&self, s: &PendulumState) -> usize {
        match self.config.exploration {
            Exploration::Thompson => greedy(&self.q_member(self.active, s)),
            Exploration::Mean => greedy(&self.q_mean(s)),
        }
    }

    /// TD targets `r + γ max_a Q_target(s', a)` for member `j`. Episodes end
    /// only by the time limit, so every transition is bootstrapped.
    pub fn td_targets(&self, j: usize, batch: &[Transition]) -> Vec<f64> {
        td_targets(&self.net, &self.members[j].target, self.config.gamma, batch)
    }

    /// Stores a transition and runs a training step when one is due.
    pub fn observe(&mut self, t: Transition) -> Result<()> {
        t.state.check_finite()?;
        t.next.check_finite()?;
        self.replay.push(t);
        self.env_steps += 1;
        if self.replay.len() >= self.config.warmup.max(1) && self.env_steps % self.config.train_every as u64 == 0 {
            self.train_step()?;
        }
        Ok(())
    }

    /// One gradient step per member, each on its own minibatch from the
    /// replay buffer.
    pub fn train_step(&mut self) -> Result<()> {
        if self.replay.is_empty() {
            return Err(Error::Config("replay buffer is empty".into()));
        }
        let (net, replay, cfg) = (&self.net, &self.replay, &self.config);
        let scale = replay.len() as f64 / cfg.batch_size as f64;
        self.members.par_iter_mut().try_for_each(|m| {
            let batch = replay.sample(cfg.batch_size, &mut m.rng);
            member_step(net, cfg, m, &batch, scale).map(drop)
        })?;
        self.after_update();
        Ok(())
    }

    /// One gradient step per member on the given batch.
    pub fn update(&mut self, batch: &[Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Config("update needs a non-empty batch".into()));
        }
        let (net, cfg) = (&self.net, &self.config);
        let scale = (self.replay.len().max(batch.len())) as f64 / batch.len() as f64;
        self.members
            .par_iter_mut()
            .try_for_each(|m| member_step(net, cfg, m, batch, scale).map(drop))?;
        self.after_update();
        Ok(())
    }

    fn after_update(&mut self) {
        self.updates += 1;
        if self.updates % self.config.target_update as u64 == 0 {
            for m in &mut self.members {
                m.target = m.inner.params.clone();
            }
        }
    }

    /// Mean ensemble Q of `action` at `(θ, θ̇)` for each `θ` in the grid.
    pub fn qvalue_slice(&self, thetas: &[f64], theta_dot: f64, action: usize) -> Vec<f64> {
        thetas
            .iter()
            .map(|&th| self.q_mean(&PendulumState::new(th, theta_dot))[action])
            .collect()
    }
}

fn td_targets(net: &Network, target: &ParamSet, gamma: f64, batch: &[Transition]) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if gamma == 0.0 {
                return t.reward;
            }
            let q = net.eval_raw(&target.values, &features(&t.next));
            t.reward + gamma * q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn member_step(net: &Network, cfg: &AgentConfig, m: &mut Member, batch: &[Transition], scale: f64) -> Result<f64> {
    let y = td_targets(net, &m.target, cfg.gamma, batch);
    let xs: Vec<[f64; 2]> = batch.iter().map(|t| features(&t.state)).collect();
    let triples: Vec<(&[f64], usize, f64)> = xs
        .iter()
        .zip(batch)
        .zip(&y)
        .map(|((x, t), &y)| (x.as_slice(), t.action, y))
        .collect();
    m.inner.step(net, &triples, cfg.noise_var, scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cumulative_reward: f64,
    /// Environment steps taken (always the episode length).
    #[serde(skip)]
    pub steps: usize,
}

pub struct TrainResult {
    pub curve: Vec<EpisodeLog>,
    pub agent: Agent,
}

/// Trains a fresh agent for `episodes` episodes. Episode starts are drawn
/// from stream 1 of `seed`.
pub fn train_run(cfg: &AgentConfig, episodes: usize, seed: u64) -> Result<TrainResult> {
    if episodes == 0 {
        return Err(Error::param("episodes", "must be >= 1"));
    }
    let mut agent = Agent::new(cfg.clone(), seed)?;
    let mut start_rng = rng::stream(seed, 1);
    let mut env = Pendulum::new(cfg.env.clone(), PendulumState::new(PI, 0.0))?;
    let mut curve = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        env.reset(Pendulum::random_start(&mut start_rng))?;
        agent.begin_episode();
        let mut total = 0.0;
        loop {
            let s = env.state();
            let a = agent.act(&s);
            let (next, r, done) = env.step(a)?;
            agent.observe(Transition {
                state: s,
                action: a,
                reward: r,
                next,
            })?;
            total += r;
            if done {
                break;
            }
        }
        curve.push(EpisodeLog {
            episode,
            cumulative_reward: total,
            steps: env.steps_taken(),
        });
    }
    Ok(TrainResult { curve, agent })
}

/// Cumulative rewards of `episodes` greedy episodes under the ensemble mean.
pub fn evaluate(agent: &Agent, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let mut start_rng = rng::stream(seed, 1);
    let mut env = Pendulum::new(agent.config.env.clone(), PendulumState::new(PI, 0.0))?;
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset(Pendulum::random_start(&mut start_rng))?;
        let mut total = 0.0;
        loop {
            let a = greedy(&agent.q_mean(&env.state()));
            let (_, r, done) = env.step(a)?;
            total += r;
            if done {
                break;
            }
        }
        out.push(total);
    }
    Ok(out)
}

pub fn write_curve_csv(path: &Path, curve: &[EpisodeLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in curve {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `theta,action,q` rows for every action of the mean-Q slice at
/// `θ̇ = theta_dot`.
pub fn write_qslice_csv(path: &Path, agent: &Agent, thetas: &[f64], theta_dot: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "torque", "q"])?;
    for &th in thetas {
        let q = agent.q_mean(&PendulumState::new(th, theta_dot));
        for (a, v) in q.iter().enumerate() {
            w.write_record(&[th.to_string(), TORQUES[a].to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(arch: ArchKind) -> AgentConfig {
        AgentConfig {
            arch,
            width: 8,
            members: 2,
            warmup: 4,
            batch_size: 4,
            ..Default::default()
        }
    }

    #[test]
    fn greedy_breaks_ties_low() {
        assert_eq!(greedy(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(greedy(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(greedy(&[-1.0, -2.0, -0.5]), 2);
    }

    #[test]
    fn replay_evicts_oldest() {
        let mut r = ReplayBuffer::new(3);
        for i in 0..5 {
            r.push(Transition {
                state: PendulumState::new(i as f64, 0.0),
                action: 0,
                reward: 0.0,
                next: PendulumState::new(0.0, 0.0),
            });
            assert!(r.len() <= 3);
        }
        let kept: Vec<f64> = (0..3).map(|i| r.get(i).unwrap().state.theta).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn arch_has_three_outputs_and_prior_scaling() {
        for kind in ArchKind::ALL {
            let cfg = AgentConfig::new(kind);
            let net = Network::new(&cfg.arch_spec().unwrap()).unwrap();
            assert_eq!(net.outputs(), 3);
            assert_eq!(net.input_dim(), 2);
            // output weights: per-weight variance 10
            let r = &net.output_weight_ranges()[0];
            assert!((net.prior_variances()[r.start] - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn config_rejects_bad_gamma() {
        let mut c = AgentConfig::default();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        c.gamma = 0.0;
        assert!(c.validate().is_ok());
        c.members = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn target_refresh_interval() {
        let mut cfg = small(ArchKind::Relu);
        cfg.target_update = 2;
        let mut agent = Agent::new(cfg, 3).unwrap();
        let batch = vec![Transition {
            state: PendulumState::new(0.1, 0.2),
            action: 2,
            reward: -1.0,
            next: PendulumState::new(0.2, 0.1),
        }];
        let t0 = agent.target_params(0).clone();
        agent.update(&batch).unwrap();
        assert_eq!(agent.target_params(0), &t0);
        assert_ne!(agent.member_params(0), &t0);
        agent.update(&batch).unwrap();
        assert_eq!(agent.target_params(0), agent.member_params(0));
    }
}
