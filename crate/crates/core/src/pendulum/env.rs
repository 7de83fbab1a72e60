//! Pendulum swing-up with discrete torque and an angle-dependent friction
//! factor, so that successive revolutions have slightly different dynamics.
//!
//! Angle convention: `θ = 0` is upright, `θ = π` hangs straight down. The
//! angle is cumulative and never wrapped in the state.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The discrete torque set; actions are indices into it.
pub const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];

/// Smallest allowed `|1 − e^{−θ/3}|` in literal friction mode.
pub const LITERAL_GUARD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    /// Cumulative angle in radians.
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn new(theta: f64, theta_dot: f64) -> Self {
        PendulumState { theta, theta_dot }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.theta.is_finite() && self.theta_dot.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("pendulum state {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionMode {
    /// `2 / (1 + e^{−θ/3})`: smooth, positive, equal to 1 at `θ = 0`.
    Sigmoid,
    /// `2 / (1 − e^{−θ/3})` with the denominator pushed out of
    /// `(−LITERAL_GUARD, LITERAL_GUARD)`.
    Literal,
}

impl FrictionMode {
    pub fn factor(self, theta: f64) -> f64 {
        let e = (-theta / 3.0).exp();
        match self {
            FrictionMode::Sigmoid => 2.0 / (1.0 + e),
            FrictionMode::Literal => {
                let mut d = 1.0 - e;
                if d.abs() < LITERAL_GUARD {
                    d = if d < 0.0 { -LITERAL_GUARD } else { LITERAL_GUARD };
                }
                2.0 / d
            }
        }
    }
}

/// `−(a·wrap(θ − θ_up)² + b·θ̇² + c·τ²)`, evaluated on the state before the
/// step and the applied torque.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardRule {
    pub angle_weight: f64,
    pub velocity_weight: f64,
    pub torque_weight: f64,
    pub theta_up: f64,
}

impl Default for RewardRule {
    fn default() -> Self {
        RewardRule {
            angle_weight: 1.0,
            velocity_weight: 0.1,
            torque_weight: 0.001,
            theta_up: 0.0,
        }
    }
}

impl RewardRule {
    pub fn reward(&self, s: &PendulumState, torque: f64) -> f64 {
        let a = wrap_angle(s.theta - self.theta_up);
        -(self.angle_weight * a * a
            + self.velocity_weight * s.theta_dot * s.theta_dot
            + self.torque_weight * torque * torque)
    }

    /// Most negative reward reachable with `|θ̇| ≤ max_speed` and unit torque.
    pub fn lower_bound(&self, max_speed: f64) -> f64 {
        -(self.angle_weight * PI * PI + self.velocity_weight * max_speed * max_speed + self.torque_weight)
    }
}

/// Wraps to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = (a + PI).rem_euclid(two_pi) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvParams {
    pub dt: f64,
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub max_speed: f64,
    pub friction_mode: FrictionMode,
    pub episode_len: usize,
    pub reward: RewardRule,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            dt: 0.05,
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            max_speed: 8.0,
            friction_mode: FrictionMode::Sigmoid,
            episode_len: 200,
            reward: RewardRule::default(),
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt", self.dt),
            ("mass", self.mass),
            ("length", self.length),
            ("max_speed", self.max_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !self.gravity.is_finite() {
            return Err(Error::param("gravity", "must be finite"));
        }
        if self.episode_len == 0 {
            return Err(Error::param("episode_len", "must be >= 1"));
        }
        let r = &self.reward;
        if [r.angle_weight, r.velocity_weight, r.torque_weight, r.theta_up]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::param("reward", "weights must be finite"));
        }
        Ok(())
    }
}

/// One integration step. `torque` must be one of [`TORQUES`].
///
/// Returns the next state and the reward. Episode termination is tracked by
/// [`Pendulum`].
pub fn env_step(s: &PendulumState, torque: f64, p: &EnvParams) -> Result<(PendulumState, f64)> {
    if !TORQUES.contains(&torque) {
        return Err(Error::param("torque", format!("must be one of -1, 0, 1; got {torque}")));
    }
    s.check_finite()?;
    let accel = 3.0 * p.gravity / (2.0 * p.length) * s.theta.sin() + 3.0 / (p.mass * p.length * p.length) * torque;
    let theta_dot = (s.theta_dot + accel * p.dt).clamp(-p.max_speed, p.max_speed);
    let theta = s.theta + p.friction_mode.factor(s.theta) * theta_dot * p.dt;
    let next = PendulumState { theta, theta_dot };
    next.check_finite()?;
    Ok((next, p.reward.reward(s, torque)))
}

/// An environment instance with an episode clock.
#[derive(Clone, Debug)]
pub struct Pendulum {
    pub params: EnvParams,
    state: PendulumState,
    t: usize,
}

impl Pendulum {
    pub fn new(params: EnvParams, start: PendulumState) -> Result<Self> {
        params.validate()?;
        start.check_finite()?;
        Ok(Pendulum { params, state: start, t: 0 })
    }

    /// Uniform `θ ∈ [−π, π)`, `θ̇ ∈ [−1, 1)`.
    pub fn random_start(rng: &mut impl rand::Rng) -> PendulumState {
        PendulumState {
            theta: rng.random_range(-PI..PI),
            theta_dot: rng.random_range(-1.0..1.0),
        }
    }

    pub fn reset(&mut self, start: PendulumState) -> Result<()> {
        start.check_finite()?;
        self.state = start;
        self.t = 0;
        Ok(())
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    /// Applies action index `action` (into [`TORQUES`]); returns
    /// `(next_state, reward, done)`.
    pub fn step(&mut self, action: usize) -> Result<(PendulumState, f64, bool)> {
        if self.t >= self.params.episode_len {
            return Err(Error::Config("episode already finished; call reset".into()));
        }
        let torque = *TORQUES
            .get(action)
            .ok_or_else(|| Error::param("action", format!("index {action} out of range 0..3")))?;
        let (next, r) = env_step(&self.state, torque, &self.params)?;
        self.state = next;
        self.t += 1;
        Ok((next, r, self.t >= self.params.episode_len))
    }
}
