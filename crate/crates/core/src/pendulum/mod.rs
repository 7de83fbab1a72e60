//! Pendulum swing-up with discrete torque, solved by Bayesian Q-learning
//! over anchored ensembles of Q-networks.

mod agent;
mod env;

pub use agent::{
    evaluate, greedy, train_run, write_curve_csv, write_qslice_csv, Agent, AgentConfig, AgentSnapshot, ArchKind,
    EpisodeLog, Exploration, QPriors, ReplayBuffer, TrainResult, Transition, ZERO_TORQUE,
};
pub use env::{
    env_step, wrap_angle, EnvParams, FrictionMode, Pendulum, PendulumState, RewardRule, LITERAL_GUARD, TORQUES,
};
