//! The window-size agent: replay, exploration, double DQN updates, reward.

mod actions;
mod dqn;
mod replay;
mod reward;
mod sumtree;


use thiserror::Error;

pub use actions::ActionSet;
pub use dqn::{argmax, select_action, td_targets, Agent, AgentCheckpoint, AgentConfig, TrainStats};
pub use replay::{ReplayBuffer, SampledBatch, Transition};
pub use reward::{compute_reward, RewardMode, RewardWeights, LOGLOSS_CLAMP};
pub use sumtree::SumTree;

use crate::nn::NnError;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("replay holds {have} transitions, need {need}")]
    InsufficientReplay { have: usize, need: usize },
    #[error("training diverged at update {update}: loss {loss}, max |Q| {max_abs_q}")]
    Divergence { update: u64, loss: f64, max_abs_q: f64 },
    #[error("state width mismatch: expected {expected}, found {found}")]
    StateWidth { expected: usize, found: usize },
    #[error("policy needs a state vector but none was supplied")]
    MissingState,
    #[error("reward given without a pending action")]
    UnexpectedReward,
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
