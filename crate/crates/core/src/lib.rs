//! Adaptive sliding-window sizing for multi-dimensional streams.
//!
//! A dueling double DQN with prioritized replay picks, tick by tick, how many
//! recent events a downstream classifier sees. Fixed-size and ADWIN-driven
//! windows are provided as baselines, together with an experiment harness
//! that measures accuracy, window size, cost, drift robustness and stability.

pub mod agent;
pub mod baselines;
pub mod classifier;
pub mod episode;
pub mod features;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod schedule;
pub mod stream;
