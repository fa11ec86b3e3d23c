//! Small dense networks with explicit backprop, Adam and a gradient checker.

mod adam;
mod gradcheck;
mod layers;
mod network;

use thiserror::Error;

pub use adam::{Adam, DEFAULT_LR};
pub use gradcheck::{
    check_gradients, check_gradients_with, grad_check, randomized_net, relative_error, GradCheckReport, DEFAULT_STEP,
};
pub use layers::{BatchNorm, Dense, NoisyDense, Relu};
pub use network::{combine_dueling, Mode, NetworkCheckpoint, NetworkConfig, QNetwork, CHECKPOINT_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("input width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("output gradient shape mismatch: expected {expected:?}, found {found:?}")]
    GradientShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("backward called without a matching train-mode forward")]
    NoForwardCache,
    #[error("batch norm needs at least 2 rows in train mode, got {0}")]
    BatchTooSmall(usize),
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
