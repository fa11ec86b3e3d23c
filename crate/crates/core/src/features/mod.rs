//! Rolling window and the state vector the window-size agent observes.

mod normalizer;
mod state;
mod window;

use thiserror::Error;

pub use normalizer::FeatureNormalizer;
pub use state::{build_state, drift_score, entropy, FeatureSet, StateBuilder, StateVector, DEFAULT_ENTROPY_BINS};
pub use window::FeatureWindow;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}
