//! Stream sources and event plumbing.
//!
//! Events flow from a source (CSV file or the synthetic generator) through a
//! [`ReorderBuffer`] before any windowed computation sees them.

mod csv_source;
mod reorder;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_source::{load_csv_stream, write_csv_stream, CsvSchema, TimestampColumn};
pub use reorder::ReorderBuffer;
pub use synth::{synth_stream, DriftSpec, SynthParams};

/// One timestamped `d`-dimensional sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub timestamp: i64,
    pub values: Vec<f64>,
    pub label: Option<usize>,
}

impl StreamEvent {
    pub fn new(timestamp: i64, values: Vec<f64>, label: Option<usize>) -> Self {
        Self {
            timestamp,
            values,
            label,
        }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    /// Checks the event against a stream's dimension and class count.
    pub fn validate(&self, dims: usize, classes: Option<usize>) -> Result<(), StreamError> {
        if self.values.len() != dims {
            return Err(StreamError::DimensionMismatch {
                expected: dims,
                found: self.values.len(),
            });
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(StreamError::NonFinite {
                timestamp: self.timestamp,
                dim: pos,
            });
        }
        if let (Some(label), Some(c)) = (self.label, classes) {
            if label >= c {
                return Err(StreamError::LabelOutOfRange { label, classes: c });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("cannot open stream file {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("event at timestamp {timestamp} has a non-finite value in dimension {dim}")]
    NonFinite { timestamp: i64, dim: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
