use serde::{Deserialize, Serialize};

use super::FeatureError;

const VAR_FLOOR: f64 = 1e-8;

/// Streaming per-feature z-scoring (Welford updates).
///
/// `normalize` standardizes with the statistics from *before* the sample
/// and then folds the sample in. Outputs are clipped to `±clip`, which only
/// binds while the variance estimate is still degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    clip: f64,
}

impl FeatureNormalizer {
    pub const DEFAULT_CLIP: f64 = 10.0;

    pub fn new(width: usize) -> Self {
        Self::with_clip(width, Self::DEFAULT_CLIP)
    }

    pub fn with_clip(width: usize, clip: f64) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
            clip,
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance per feature.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.width()];
        }
        self.m2.iter().map(|m2| m2 / self.count as f64).collect()
    }

    fn check(&self, x: &[f64]) -> Result<(), FeatureError> {
        if x.len() != self.width() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Z-scores without updating the statistics.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(x)?;
        if self.count == 0 {
            return Ok(vec![0.0; x.len()]);
        }
        let n = self.count as f64;
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((&v, &m), &m2)| {
                let sd = (m2 / n).max(VAR_FLOOR).sqrt();
                ((v - m) / sd).clamp(-self.clip, self.clip)
            })
            .collect())
    }

    pub fn observe(&mut self, x: &[f64]) -> Result<(), FeatureError> {
        self.check(x)?;
        self.count += 1;
        let n = self.count as f64;
        for ((&v, m), m2) in x.iter().zip(self.mean.iter_mut()).zip(self.m2.iter_mut()) {
            let delta = v - *m;
            *m += delta / n;
            *m2 += delta * (v - *m);
        }
        Ok(())
    }

    /// Transform with prior statistics, then observe.
    pub fn normalize(&mut self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let z = self.transform(x)?;
        self.observe(x)?;
        Ok(z)
    }
}
