//! Seeded generator of labeled multi-dimensional streams with injected drift.
//!
//! The stream is a sequence of class segments. Within a segment of class `c`,
//! dimension `j` at tick `t` is
//!
//! ```text
//! x = mean[c][j] + offset_j(t) + scale_j(t) * (std[c][j] * z + amp[c][j] * sin(2 pi t / period[c] + phase[c][j]))
//! ```
//!
//! with `z ~ N(0, 1)`. Drift moves `offset_j` by `mean_delta` and multiplies
//! `scale_j` by `scale_factor` at every multiple of `period` on the affected
//! dimensions. Random draws never depend on the drift spec, so unaffected
//! dimensions are bit-identical with and without drift.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{StreamError, StreamEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSpec {
    pub period: usize,
    pub affected_dims: Vec<usize>,
    pub mean_delta: f64,
    pub scale_factor: f64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            period: 10_000,
            affected_dims: vec![0],
            mean_delta: 1.0,
            scale_factor: 1.0,
        }
    }
}

impl DriftSpec {
    pub fn validate(&self, dims: usize) -> Result<(), StreamError> {
        if self.period == 0 {
            return Err(StreamError::InvalidParams("drift period must be > 0".into()));
        }
        if self.affected_dims.is_empty() {
            return Err(StreamError::InvalidParams("drift affects no dimensions".into()));
        }
        if let Some(&bad) = self.affected_dims.iter().find(|&&j| j >= dims) {
            return Err(StreamError::InvalidParams(format!(
                "drift dimension {bad} out of range for {dims} dims"
            )));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return Err(StreamError::InvalidParams("drift scale_factor must be > 0".into()));
        }
        if !self.mean_delta.is_finite() {
            return Err(StreamError::InvalidParams("drift mean_delta must be finite".into()));
        }
        Ok(())
    }

    /// Timestamps at which a shift takes effect, strictly inside `[0, length)`.
    pub fn drift_ticks(&self, length: usize) -> Vec<i64> {
        (1..)
            .map(|k| k * self.period)
            .take_while(|&t| t < length)
            .map(|t| t as i64)
            .collect()
    }
}

/// Generator parameters. `new` fills in the regime-shape defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub dims: usize,
    pub length: usize,
    pub classes: usize,
    pub drift: Option<DriftSpec>,
    pub seed: u64,
    /// Standard deviation of the per-class mean vectors.
    pub mean_spread: f64,
    /// Range of per-class, per-dimension noise standard deviations.
    pub noise_std: (f64, f64),
    /// Range of per-class, per-dimension sinusoid amplitudes.
    pub amplitude: (f64, f64),
    /// Range (inclusive) of per-class sinusoid periods, in ticks.
    pub sine_period: (usize, usize),
    /// Range (inclusive) of class segment lengths, in ticks.
    pub segment_len: (usize, usize),
}

impl SynthParams {
    pub fn new(dims: usize, length: usize, classes: usize, drift: Option<DriftSpec>, seed: u64) -> Self {
        Self {
            dims,
            length,
            classes,
            drift,
            seed,
            mean_spread: 1.0,
            noise_std: (0.5, 1.5),
            amplitude: (0.5, 1.5),
            sine_period: (8, 48),
            segment_len: (50, 400),
        }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        match self.violations().into_iter().next() {
            Some(msg) => Err(StreamError::InvalidParams(msg)),
            None => Ok(()),
        }
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        if self.dims == 0 {
            v.push("dims must be >= 1".into());
        }
        if self.length == 0 {
            v.push("length must be >= 1".into());
        }
        if self.classes < 2 {
            v.push("class count must be >= 2".into());
        }
        if !(self.mean_spread >= 0.0 && self.mean_spread.is_finite()) {
            v.push("mean_spread must be finite and >= 0".into());
        }
        for (name, (lo, hi)) in [("noise_std", self.noise_std), ("amplitude", self.amplitude)] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                v.push(format!("{name} range must satisfy 0 <= lo <= hi"));
            }
        }
        if self.sine_period.0 < 2 || self.sine_period.0 > self.sine_period.1 {
            v.push("sine_period range must satisfy 2 <= lo <= hi".into());
        }
        if self.segment_len.0 == 0 || self.segment_len.0 > self.segment_len.1 {
            v.push("segment_len range must satisfy 1 <= lo <= hi".into());
        }
        if let Some(drift) = &self.drift {
            if self.dims > 0 {
                if let Err(StreamError::InvalidParams(msg)) = drift.validate(self.dims) {
                    v.push(msg);
                }
            }
        }
        v
    }
}

struct ClassProfile {
    mean: Vec<f64>,
    std: Vec<f64>,
    amp: Vec<f64>,
    phase: Vec<f64>,
    period: f64,
}

/// Generates the full stream. Identical parameters give a bit-identical result.
pub fn synth_stream(params: &SynthParams) -> Result<Vec<StreamEvent>, StreamError> {
    params.validate()?;
    let d = params.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let profiles: Vec<ClassProfile> = (0..params.classes)
        .map(|_| {
            let mean = (0..d)
                .map(|_| params.mean_spread * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let std = (0..d).map(|_| uniform(&mut rng, params.noise_std)).collect();
            let amp = (0..d).map(|_| uniform(&mut rng, params.amplitude)).collect();
            let phase = (0..d).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
            let period = rng.gen_range(params.sine_period.0..=params.sine_period.1) as f64;
            ClassProfile {
                mean,
                std,
                amp,
                phase,
                period,
            }
        })
        .collect();

    let mut affected = vec![false; d];
    if let Some(drift) = &params.drift {
        for &j in &drift.affected_dims {
            affected[j] = true;
        }
    }

    let mut events = Vec::with_capacity(params.length);
    let mut class = rng.gen_range(0..params.classes);
    let mut remaining = rng.gen_range(params.segment_len.0..=params.segment_len.1);
    for t in 0..params.length {
        if remaining == 0 {
            // Next class is drawn uniformly among the other classes.
            let step = rng.gen_range(1..params.classes);
            class = (class + step) % params.classes;
            remaining = rng.gen_range(params.segment_len.0..=params.segment_len.1);
        }
        remaining -= 1;

        let (offset, scale) = match &params.drift {
            Some(drift) => {
                let shifts = (t / drift.period) as i32;
                (drift.mean_delta * shifts as f64, drift.scale_factor.powi(shifts))
            }
            None => (0.0, 1.0),
        };
        let profile = &profiles[class];
        let angle = 2.0 * PI * t as f64 / profile.period;
        let values = (0..d)
            .map(|j| {
                let z: f64 = rng.sample(StandardNormal);
                let deviation = profile.std[j] * z + profile.amp[j] * (angle + profile.phase[j]).sin();
                if affected[j] {
                    profile.mean[j] + offset + scale * deviation
                } else {
                    profile.mean[j] + deviation
                }
            })
            .collect();
        events.push(StreamEvent::new(t as i64, values, Some(class)));
    }
    Ok(events)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}
