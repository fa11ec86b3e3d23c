//! Downstream task: classify the current regime from a summary of the
//! selected window.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureNormalizer;

pub const LOGLOSS_CAP: f64 = 5.0;
const PROB_FLOOR: f64 = 1e-300;

/// Per-dimension mean and population standard deviation of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl WindowSummary {
    pub fn dims(&self) -> usize {
        self.means.len()
    }

    /// `[means..., stds...]`.
    pub fn features(&self) -> Vec<f64> {
        let mut v = self.means.clone();
        v.extend_from_slice(&self.stds);
        v
    }
}

/// Two-pass mean/std over `rows` (each of length `dims`).
///
/// # Panics
/// If `rows` is empty.
pub fn summarize<'a, I>(rows: I, dims: usize) -> WindowSummary
where
    I: IntoIterator<Item = &'a [f64]>,
    I::IntoIter: Clone,
{
    let rows = rows.into_iter();
    let mut n = 0usize;
    let mut means = vec![0.0; dims];
    for r in rows.clone() {
        n += 1;
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    assert!(n > 0, "cannot summarize an empty window");
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut vars = vec![0.0; dims];
    for r in rows {
        for ((s, v), m) in vars.iter_mut().zip(r).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds = vars.into_iter().map(|s| (s / n as f64).sqrt()).collect();
    WindowSummary { means, stds }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    /// `-ln p(label)`, capped at [`LOGLOSS_CAP`].
    pub fn logloss(&self, label: usize) -> f64 {
        let p = self.probabilities[label];
        (-p.ln()).min(LOGLOSS_CAP)
    }
}

/// Anything the episode loop can drive: test-then-train plus periodic retraining.
pub trait Classifier {
    fn predict(&self, summary: &WindowSummary) -> Prediction;
    fn learn(&mut self, summary: &WindowSummary, label: usize);
    /// Warm-started passes over `data` in an order fixed by `seed`.
    fn retrain(&mut self, data: &[(WindowSummary, usize)], epochs: usize, seed: u64);
}

/// Multinomial logistic regression on `[means, stds, 1]`, trained by SGD.
///
/// With standardization on, summaries are z-scored by running statistics
/// before scoring: `predict` uses the statistics as they stand, `learn`
/// folds the summary in after its update, `retrain` only reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    classes: usize,
    inputs: usize,
    /// `(inputs + 1) x classes`, row-major; the last row is the bias.
    weights: Vec<f64>,
    lr: f64,
    scaler: Option<FeatureNormalizer>,
}

impl SoftmaxClassifier {
    pub const DEFAULT_LR: f64 = 0.01;

    pub fn new(dims: usize, classes: usize, lr: f64) -> Self {
        assert!(classes >= 2, "need at least two classes");
        let inputs = 2 * dims;
        Self {
            classes,
            inputs,
            weights: vec![0.0; (inputs + 1) * classes],
            lr,
            scaler: None,
        }
    }

    /// Same model over running-standardized summaries.
    pub fn standardized(dims: usize, classes: usize, lr: f64) -> Self {
        Self {
            scaler: Some(FeatureNormalizer::new(2 * dims)),
            ..Self::new(dims, classes, lr)
        }
    }

    pub fn is_standardized(&self) -> bool {
        self.scaler.is_some()
    }

    /// Model input for `summary` under the current statistics.
    pub fn inputs_for(&self, summary: &WindowSummary) -> Vec<f64> {
        let x = summary.features();
        match &self.scaler {
            // widths are fixed at construction
            Some(sc) => sc.transform(&x).expect("summary width matches classifier"),
            None => x,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        let c = self.classes;
        let mut s = self.weights[self.inputs * c..].to_vec();
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.weights[i * c..(i + 1) * c];
            for (sj, wj) in s.iter_mut().zip(row) {
                *sj += xi * wj;
            }
        }
        s
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scores(x);
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = e.iter().sum();
        // keep every class strictly possible even when a score underflows
        e.into_iter().map(|v| (v / z).max(PROB_FLOOR)).collect()
    }

    fn sgd(&mut self, x: &[f64], label: usize) {
        let p = self.probabilities(x);
        let c = self.classes;
        for j in 0..c {
            let g = p[j] - if j == label { 1.0 } else { 0.0 };
            if g == 0.0 {
                continue;
            }
            for (i, &xi) in x.iter().enumerate() {
                self.weights[i * c + j] -= self.lr * g * xi;
            }
            self.weights[self.inputs * c + j] -= self.lr * g;
        }
    }
}

impl Classifier for SoftmaxClassifier {
    fn predict(&self, summary: &WindowSummary) -> Prediction {
        let probabilities = self.probabilities(&self.inputs_for(summary));
        let mut class = 0;
        for (j, &p) in probabilities.iter().enumerate() {
            if p > probabilities[class] {
                class = j;
            }
        }
        Prediction { class, probabilities }
    }

    fn learn(&mut self, summary: &WindowSummary, label: usize) {
        let x = self.inputs_for(summary);
        self.sgd(&x, label);
        if let Some(sc) = &mut self.scaler {
            sc.observe(&summary.features()).expect("summary width matches classifier");
        }
    }

    fn retrain(&mut self, data: &[(WindowSummary, usize)], epochs: usize, seed: u64) {
        let xs: Vec<Vec<f64>> = data.iter().map(|(s, _)| self.inputs_for(s)).collect();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                self.sgd(&xs[i], data[i].1);
            }
        }
    }
}
