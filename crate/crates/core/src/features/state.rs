use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FeatureWindow;
use crate::stream::ReorderBuffer;

/// Histogram bins used for the entropy feature unless configured otherwise.
pub const DEFAULT_ENTROPY_BINS: usize = 16;

const DRIFT_EPS: f64 = 1e-8;

/// Summary of the recent stream handed to the window-size agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub variances: Vec<f64>,
    pub correlations: Vec<f64>,
    pub rates: Vec<f64>,
    pub entropy: f64,
    pub ooo_fraction: f64,
    pub spectral: Vec<f64>,
    pub drift_score: f64,
}

impl StateVector {
    /// `3d + d(d-1)/2 + 3`.
    pub fn full_len(dims: usize) -> usize {
        3 * dims + dims * (dims - 1) / 2 + 3
    }

    /// Canonical concatenation: variances, correlations, rates, entropy,
    /// out-of-order fraction, spectral, drift score.
    pub fn to_vec(&self) -> Vec<f64> {
        FeatureSet::Full.project(self)
    }

    pub fn len(&self) -> usize {
        self.variances.len() + self.correlations.len() + self.rates.len() + self.spectral.len() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Which state features the agent sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    #[default]
    Full,
    /// Full state minus the spectral block.
    NoSpectral,
    /// Variances followed by rates only.
    VarianceRate,
}

impl FeatureSet {
    pub fn len(self, dims: usize) -> usize {
        match self {
            FeatureSet::Full => StateVector::full_len(dims),
            FeatureSet::NoSpectral => StateVector::full_len(dims) - dims,
            FeatureSet::VarianceRate => 2 * dims,
        }
    }

    pub fn project(self, s: &StateVector) -> Vec<f64> {
        let mut out = Vec::with_capacity(s.len());
        match self {
            FeatureSet::VarianceRate => {
                out.extend_from_slice(&s.variances);
                out.extend_from_slice(&s.rates);
            }
            FeatureSet::Full | FeatureSet::NoSpectral => {
                out.extend_from_slice(&s.variances);
                out.extend_from_slice(&s.correlations);
                out.extend_from_slice(&s.rates);
                out.push(s.entropy);
                out.push(s.ooo_fraction);
                if self == FeatureSet::Full {
                    out.extend_from_slice(&s.spectral);
                }
                out.push(s.drift_score);
            }
        }
        out
    }
}

/// Computes state vectors from a window. Caches DFT twiddle factors, so
/// reuse one builder per stream.
#[derive(Debug, Clone)]
pub struct StateBuilder {
    bins: usize,
    twiddle_n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Default for StateBuilder {
    fn default() -> Self {
        Self::new(DEFAULT_ENTROPY_BINS)
    }
}

impl StateBuilder {
    pub fn new(bins: usize) -> Self {
        assert!(bins >= 1, "entropy needs at least one bin");
        Self {
            bins,
            twiddle_n: 0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn build(&mut self, window: &FeatureWindow, buffer: &ReorderBuffer) -> StateVector {
        StateVector {
            variances: window.variances(),
            correlations: window.correlations(),
            rates: window.rate_of_change(),
            entropy: entropy(window, self.bins),
            ooo_fraction: buffer.ooo_fraction(),
            spectral: self.spectral(window),
            drift_score: drift_score(window),
        }
    }

    /// Dominant non-DC DFT magnitude per dimension, divided by the sample count.
    pub fn spectral(&mut self, window: &FeatureWindow) -> Vec<f64> {
        let n = window.len();
        let d = window.dims();
        if n < 4 {
            return vec![0.0; d];
        }
        if self.twiddle_n != n {
            self.cos = (0..n).map(|r| (2.0 * PI * r as f64 / n as f64).cos()).collect();
            self.sin = (0..n).map(|r| (2.0 * PI * r as f64 / n as f64).sin()).collect();
            self.twiddle_n = n;
        }
        let first = window.get(0).expect("n >= 4");
        let mut series = vec![0.0; n];
        (0..d)
            .map(|j| {
                // Removing a constant only changes the DC bin.
                for (slot, sample) in series.iter_mut().zip(window.samples()) {
                    *slot = sample[j] - first[j];
                }
                let mut best = 0.0f64;
                for k in 1..=n / 2 {
                    let (mut re, mut im) = (0.0, 0.0);
                    let mut r = 0usize;
                    for &x in &series {
                        re += x * self.cos[r];
                        im -= x * self.sin[r];
                        r += k;
                        if r >= n {
                            r -= n;
                        }
                    }
                    best = best.max((re * re + im * im).sqrt());
                }
                best / n as f64
            })
            .collect()
    }
}

/// Shannon entropy (nats) of a histogram over every stored value, binned
/// between the window's global min and max.
pub fn entropy(window: &FeatureWindow, bins: usize) -> f64 {
    if window.is_empty() {
        return 0.0;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in window.samples().flatten() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if hi <= lo {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    let width = hi - lo;
    for &v in window.samples().flatten() {
        let b = (((v - lo) / width) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let total = (window.len() * window.dims()) as f64;
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Mean over dimensions of the standardized split-half mean shift:
/// `|mean(newer half) - mean(older half)| / (pooled std + 1e-8)`.
pub fn drift_score(window: &FeatureWindow) -> f64 {
    let n = window.len();
    if n < 4 {
        return 0.0;
    }
    let d = window.dims();
    let n_old = n / 2;
    let n_new = n - n_old;
    let mut total = 0.0;
    for j in 0..d {
        let column = || window.samples().map(|s| s[j]);
        let old_mean = column().take(n_old).sum::<f64>() / n_old as f64;
        let new_mean = column().skip(n_old).sum::<f64>() / n_new as f64;
        let old_ss: f64 = column().take(n_old).map(|x| (x - old_mean).powi(2)).sum();
        let new_ss: f64 = column().skip(n_old).map(|x| (x - new_mean).powi(2)).sum();
        let pooled_std = ((old_ss + new_ss) / n as f64).sqrt();
        total += (new_mean - old_mean).abs() / (pooled_std + DRIFT_EPS);
    }
    total / d as f64
}

/// Convenience wrapper for one-off state computation.
pub fn build_state(window: &FeatureWindow, buffer: &ReorderBuffer) -> StateVector {
    StateBuilder::default().build(window, buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::StreamEvent;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn window_from(rows: &[Vec<f64>]) -> FeatureWindow {
        let mut w = FeatureWindow::new(rows.len().max(1), rows[0].len());
        for r in rows {
            w.push(r).unwrap();
        }
        w
    }

    #[test]
    fn lengths_follow_formula() {
        assert_eq!(StateVector::full_len(6), 36);
        assert_eq!(StateVector::full_len(3), 15);
        assert_eq!(FeatureSet::NoSpectral.len(6), 30);
        assert_eq!(FeatureSet::VarianceRate.len(6), 12);
        for d in 2..=16 {
            let rows: Vec<Vec<f64>> = (0..5).map(|t| (0..d).map(|j| (t * j) as f64).collect()).collect();
            let s = build_state(&window_from(&rows), &ReorderBuffer::new(0));
            assert_eq!(s.to_vec().len(), 3 * d + d * (d - 1) / 2 + 3);
            for set in [FeatureSet::Full, FeatureSet::NoSpectral, FeatureSet::VarianceRate] {
                assert_eq!(set.project(&s).len(), set.len(d));
            }
        }
    }

    #[test]
    fn constant_stream_is_all_zero() {
        let rows = vec![vec![2.5; 3]; 50];
        let s = build_state(&window_from(&rows), &ReorderBuffer::new(0));
        assert!(s.to_vec().iter().all(|&v| v == 0.0), "{:?}", s);

        // Entropy pools all dimensions, so distinct per-dim constants are three values.
        let rows = vec![vec![2.5, -1.0, 7.0]; 50];
        let s = build_state(&window_from(&rows), &ReorderBuffer::new(0));
        assert!((s.entropy - 3f64.ln()).abs() < 1e-12);
        let mut rest = s.to_vec();
        rest.retain(|&v| v != s.entropy);
        assert!(rest.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entropy_uniform_bins() {
        let rows: Vec<Vec<f64>> = (0..16).map(|v| vec![v as f64]).collect();
        let h = entropy(&window_from(&rows), 16);
        assert!((h - 16f64.ln()).abs() < 1e-12);
        assert!((h - 2.7726).abs() < 1e-4);
    }

    #[test]
    fn entropy_constant_is_zero() {
        let rows = vec![vec![1.0, 1.0]; 10];
        assert_eq!(entropy(&window_from(&rows), 16), 0.0);
    }

    #[test]
    fn sinusoid_spectral_peak() {
        let n = 200;
        let amp = 1.7;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|t| vec![3.0 + amp * (2.0 * PI * 5.0 * t as f64 / n as f64 + 0.3).sin(), 4.0])
            .collect();
        let s = StateBuilder::default().spectral(&window_from(&rows));
        assert!((s[0] - amp / 2.0).abs() < 1e-6, "{}", s[0]);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn spectral_needs_four_samples() {
        let rows = vec![vec![1.0], vec![3.0], vec![-2.0]];
        assert_eq!(StateBuilder::default().spectral(&window_from(&rows)), vec![0.0]);
    }

    #[test]
    fn drift_score_cases() {
        let stationary = vec![vec![1.0, 1.0]; 20];
        assert_eq!(drift_score(&window_from(&stationary)), 0.0);

        let mut step: Vec<Vec<f64>> = vec![vec![0.0, 0.0]; 10];
        step.extend(vec![vec![1.0, 1.0]; 10]);
        let score = drift_score(&window_from(&step));
        assert!((score - 1e8).abs() < 1.0, "{score}");

        let half: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64, -(t as f64)]).collect();
        let mut same = half.clone();
        same.extend(half);
        assert_eq!(drift_score(&window_from(&same)), 0.0);
    }

    #[test]
    fn drift_score_unit_noise_monte_carlo() {
        let mut scores = Vec::new();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..200)
                .map(|t| {
                    let base = if t < 100 { 0.0 } else { 1.0 };
                    (0..2).map(|_| base + rng.sample::<f64, _>(StandardNormal)).collect()
                })
                .collect();
            scores.push(drift_score(&window_from(&rows)));
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        assert!((mean - 1.0).abs() < 0.3, "mean score {mean}");
        assert!(scores.iter().all(|s| (s - 1.0).abs() < 1.0));
    }

    #[test]
    fn ooo_fraction_from_buffer() {
        let mut buf = ReorderBuffer::new(2);
        for t in [1, 10, 2, 11] {
            buf.push(StreamEvent::new(t, vec![0.0], None));
        }
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let s = build_state(&window_from(&rows), &buf);
        assert!((s.ooo_fraction - 0.25).abs() < 1e-15);
    }

    #[test]
    fn build_is_repeatable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let w = window_from(&rows);
        let buf = ReorderBuffer::new(0);
        let mut builder = StateBuilder::default();
        let a = builder.build(&w, &buf);
        let b = builder.build(&w, &buf);
        assert_eq!(a, b);
        assert_eq!(a, build_state(&w, &buf));
    }
}
