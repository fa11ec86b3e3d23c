//! Run metrics, computed from the tick log alone.

use serde::{Deserialize, Serialize};

use crate::episode::TickRecord;

/// Measurement spans around each drift tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftEval {
    /// Ticks on each side of the drift.
    pub horizon: i64,
    /// Post-drift ticks ignored before the post span starts counting.
    pub skip: i64,
}

impl Default for DriftEval {
    fn default() -> Self {
        Self { horizon: 2000, skip: 100 }
    }
}

/// Aggregates over one span of ticks. Only post-warm-up ticks count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub ticks: u64,
    pub accuracy: f64,
    pub avg_window: f64,
    pub compute_cost_ms: f64,
    /// `None` when no drift event has both spans populated.
    pub drift_robustness: Option<f64>,
    /// Mean `|w_t - w_{t-1}|` over consecutive counted ticks.
    pub stability: f64,
    pub latency_ms: f64,
}

/// Whole-run metrics plus one snapshot per evaluation interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub overall: RunMetrics,
    /// `(last tick index of the interval, metrics over that interval)`.
    pub intervals: Vec<(u64, RunMetrics)>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0u64), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn accuracy<'a>(ticks: impl Iterator<Item = &'a TickRecord>) -> Option<f64> {
    let (hit, n) = ticks.fold((0u64, 0u64), |(h, n), t| (h + u64::from(t.correct), n + 1));
    (n > 0).then(|| hit as f64 / n as f64)
}

/// Mean over drift events of (post accuracy - pre accuracy). Pre covers
/// timestamps `[d - K, d)`, post `[d + skip, d + K)`. Events missing either
/// span are left out; `None` if none remain.
pub fn drift_split_metrics(ticks: &[TickRecord], drift_ticks: &[i64], eval: DriftEval) -> Option<f64> {
    let counted = || ticks.iter().filter(|t| !t.warmup);
    let deltas: Vec<f64> = drift_ticks
        .iter()
        .filter_map(|&d| {
            let pre = accuracy(counted().filter(|t| t.timestamp >= d - eval.horizon && t.timestamp < d))?;
            let post = accuracy(counted().filter(|t| t.timestamp >= d + eval.skip && t.timestamp < d + eval.horizon))?;
            Some(post - pre)
        })
        .collect();
    (!deltas.is_empty()).then(|| mean(deltas.into_iter()))
}

/// Metrics over `ticks` (already in tick order).
pub fn compute_metrics(ticks: &[TickRecord], drift_ticks: &[i64], eval: DriftEval) -> RunMetrics {
    let counted: Vec<&TickRecord> = ticks.iter().filter(|t| !t.warmup).collect();
    let stability = if counted.len() < 2 {
        0.0
    } else {
        mean(counted.windows(2).map(|p| p[1].window.abs_diff(p[0].window) as f64))
    };
    RunMetrics {
        ticks: counted.len() as u64,
        accuracy: accuracy(counted.iter().copied()).unwrap_or(0.0),
        avg_window: mean(counted.iter().map(|t| t.window as f64)),
        compute_cost_ms: mean(counted.iter().map(|t| t.cost_ms)),
        drift_robustness: drift_split_metrics(ticks, drift_ticks, eval),
        stability,
        latency_ms: mean(counted.iter().map(|t| t.latency_ms)),
    }
}

/// Overall metrics and snapshots every `interval` ticks (by tick index; a
/// trailing partial interval is kept). Interval robustness uses the drift
/// events whose tick falls inside the interval's timestamp range.
pub fn metric_series(ticks: &[TickRecord], drift_ticks: &[i64], eval: DriftEval, interval: u64) -> MetricSeries {
    let overall = compute_metrics(ticks, drift_ticks, eval);
    let mut intervals = Vec::new();
    if interval > 0 {
        for chunk in ticks.chunks(interval as usize) {
            let (lo, hi) = (chunk[0].timestamp, chunk[chunk.len() - 1].timestamp);
            let inside: Vec<i64> = drift_ticks.iter().copied().filter(|d| (lo..=hi).contains(d)).collect();
            let mut m = compute_metrics(chunk, &[], eval);
            // spans may reach outside the chunk
            m.drift_robustness = drift_split_metrics(ticks, &inside, eval);
            intervals.push((chunk[chunk.len() - 1].tick, m));
        }
    }
    MetricSeries { overall, intervals }
}
