//! The per-tick interaction loop shared by every policy.
//!
//! For each event released by the reorder buffer:
//!   1. push it into the feature window and history; let the policy observe it;
//!   2. if labeled: pick the window (forced during warm-up), summarize the
//!      last `w` events, predict, then learn (prequential);
//!   3. reward and feedback (post warm-up only);
//!   4. every `retrain_every` labeled ticks, retrain the classifier on the
//!      most recent `retrain_span` labeled ticks using their logged windows.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{compute_reward, AgentError, RewardWeights};
use crate::classifier::{summarize, Classifier, WindowSummary};
use crate::features::{FeatureError, FeatureNormalizer, FeatureSet, FeatureWindow, StateBuilder, DEFAULT_ENTROPY_BINS};
use crate::policy::{TickContext, WindowPolicy};
use crate::stream::{ReorderBuffer, StreamEvent};

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("event at timestamp {timestamp} has {found} values, expected {expected}")]
    Dimension { timestamp: i64, expected: usize, found: usize },
    #[error("label {label} at timestamp {timestamp} out of range for {classes} classes")]
    Label { timestamp: i64, label: usize, classes: usize },
    #[error("policy failed at tick {tick}: {source}")]
    Policy { tick: u64, source: AgentError },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// How per-tick compute cost enters the reward and the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    /// `cost = w * ms_per_event`; latency reported equal to cost. Reproducible.
    #[default]
    Proxy,
    /// Wall-clock time of state building + classification; latency is the
    /// whole tick. Not reproducible across machines.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub classes: usize,
    /// Events that must be seen before the policy is consulted.
    pub warmup_events: usize,
    pub warmup_window: usize,
    /// Largest window the policy may request; bounds the retained history.
    pub max_window: usize,
    pub reorder_horizon: i64,
    pub feature_capacity: usize,
    pub entropy_bins: usize,
    pub features: FeatureSet,
    pub reward: RewardWeights,
    pub timing: TimingMode,
    pub proxy_ms_per_event: f64,
    /// Labeled ticks between classifier retrains; 0 disables retraining.
    pub retrain_every: usize,
    pub retrain_span: usize,
    pub retrain_epochs: usize,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            classes: 2,
            warmup_events: 200,
            warmup_window: 50,
            max_window: 200,
            reorder_horizon: ReorderBuffer::DEFAULT_HORIZON,
            feature_capacity: FeatureWindow::DEFAULT_CAPACITY,
            entropy_bins: DEFAULT_ENTROPY_BINS,
            features: FeatureSet::Full,
            reward: RewardWeights::default(),
            timing: TimingMode::Proxy,
            proxy_ms_per_event: 0.01,
            retrain_every: 5000,
            retrain_span: 10_000,
            retrain_epochs: 3,
            seed: 0,
        }
    }
}

/// One labeled tick. The tick log is the source of truth for every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Labeled-tick index, warm-up included.
    pub tick: u64,
    pub timestamp: i64,
    pub warmup: bool,
    pub window: usize,
    pub label: usize,
    pub predicted: usize,
    pub correct: bool,
    pub logloss: f64,
    pub reward: f64,
    pub cost_ms: f64,
    pub latency_ms: f64,
    pub epsilon: Option<f64>,
    pub td_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeOutput {
    pub ticks: Vec<TickRecord>,
    pub events: u64,
    pub late_events: u64,
    pub retrains: u64,
}

struct Loop<'a> {
    cfg: &'a EpisodeConfig,
    dims: usize,
    policy: &'a mut dyn WindowPolicy,
    classifier: &'a mut dyn Classifier,
    window: FeatureWindow,
    builder: StateBuilder,
    normalizer: FeatureNormalizer,
    /// Released values; `history[0]` has absolute index `base`.
    history: VecDeque<Vec<f64>>,
    base: u64,
    /// (absolute event index, window, label) of recent labeled ticks.
    labeled: VecDeque<(u64, usize, usize)>,
    max_window: usize,
    seen: u64,
    decisions: u64,
    w_prev: usize,
    out: EpisodeOutput,
}

impl Loop<'_> {
    fn summary_at(&self, idx: u64, w: usize) -> WindowSummary {
        let end = (idx - self.base) as usize + 1;
        let start = end.saturating_sub(w);
        summarize(self.history.range(start..end).map(|v| v.as_slice()), self.dims)
    }

    fn process(&mut self, event: StreamEvent, reorder: &ReorderBuffer) -> Result<(), EpisodeError> {
        let started = Instant::now();
        if event.values.len() != self.dims {
            return Err(EpisodeError::Dimension {
                timestamp: event.timestamp,
                expected: self.dims,
                found: event.values.len(),
            });
        }
        self.window.push(&event.values)?;
        self.policy.observe(&event);
        let idx = self.base + self.history.len() as u64;
        self.history.push_back(event.values);
        self.seen += 1;

        let Some(label) = event.label else {
            self.trim();
            return Ok(());
        };
        if label >= self.cfg.classes {
            return Err(EpisodeError::Label {
                timestamp: event.timestamp,
                label,
                classes: self.cfg.classes,
            });
        }
        let tick = self.out.ticks.len() as u64;
        let warmup = (self.seen as usize) < self.cfg.warmup_events;
        let mut compute = 0.0;
        let w = if warmup {
            self.cfg.warmup_window
        } else {
            let t0 = Instant::now();
            let state = if self.policy.needs_state() {
                let full = self.builder.build(&self.window, reorder);
                Some(self.normalizer.normalize(&self.cfg.features.project(&full))?)
            } else {
                None
            };
            compute += t0.elapsed().as_secs_f64() * 1e3;
            let ctx = TickContext {
                tick: self.decisions,
                state: state.as_deref(),
            };
            self.policy
                .choose(&ctx)
                .map_err(|source| EpisodeError::Policy { tick, source })?
        };

        let t0 = Instant::now();
        let summary = self.summary_at(idx, w);
        let pred = self.classifier.predict(&summary);
        compute += t0.elapsed().as_secs_f64() * 1e3;
        let correct = pred.class == label;
        let logloss = pred.logloss(label);
        self.classifier.learn(&summary, label);

        let cost_ms = match self.cfg.timing {
            TimingMode::Proxy => w as f64 * self.cfg.proxy_ms_per_event,
            TimingMode::Measured => compute,
        };
        let reward = compute_reward(correct, logloss, cost_ms, w, self.w_prev, &self.cfg.reward);
        let diag = if warmup {
            Default::default()
        } else {
            self.policy
                .feedback(reward)
                .map_err(|source| EpisodeError::Policy { tick, source })?;
            self.decisions += 1;
            self.policy.diagnostics()
        };
        self.w_prev = w;

        self.max_window = self.max_window.max(w);
        self.labeled.push_back((idx, w, label));
        while self.labeled.len() > self.cfg.retrain_span {
            self.labeled.pop_front();
        }
        if self.cfg.retrain_every > 0 && (tick + 1) % self.cfg.retrain_every as u64 == 0 {
            self.retrain();
        }
        self.trim();

        let latency_ms = match self.cfg.timing {
            TimingMode::Proxy => cost_ms,
            TimingMode::Measured => started.elapsed().as_secs_f64() * 1e3,
        };
        self.out.ticks.push(TickRecord {
            tick,
            timestamp: event.timestamp,
            warmup,
            window: w,
            label,
            predicted: pred.class,
            correct,
            logloss,
            reward,
            cost_ms,
            latency_ms,
            epsilon: diag.epsilon,
            td_error: diag.td_error,
        });
        Ok(())
    }

    fn retrain(&mut self) {
        let data: Vec<(WindowSummary, usize)> = self
            .labeled
            .iter()
            .map(|&(idx, w, label)| (self.summary_at(idx, w), label))
            .collect();
        let seed = self
            .cfg
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.out.retrains);
        self.classifier.retrain(&data, self.cfg.retrain_epochs, seed);
        self.out.retrains += 1;
    }

    /// Drops history no summary can reach any more.
    fn trim(&mut self) {
        let newest = self.base + self.history.len() as u64;
        let oldest_needed = self.labeled.front().map_or(newest, |&(idx, _, _)| idx.min(newest));
        let keep_from = oldest_needed.saturating_sub(self.max_window as u64);
        while self.base < keep_from {
            self.history.pop_front();
            self.base += 1;
        }
    }
}

/// Runs one pass over `events`. Deterministic for a fixed config, policy
/// state and classifier state (under proxy timing).
pub fn run_episode<I>(
    events: I,
    dims: usize,
    policy: &mut dyn WindowPolicy,
    classifier: &mut dyn Classifier,
    cfg: &EpisodeConfig,
) -> Result<EpisodeOutput, EpisodeError>
where
    I: IntoIterator<Item = StreamEvent>,
{
    let mut reorder = ReorderBuffer::new(cfg.reorder_horizon);
    let mut lp = Loop {
        cfg,
        dims,
        policy,
        classifier,
        window: FeatureWindow::new(cfg.feature_capacity, dims),
        builder: StateBuilder::new(cfg.entropy_bins),
        normalizer: FeatureNormalizer::new(cfg.features.len(dims)),
        history: VecDeque::new(),
        base: 0,
        labeled: VecDeque::new(),
        max_window: cfg.max_window.max(cfg.warmup_window),
        seen: 0,
        decisions: 0,
        w_prev: cfg.warmup_window,
        out: EpisodeOutput::default(),
    };
    for ev in events {
        for released in reorder.push(ev) {
            lp.process(released, &reorder)?;
        }
    }
    for released in reorder.flush() {
        lp.process(released, &reorder)?;
    }
    let mut out = lp.out;
    out.events = lp.seen;
    out.late_events = reorder.late_count();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{ActionSet, Agent, AgentConfig};
    use crate::baselines::FixedPolicy;
    use crate::classifier::SoftmaxClassifier;
    use crate::nn::{NetworkConfig, QNetwork};
    use crate::schedule::LinearSchedule;
    use crate::stream::{synth_stream, DriftSpec, SynthParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stream(n: usize, seed: u64) -> Vec<StreamEvent> {
        synth_stream(&SynthParams::new(3, n, 3, Some(DriftSpec::default()), seed)).unwrap()
    }

    fn cfg() -> EpisodeConfig {
        EpisodeConfig {
            classes: 3,
            retrain_every: 500,
            retrain_span: 1000,
            ..EpisodeConfig::default()
        }
    }

    #[test]
    fn empty_stream_gives_empty_output() {
        let mut p = FixedPolicy::default();
        let mut c = SoftmaxClassifier::new(3, 3, 0.01);
        let out = run_episode(Vec::new(), 3, &mut p, &mut c, &cfg()).unwrap();
        assert!(out.ticks.is_empty());
        assert_eq!(out.events, 0);
    }

    #[test]
    fn warmup_then_fixed_window() {
        let mut p = FixedPolicy::default();
        let mut c = SoftmaxClassifier::new(3, 3, 0.01);
        let out = run_episode(stream(1500, 1), 3, &mut p, &mut c, &cfg()).unwrap();
        assert_eq!(out.ticks.len(), 1500);
        assert_eq!(out.retrains, 3);
        for t in &out.ticks {
            assert_eq!(t.warmup, t.tick < 199);
            assert_eq!(t.window, if t.warmup { 50 } else { 100 });
            assert_eq!(t.cost_ms, t.window as f64 * 0.01);
        }
        // the first decision pays for leaving the warm-up window
        let first = &out.ticks[199];
        assert!((first.reward - (f64::from(u8::from(first.correct)) - 0.01 - 0.005 * 50.0)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut p = FixedPolicy::default();
        let mut c = SoftmaxClassifier::new(3, 3, 0.01);
        let events = vec![StreamEvent::new(0, vec![1.0, 2.0], Some(0))];
        assert!(matches!(
            run_episode(events, 3, &mut p, &mut c, &cfg()),
            Err(EpisodeError::Dimension { .. })
        ));
    }

    #[test]
    fn unlabeled_events_feed_features_only() {
        let mut events = stream(600, 2);
        for e in events.iter_mut().skip(1).step_by(2) {
            e.label = None;
        }
        let mut p = FixedPolicy::new(40);
        let mut c = SoftmaxClassifier::new(3, 3, 0.01);
        let out = run_episode(events, 3, &mut p, &mut c, &cfg()).unwrap();
        assert_eq!(out.ticks.len(), 300);
        assert_eq!(out.events, 600);
    }

    #[test]
    fn forced_greedy_agent_picks_first_action() {
        let base = AgentConfig {
            hidden: vec![],
            dueling: false,
            epsilon: LinearSchedule::new(0.0, 0.0, 0),
            batch_size: 8,
            buffer_capacity: 256,
            lr: LinearSchedule::new(1e-12, 1e-12, 0),
            ..AgentConfig::default()
        };
        let width = FeatureSet::Full.len(3);
        let netcfg = NetworkConfig {
            inputs: width,
            hidden: vec![],
            actions: 10,
            dueling: false,
            batch_norm: false,
            noisy: false,
        };
        let mut net = QNetwork::new(netcfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut flat = vec![0.0; width * 10];
        flat.extend((0..10).map(|a| if a == 0 { 100.0 } else { 0.0 }));
        net.set_flat_params(&flat).unwrap();
        let mut agent = Agent::with_network(base, net, 1000, ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut c = SoftmaxClassifier::new(3, 3, 0.01);
        let out = run_episode(stream(800, 3), 3, &mut agent, &mut c, &cfg()).unwrap();
        assert!(out.ticks.iter().filter(|t| !t.warmup).all(|t| t.window == ActionSet::standard().min()));
        assert!(out.ticks.iter().filter(|t| !t.warmup).all(|t| t.epsilon == Some(0.0)));
    }

    #[test]
    fn seeded_agent_episode_repeats_exactly() {
        let go = || {
            let ac = AgentConfig {
                hidden: vec![16],
                batch_size: 16,
                buffer_capacity: 1000,
                ..AgentConfig::default()
            };
            let mut agent = Agent::new(ac, FeatureSet::Full.len(3), 1000, 9).unwrap();
            let mut c = SoftmaxClassifier::new(3, 3, 0.01);
            run_episode(stream(1200, 4), 3, &mut agent, &mut c, &cfg()).unwrap().ticks
        };
        assert_eq!(go(), go());
    }
}
