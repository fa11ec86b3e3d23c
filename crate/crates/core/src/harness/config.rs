//! TOML run configuration.
//!
//! ```toml
//! name = "drift-benchmark"
//! seeds = [1, 2, 3, 4, 5]
//! methods = ["rl-window", "fixed", "adwin", "stream-x"]
//!
//! [stream]
//! kind = "synthetic"
//! dims = 3
//! length = 60000
//! classes = 3
//! [stream.drift]
//! period = 10000
//! affected_dims = [0, 1, 2]
//! mean_delta = 3.0
//!
//! [agent]
//! preset = "compact"
//! train_every = 4
//! ```
//!
//! Every table is optional except `[stream]`; omitted keys take defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::DriftEval;
use crate::agent::{AgentConfig, RewardWeights};
use crate::baselines::AdwinConfig;
use crate::episode::TimingMode;
use crate::features::FeatureSet;
use crate::stream::{CsvSchema, DriftSpec, StreamEvent, StreamError, SynthParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Window-selection methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RlWindow,
    Fixed,
    Adwin,
    StreamX,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::RlWindow => "rl-window",
            Method::Fixed => "fixed",
            Method::Adwin => "adwin",
            Method::StreamX => "stream-x",
        }
    }

    pub fn uses_agent(self) -> bool {
        matches!(self, Method::RlWindow | Method::StreamX)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Method::RlWindow, Method::Fixed, Method::Adwin, Method::StreamX]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticStream {
    pub dims: usize,
    pub length: usize,
    pub classes: usize,
    #[serde(default)]
    pub drift: Option<DriftSpec>,
    #[serde(default = "defaults::mean_spread")]
    pub mean_spread: f64,
    #[serde(default = "defaults::noise_std")]
    pub noise_std: (f64, f64),
    #[serde(default = "defaults::amplitude")]
    pub amplitude: (f64, f64),
    #[serde(default = "defaults::sine_period")]
    pub sine_period: (usize, usize),
    #[serde(default = "defaults::segment_len")]
    pub segment_len: (usize, usize),
    /// Added to the run seed to seed the generator.
    #[serde(default)]
    pub seed_offset: u64,
}

mod defaults {
    use crate::stream::SynthParams;

    fn base() -> SynthParams {
        SynthParams::new(1, 1, 2, None, 0)
    }
    pub fn mean_spread() -> f64 {
        base().mean_spread
    }
    pub fn noise_std() -> (f64, f64) {
        base().noise_std
    }
    pub fn amplitude() -> (f64, f64) {
        base().amplitude
    }
    pub fn sine_period() -> (usize, usize) {
        base().sine_period
    }
    pub fn segment_len() -> (usize, usize) {
        base().segment_len
    }
}

impl SyntheticStream {
    pub fn params(&self, seed: u64) -> SynthParams {
        SynthParams {
            mean_spread: self.mean_spread,
            noise_std: self.noise_std,
            amplitude: self.amplitude,
            sine_period: self.sine_period,
            segment_len: self.segment_len,
            ..SynthParams::new(self.dims, self.length, self.classes, self.drift.clone(), seed.wrapping_add(self.seed_offset))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvStream {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub schema: CsvSchema,
    pub classes: usize,
    /// Known drift timestamps, if any, for the robustness metric.
    #[serde(default)]
    pub drift_ticks: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StreamConfig {
    Synthetic(SyntheticStream),
    Csv(CsvStream),
}

impl StreamConfig {
    pub fn classes(&self) -> usize {
        match self {
            StreamConfig::Synthetic(s) => s.classes,
            StreamConfig::Csv(c) => c.classes,
        }
    }

    /// Events for one seed (CSV streams ignore the seed) and their dimension.
    pub fn load(&self, seed: u64) -> Result<(Vec<StreamEvent>, usize), StreamError> {
        match self {
            StreamConfig::Synthetic(s) => Ok((crate::stream::synth_stream(&s.params(seed))?, s.dims)),
            StreamConfig::Csv(c) => {
                let schema = CsvSchema {
                    classes: Some(c.classes),
                    ..c.schema.clone()
                };
                let events = crate::stream::load_csv_stream(&c.path, &schema)?;
                Ok((events, c.schema.values.len()))
            }
        }
    }

    pub fn drift_ticks(&self) -> Vec<i64> {
        match self {
            StreamConfig::Synthetic(s) => s.drift.as_ref().map(|d| d.drift_ticks(s.length)).unwrap_or_default(),
            StreamConfig::Csv(c) => c.drift_ticks.clone(),
        }
    }
}

/// Episode-loop settings (classes and seeds come from elsewhere).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub warmup_events: usize,
    pub warmup_window: usize,
    pub reorder_horizon: i64,
    pub feature_capacity: usize,
    pub entropy_bins: usize,
    pub features: FeatureSet,
    pub reward: RewardWeights,
    pub timing: TimingMode,
    pub proxy_ms_per_event: f64,
    pub retrain_every: usize,
    pub retrain_span: usize,
    pub retrain_epochs: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        let e = crate::episode::EpisodeConfig::default();
        Self {
            warmup_events: e.warmup_events,
            warmup_window: e.warmup_window,
            reorder_horizon: e.reorder_horizon,
            feature_capacity: e.feature_capacity,
            entropy_bins: e.entropy_bins,
            features: e.features,
            reward: e.reward,
            timing: e.timing,
            proxy_ms_per_event: e.proxy_ms_per_event,
            retrain_every: e.retrain_every,
            retrain_span: e.retrain_span,
            retrain_epochs: e.retrain_epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub lr: f64,
    /// Running z-scoring of summaries before the linear model.
    pub standardize: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            lr: crate::classifier::SoftmaxClassifier::DEFAULT_LR,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedConfig {
    pub window: usize,
}

impl Default for FixedConfig {
    fn default() -> Self {
        Self {
            window: crate::baselines::FixedPolicy::DEFAULT_WINDOW,
        }
    }
}

/// Components that can be switched off for the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub dueling: bool,
    pub prioritized: bool,
    pub spectral: bool,
    pub stability_penalty: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            dueling: true,
            prioritized: true,
            spectral: true,
            stability_penalty: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write the per-tick log for every (method, seed).
    pub ticks: bool,
    /// Ticks per evaluation snapshot.
    pub eval_interval: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            ticks: false,
            eval_interval: 10_000,
        }
    }
}

/// Raw `[agent]` table: an optional preset plus overrides of its fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct AgentTable {
    #[serde(default)]
    preset: Option<String>,
    #[serde(flatten)]
    overrides: toml::Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "defaults_top::name")]
    name: String,
    #[serde(default = "defaults_top::seeds")]
    seeds: Vec<u64>,
    #[serde(default = "defaults_top::methods")]
    methods: Vec<Method>,
    stream: StreamConfig,
    #[serde(default, rename = "loop")]
    episode: LoopConfig,
    #[serde(default)]
    agent: AgentTable,
    #[serde(default)]
    classifier: ClassifierConfig,
    #[serde(default)]
    fixed: FixedConfig,
    #[serde(default)]
    adwin: AdwinConfig,
    #[serde(default)]
    ablation: Ablation,
    #[serde(default)]
    drift_eval: DriftEval,
    #[serde(default)]
    output: OutputConfig,
}

mod defaults_top {
    use super::Method;

    pub fn name() -> String {
        "run".into()
    }
    pub fn seeds() -> Vec<u64> {
        vec![1, 2, 3, 4, 5]
    }
    pub fn methods() -> Vec<Method> {
        vec![Method::RlWindow, Method::Fixed, Method::Adwin, Method::StreamX]
    }
}

/// A fully resolved, validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub stream: StreamConfig,
    pub episode: LoopConfig,
    pub agent: AgentConfig,
    pub classifier: ClassifierConfig,
    pub fixed: FixedConfig,
    pub adwin: AdwinConfig,
    pub ablation: Ablation,
    pub drift_eval: DriftEval,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses and validates; `base_dir` anchors relative CSV paths.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut problems = Vec::new();
        let agent = match resolve_agent(&raw.agent) {
            Ok(a) => a,
            Err(msg) => {
                problems.push(msg);
                AgentConfig::default()
            }
        };
        let mut stream = raw.stream;
        if let (StreamConfig::Csv(c), Some(dir)) = (&mut stream, base_dir) {
            if c.path.is_relative() {
                c.path = dir.join(&c.path);
            }
        }
        let cfg = Self {
            name: raw.name,
            seeds: raw.seeds,
            methods: raw.methods,
            stream,
            episode: raw.episode,
            agent,
            classifier: raw.classifier,
            fixed: raw.fixed,
            adwin: raw.adwin,
            ablation: raw.ablation,
            drift_eval: raw.drift_eval,
            output: raw.output,
        };
        problems.extend(cfg.violations());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, path.parent())
    }

    /// Every violated precondition, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.seeds.is_empty() {
            v.push("seeds must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|p| p[0] == p[1]) {
            v.push("seeds must be distinct".into());
        }
        if self.methods.is_empty() {
            v.push("methods must not be empty".into());
        }
        match &self.stream {
            StreamConfig::Synthetic(s) => {
                v.extend(s.params(0).violations().into_iter().map(|m| format!("stream: {m}")));
            }
            StreamConfig::Csv(c) => {
                if c.classes < 2 {
                    v.push("stream.classes must be >= 2".into());
                }
                if c.schema.values.is_empty() {
                    v.push("stream.schema.values must list at least one column".into());
                }
                if c.schema.label.is_none() {
                    v.push("stream.schema.label is required for classification".into());
                }
            }
        }
        let e = &self.episode;
        if e.warmup_window == 0 {
            v.push("loop.warmup_window must be positive".into());
        }
        if e.reorder_horizon < 0 {
            v.push("loop.reorder_horizon must be >= 0".into());
        }
        if e.feature_capacity < 2 {
            v.push("loop.feature_capacity must be >= 2".into());
        }
        if e.entropy_bins < 2 {
            v.push("loop.entropy_bins must be >= 2".into());
        }
        if !(e.proxy_ms_per_event >= 0.0 && e.proxy_ms_per_event.is_finite()) {
            v.push("loop.proxy_ms_per_event must be finite and >= 0".into());
        }
        if e.retrain_every > 0 && e.retrain_span == 0 {
            v.push("loop.retrain_span must be positive when retraining".into());
        }
        let r = &e.reward;
        for (name, x) in [("alpha", r.alpha), ("beta", r.beta), ("stability", r.stability)] {
            if !(x >= 0.0 && x.is_finite()) {
                v.push(format!("loop.reward.{name} must be finite and >= 0, got {x}"));
            }
        }
        if self.methods.iter().any(|m| m.uses_agent()) {
            v.extend(self.agent.violations());
        }
        if !(self.classifier.lr > 0.0 && self.classifier.lr.is_finite()) {
            v.push(format!("classifier.lr must be positive, got {}", self.classifier.lr));
        }
        if self.fixed.window == 0 {
            v.push("fixed.window must be positive".into());
        }
        if !(self.adwin.delta > 0.0 && self.adwin.delta < 1.0) {
            v.push(format!("adwin.delta must be in (0, 1), got {}", self.adwin.delta));
        }
        if self.adwin.max_buckets < 2 {
            v.push("adwin.max_buckets must be >= 2".into());
        }
        if self.drift_eval.horizon <= 0 {
            v.push("drift_eval.horizon must be positive".into());
        }
        if self.drift_eval.skip < 0 || self.drift_eval.skip >= self.drift_eval.horizon {
            v.push("drift_eval.skip must be in [0, horizon)".into());
        }
        v
    }

    /// Agent settings after the ablation switches.
    pub fn effective_agent(&self) -> AgentConfig {
        AgentConfig {
            dueling: self.agent.dueling && self.ablation.dueling,
            prioritized: self.agent.prioritized && self.ablation.prioritized,
            ..self.agent.clone()
        }
    }

    /// Loop settings after the ablation switches.
    pub fn effective_loop(&self) -> LoopConfig {
        let mut e = self.episode.clone();
        if !self.ablation.spectral && e.features == FeatureSet::Full {
            e.features = FeatureSet::NoSpectral;
        }
        if !self.ablation.stability_penalty {
            e.reward.stability = 0.0;
        }
        e
    }
}

fn resolve_agent(table: &AgentTable) -> Result<AgentConfig, String> {
    let base = match &table.preset {
        None => AgentConfig::default(),
        Some(p) => AgentConfig::preset(p).ok_or_else(|| format!("agent.preset: unknown preset '{p}'"))?,
    };
    if table.overrides.is_empty() {
        return Ok(base);
    }
    let mut merged = toml::Table::try_from(&base).map_err(|e| format!("agent: {e}"))?;
    for (k, v) in &table.overrides {
        merged.insert(k.clone(), v.clone());
    }
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| format!("agent: {}", e.message()))
}
