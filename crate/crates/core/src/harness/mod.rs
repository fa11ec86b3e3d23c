//! Experiment runner: configs, seeded runs, metrics and reports.

mod config;
mod metrics;
mod report;

pub use config::{
    Ablation, ClassifierConfig, ConfigError, CsvStream, FixedConfig, LoopConfig, Method, OutputConfig, RunConfig,
    StreamConfig, SyntheticStream,
};
pub use metrics::{compute_metrics, drift_split_metrics, metric_series, DriftEval, MetricSeries, RunMetrics};
pub use report::{aggregate_csv, markdown_report, mean_std, parse_aggregate_csv, per_seed_csv, AggregateRow, COLUMNS};

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::{Agent, AgentError};
use crate::baselines::{streamx_config, AdwinError, AdwinWindowPolicy, FixedPolicy};
use crate::classifier::SoftmaxClassifier;
use crate::episode::{run_episode, EpisodeConfig, EpisodeError, EpisodeOutput, TickRecord};
use crate::policy::WindowPolicy;
use crate::stream::StreamError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("{method} seed {seed}: {source}")]
    Episode {
        method: String,
        seed: u64,
        #[source]
        source: EpisodeError,
    },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Adwin(#[from] AdwinError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
    #[error("nothing to report")]
    NothingToReport,
}

impl HarnessError {
    /// 1 for configuration problems, 2 for anything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// One (method, seed) episode with its metrics.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub label: String,
    pub method: Method,
    pub seed: u64,
    pub series: MetricSeries,
    pub retrains: u64,
    pub late_events: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub runs: Vec<SeedRun>,
    pub rows: Vec<AggregateRow>,
}

impl RunOutput {
    pub fn row(&self, label: &str) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.method == label)
    }
}

/// Runs a single episode of `method` under `seed`.
pub fn run_episode_for(cfg: &RunConfig, method: Method, seed: u64) -> Result<EpisodeOutput, HarnessError> {
    let (events, dims) = cfg.stream.load(seed)?;
    let lp = cfg.effective_loop();
    let mut agent_cfg = cfg.effective_agent();
    let mut features = lp.features;
    if method == Method::StreamX {
        (agent_cfg, features) = streamx_config(&agent_cfg);
    }
    let ecfg = EpisodeConfig {
        classes: cfg.stream.classes(),
        warmup_events: lp.warmup_events,
        warmup_window: lp.warmup_window,
        max_window: agent_cfg.actions.max().max(cfg.fixed.window).max(lp.warmup_window),
        reorder_horizon: lp.reorder_horizon,
        feature_capacity: lp.feature_capacity,
        entropy_bins: lp.entropy_bins,
        features,
        reward: lp.reward,
        timing: lp.timing,
        proxy_ms_per_event: lp.proxy_ms_per_event,
        retrain_every: lp.retrain_every,
        retrain_span: lp.retrain_span,
        retrain_epochs: lp.retrain_epochs,
        seed,
    };
    let run_length = events.iter().filter(|e| e.label.is_some()).count() as u64;
    let mut policy: Box<dyn WindowPolicy> = match method {
        Method::RlWindow | Method::StreamX => {
            let agent = Agent::new(agent_cfg, features.len(dims), run_length.saturating_sub(lp.warmup_events as u64).max(1), seed)?;
            Box::new(agent.named(method.as_str()))
        }
        Method::Fixed => Box::new(FixedPolicy::new(cfg.fixed.window)),
        Method::Adwin => Box::new(AdwinWindowPolicy::new(dims, agent_cfg.actions.clone(), cfg.adwin)?),
    };
    let mut clf = if cfg.classifier.standardize {
        SoftmaxClassifier::standardized(dims, ecfg.classes, cfg.classifier.lr)
    } else {
        SoftmaxClassifier::new(dims, ecfg.classes, cfg.classifier.lr)
    };
    run_episode(events, dims, policy.as_mut(), &mut clf, &ecfg).map_err(|source| HarnessError::Episode {
        method: method.as_str().into(),
        seed,
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Tick log as CSV (empty fields for absent epsilon / TD error).
pub fn ticks_csv(ticks: &[TickRecord]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in ticks {
        w.serialize(t).map_err(|e| HarnessError::Report(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))
}

/// Parses a tick log written by [`ticks_csv`].
pub fn parse_ticks_csv(text: &str) -> Result<Vec<TickRecord>, HarnessError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Report(e.to_string()))
}

fn execute(cfg: &RunConfig, labels: &[(String, Method)], out_dir: Option<&Path>) -> Result<RunOutput, HarnessError> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    let drift_ticks = cfg.stream.drift_ticks();
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for (label, method) in labels {
        let start = runs.len();
        for &seed in &seeds {
            let out = match run_episode_for(cfg, *method, seed) {
                Ok(out) => out,
                Err(e) => {
                    if let Some(dir) = out_dir {
                        // completed seeds are already on disk
                        let _ = fs::write(dir.join(format!("error_{label}_{seed}.log")), format!("{e}\n"));
                    }
                    return Err(e);
                }
            };
            let series = metric_series(&out.ticks, &drift_ticks, cfg.drift_eval, cfg.output.eval_interval);
            if let Some(dir) = out_dir {
                write(&dir.join(format!("metrics_{label}_{seed}.csv")), &per_seed_csv(&series)?)?;
                if cfg.output.ticks {
                    write(&dir.join(format!("ticks_{label}_{seed}.csv")), &ticks_csv(&out.ticks)?)?;
                }
            }
            runs.push(SeedRun {
                label: label.clone(),
                method: *method,
                seed,
                series,
                retrains: out.retrains,
                late_events: out.late_events,
            });
        }
        let ms: Vec<&RunMetrics> = runs[start..].iter().map(|r| &r.series.overall).collect();
        rows.push(AggregateRow::from_runs(label, &cfg.name, &ms));
    }
    if let Some(dir) = out_dir {
        write(&dir.join("aggregate.csv"), &aggregate_csv(&rows)?)?;
        write(&dir.join("report.md"), &markdown_report(&cfg.name, &rows)?)?;
    }
    Ok(RunOutput { runs, rows })
}

/// Every configured method over every seed (seeds in ascending order).
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput, HarnessError> {
    let labels: Vec<(String, Method)> = cfg.methods.iter().map(|m| (m.as_str().to_string(), *m)).collect();
    run_labeled(cfg, &labels, out_dir)
}

fn run_labeled(cfg: &RunConfig, labels: &[(String, Method)], out_dir: Option<&Path>) -> Result<RunOutput, HarnessError> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems).into());
    }
    execute(cfg, labels, out_dir)
}

pub const ABLATION_NAMES: [&str; 5] = [
    "full",
    "without-dueling",
    "without-prioritized-replay",
    "without-spectral-features",
    "without-stability-penalty",
];

/// The base config plus one variant per single disabled component.
pub fn ablation_suite(base: &RunConfig) -> Vec<(&'static str, RunConfig)> {
    let full = RunConfig {
        methods: vec![Method::RlWindow],
        ablation: Ablation::default(),
        ..base.clone()
    };
    let variant = |f: fn(&mut Ablation)| {
        let mut c = full.clone();
        f(&mut c.ablation);
        c
    };
    vec![
        (ABLATION_NAMES[0], full.clone()),
        (ABLATION_NAMES[1], variant(|a| a.dueling = false)),
        (ABLATION_NAMES[2], variant(|a| a.prioritized = false)),
        (ABLATION_NAMES[3], variant(|a| a.spectral = false)),
        (ABLATION_NAMES[4], variant(|a| a.stability_penalty = false)),
    ]
}

/// Runs the selected ablation variants (all when `only` is empty) with
/// RL-Window; rows are labeled by variant name.
pub fn run_ablation(base: &RunConfig, only: &[&str], out_dir: Option<&Path>) -> Result<RunOutput, HarnessError> {
    let mut all = RunOutput {
        runs: Vec::new(),
        rows: Vec::new(),
    };
    for (name, cfg) in ablation_suite(base) {
        if !only.is_empty() && !only.contains(&name) {
            continue;
        }
        let out = run_labeled(&cfg, &[(name.to_string(), Method::RlWindow)], None)?;
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            for r in &out.runs {
                write(&dir.join(format!("metrics_{}_{}.csv", r.label, r.seed)), &per_seed_csv(&r.series)?)?;
            }
        }
        all.runs.extend(out.runs);
        all.rows.extend(out.rows);
    }
    if let Some(dir) = out_dir {
        write(&dir.join("aggregate.csv"), &aggregate_csv(&all.rows)?)?;
        write(&dir.join("report.md"), &markdown_report(&format!("{} ablation", base.name), &all.rows)?)?;
    }
    Ok(all)
}

/// Merges aggregate tables into one report; returns the output paths.
pub fn report(inputs: &[PathBuf], out_dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    let mut rows = Vec::new();
    for p in inputs {
        let text = fs::read_to_string(p).map_err(|source| HarnessError::Io {
            path: p.display().to_string(),
            source,
        })?;
        rows.extend(parse_aggregate_csv(&text)?);
    }
    let csv = aggregate_csv(&rows)?;
    let md = markdown_report("Comparison", &rows)?;
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let (a, b) = (out_dir.join("aggregate.csv"), out_dir.join("report.md"));
    write(&a, &csv)?;
    write(&b, &md)?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig::from_toml(
            r#"
            name = "small"
            seeds = [2, 1]
            methods = ["fixed", "adwin"]
            [stream]
            kind = "synthetic"
            dims = 2
            length = 3000
            classes = 2
            [stream.drift]
            period = 1500
            affected_dims = [0, 1]
            mean_delta = 3.0
            [drift_eval]
            horizon = 500
            skip = 50
            [output]
            eval_interval = 1000
            "#,
            None,
        )
        .unwrap()
    }

    #[test]
    fn fixed_and_adwin_rows() {
        let out = run(&small(), None).unwrap();
        assert_eq!(out.rows.len(), 2);
        let fixed = out.row("fixed").unwrap();
        assert_eq!(fixed.mean("avg_window"), Some(100.0));
        assert_eq!(fixed.mean("stability"), Some(0.0));
        assert!(fixed.mean("drift_robustness").is_some());
        let seeds: Vec<u64> = out.runs.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![1, 2, 1, 2]);
        assert_eq!(out.runs[0].series.intervals.len(), 3);
    }

    #[test]
    fn ablation_variants_differ_in_one_flag() {
        let suite = ablation_suite(&small());
        assert_eq!(suite.len(), 5);
        let base = suite[0].1.ablation;
        assert_eq!(base, Ablation::default());
        for (_, c) in &suite[1..] {
            let a = c.ablation;
            let changed = [a.dueling != base.dueling, a.prioritized != base.prioritized, a.spectral != base.spectral, a.stability_penalty != base.stability_penalty];
            assert_eq!(changed.iter().filter(|&&x| x).count(), 1);
            assert_eq!(c.methods, vec![Method::RlWindow]);
        }
        assert_eq!(suite[4].1.effective_loop().reward.stability, 0.0);
        assert_eq!(suite[3].1.effective_loop().features.len(2), suite[0].1.effective_loop().features.len(2) - 2);
    }

    #[test]
    fn exit_codes() {
        let e: HarnessError = ConfigError::Invalid(vec!["x".into()]).into();
        assert_eq!(e.exit_code(), 1);
        assert_eq!(HarnessError::NothingToReport.exit_code(), 2);
    }
}
