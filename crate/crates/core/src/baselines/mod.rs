//! Comparison policies: fixed window, ADWIN-driven window, and the
//! reduced-state DQN configuration.

mod adwin;

pub use adwin::{Adwin, AdwinError};

use serde::{Deserialize, Serialize};

use crate::agent::{ActionSet, AgentConfig, AgentError};
use crate::features::FeatureSet;
use crate::policy::{TickContext, WindowPolicy};
use crate::stream::StreamEvent;

/// Always the same window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPolicy {
    w: usize,
    name: String,
}

impl FixedPolicy {
    pub const DEFAULT_WINDOW: usize = 100;

    pub fn new(w: usize) -> Self {
        assert!(w > 0, "fixed window must be positive");
        Self {
            w,
            name: "fixed".into(),
        }
    }
}

impl Default for FixedPolicy {
    fn default() -> Self {
        Self::new(Self::DEFAULT_WINDOW)
    }
}

impl WindowPolicy for FixedPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&mut self, _ctx: &TickContext<'_>) -> Result<usize, AgentError> {
        Ok(self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdwinConfig {
    pub delta: f64,
    pub max_buckets: usize,
}

impl Default for AdwinConfig {
    fn default() -> Self {
        Self {
            delta: Adwin::DEFAULT_DELTA,
            max_buckets: Adwin::DEFAULT_M,
        }
    }
}

/// One detector per dimension over the raw values; the window is the
/// smallest detector width, clamped to the action range and snapped onto it.
#[derive(Debug, Clone)]
pub struct AdwinWindowPolicy {
    detectors: Vec<Adwin>,
    actions: ActionSet,
    name: String,
}

impl AdwinWindowPolicy {
    pub fn new(dims: usize, actions: ActionSet, cfg: AdwinConfig) -> Result<Self, AdwinError> {
        let detectors = (0..dims)
            .map(|_| Adwin::new(cfg.delta, cfg.max_buckets))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            detectors,
            actions,
            name: "adwin".into(),
        })
    }

    pub fn detectors(&self) -> &[Adwin] {
        &self.detectors
    }

    pub fn current(&self) -> usize {
        let min = self.detectors.iter().map(Adwin::width).min().unwrap_or(0);
        self.actions.snap(usize::try_from(min).unwrap_or(usize::MAX))
    }
}

impl WindowPolicy for AdwinWindowPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn observe(&mut self, event: &StreamEvent) {
        for (det, &v) in self.detectors.iter_mut().zip(&event.values) {
            // events are validated finite at ingestion
            det.update(v).expect("stream values are finite");
        }
    }

    fn choose(&mut self, _ctx: &TickContext<'_>) -> Result<usize, AgentError> {
        Ok(self.current())
    }
}

/// Reduced-state DQN: variances and rates only, plain head, plain-max
/// targets, uniform replay, no noisy layers. Other settings follow `base`.
pub fn streamx_config(base: &AgentConfig) -> (AgentConfig, FeatureSet) {
    let cfg = AgentConfig {
        dueling: false,
        double_dqn: false,
        prioritized: false,
        noisy: false,
        ..base.clone()
    };
    (cfg, FeatureSet::VarianceRate)
}
