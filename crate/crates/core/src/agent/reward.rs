use serde::{Deserialize, Serialize};

/// Utility term of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// 1 for a correct prediction, 0 otherwise.
    #[default]
    Binary,
    /// Negative log-loss, clamped to [-5, 0].
    LogLoss,
}

/// `r = alpha * u - beta * cost_ms - stability * |w_t - w_prev|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub stability: f64,
    pub mode: RewardMode,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.01,
            stability: 0.005,
            mode: RewardMode::Binary,
        }
    }
}

pub const LOGLOSS_CLAMP: f64 = 5.0;

pub fn compute_reward(
    correct: bool,
    logloss: f64,
    cost_ms: f64,
    w: usize,
    w_prev: usize,
    weights: &RewardWeights,
) -> f64 {
    let u = match weights.mode {
        RewardMode::Binary => f64::from(u8::from(correct)),
        RewardMode::LogLoss => (-logloss).clamp(-LOGLOSS_CLAMP, 0.0),
    };
    weights.alpha * u - weights.beta * cost_ms - weights.stability * w.abs_diff(w_prev) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let rw = RewardWeights::default();
        assert!((compute_reward(true, 0.0, 2.0, 120, 100, &rw) - 0.88).abs() < 1e-12);
        assert_eq!(compute_reward(false, 3.0, 0.0, 60, 60, &rw), 0.0);
        let ll = RewardWeights {
            mode: RewardMode::LogLoss,
            ..rw
        };
        assert_eq!(compute_reward(true, 0.0, 0.0, 60, 60, &ll), 0.0);
        assert_eq!(compute_reward(false, 40.0, 0.0, 60, 60, &ll), -5.0);
        assert!((compute_reward(false, 0.5, 0.0, 60, 40, &ll) + 0.6).abs() < 1e-12);
    }
}
