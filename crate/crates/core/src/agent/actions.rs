use serde::{Deserialize, Serialize};

use super::AgentError;

/// Ordered, strictly increasing window sizes the agent chooses between.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ActionSet(Vec<usize>);

impl ActionSet {
    pub fn new(sizes: Vec<usize>) -> Result<Self, AgentError> {
        if sizes.is_empty() {
            return Err(AgentError::InvalidConfig("action set is empty".into()));
        }
        if sizes[0] == 0 {
            return Err(AgentError::InvalidConfig("window sizes must be positive".into()));
        }
        if sizes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(AgentError::InvalidConfig(format!(
                "window sizes must be strictly increasing: {sizes:?}"
            )));
        }
        Ok(Self(sizes))
    }

    /// {20, 40, ..., 200}.
    pub fn standard() -> Self {
        Self((1..=10).map(|k| 20 * k).collect())
    }

    /// {20, 40, ..., 160}.
    pub fn compact() -> Self {
        Self((1..=8).map(|k| 20 * k).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self, action: usize) -> usize {
        self.0[action]
    }

    pub fn min(&self) -> usize {
        self.0[0]
    }

    pub fn max(&self) -> usize {
        self.0[self.0.len() - 1]
    }

    /// Member nearest to `w` after clamping; ties go to the smaller size.
    pub fn snap(&self, w: usize) -> usize {
        let w = w.clamp(self.min(), self.max());
        let mut best = self.0[0];
        for &s in &self.0[1..] {
            if s.abs_diff(w) < best.abs_diff(w) {
                best = s;
            }
        }
        best
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        Self::standard()
    }
}

impl TryFrom<Vec<usize>> for ActionSet {
    type Error = AgentError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ActionSet> for Vec<usize> {
    fn from(a: ActionSet) -> Self {
        a.0
    }
}
