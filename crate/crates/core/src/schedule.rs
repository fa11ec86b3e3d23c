use serde::{Deserialize, Serialize};

/// Linear ramp from `start` to `end` over `steps`, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub steps: u64,
}

impl LinearSchedule {
    pub const fn new(start: f64, end: f64, steps: u64) -> Self {
        Self { start, end, steps }
    }

    /// Value at step `t`. Exactly `start` at 0 and exactly `end` from `steps` on.
    pub fn value(&self, t: u64) -> f64 {
        if t >= self.steps {
            self.end
        } else {
            self.start + (self.end - self.start) * (t as f64 / self.steps as f64)
        }
    }

    pub fn min(&self) -> f64 {
        self.start.min(self.end)
    }

    pub fn max(&self) -> f64 {
        self.start.max(self.end)
    }
}
