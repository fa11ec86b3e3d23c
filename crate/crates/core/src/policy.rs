//! The interface every window-size policy implements.

use crate::agent::AgentError;
use crate::stream::StreamEvent;

/// What a policy sees when asked for the next window size.
#[derive(Debug, Clone, Copy)]
pub struct TickContext<'a> {
    /// Decision index (counts labeled ticks after warm-up).
    pub tick: u64,
    /// Normalized state, present iff the policy `needs_state`.
    pub state: Option<&'a [f64]>,
}

/// Per-decision values logged alongside each tick, when the policy has them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicyDiagnostics {
    pub epsilon: Option<f64>,
    /// Mean |TD error| of the most recent gradient step.
    pub td_error: Option<f64>,
}

pub trait WindowPolicy {
    fn name(&self) -> &str;

    /// Whether `choose` needs the state vector (it is expensive to build).
    fn needs_state(&self) -> bool {
        false
    }

    /// Called for every released event, labeled or not, in timestamp order.
    fn observe(&mut self, _event: &StreamEvent) {}

    /// Window size to use for this tick.
    fn choose(&mut self, ctx: &TickContext<'_>) -> Result<usize, AgentError>;

    /// Reward for the most recent `choose`.
    fn feedback(&mut self, _reward: f64) -> Result<(), AgentError> {
        Ok(())
    }

    fn diagnostics(&self) -> PolicyDiagnostics {
        PolicyDiagnostics::default()
    }
}
