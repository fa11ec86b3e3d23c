use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::StreamEvent;

/// Holds events until the stream has progressed `horizon` ticks past them,
/// then releases them in timestamp order.
///
/// The watermark is `max_seen - horizon`. An arriving event older than the
/// watermark can no longer be placed in order; it is dropped and counted in
/// `late_count`.
#[derive(Debug, Clone)]
pub struct ReorderBuffer {
    horizon: i64,
    pending: BinaryHeap<Reverse<Pending>>,
    max_seen: Option<i64>,
    seq: u64,
    late_count: u64,
    reordered_count: u64,
    total_count: u64,
}

#[derive(Debug, Clone)]
struct Pending {
    timestamp: i64,
    seq: u64,
    event: StreamEvent,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.timestamp, self.seq).cmp(&(other.timestamp, other.seq))
    }
}

impl ReorderBuffer {
    /// Default horizon, in ticks.
    pub const DEFAULT_HORIZON: i64 = 10;

    pub fn new(horizon: i64) -> Self {
        assert!(horizon >= 0, "reorder horizon must be >= 0");
        Self {
            horizon,
            pending: BinaryHeap::new(),
            max_seen: None,
            seq: 0,
            late_count: 0,
            reordered_count: 0,
            total_count: 0,
        }
    }

    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    pub fn late_count(&self) -> u64 {
        self.late_count
    }

    /// Events that arrived behind a newer one but were still placed in order.
    pub fn reordered_count(&self) -> u64 {
        self.reordered_count
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// `late_count / total_count`, 0 before any event.
    pub fn ooo_fraction(&self) -> f64 {
        if self.total_count == 0 {
            0.0
        } else {
            self.late_count as f64 / self.total_count as f64
        }
    }

    fn watermark(&self) -> Option<i64> {
        self.max_seen.map(|m| m.saturating_sub(self.horizon))
    }

    /// Admits one event and returns whatever became releasable.
    pub fn push(&mut self, event: StreamEvent) -> Vec<StreamEvent> {
        self.total_count += 1;
        let ts = event.timestamp;
        if let Some(wm) = self.watermark() {
            if ts < wm {
                self.late_count += 1;
                return Vec::new();
            }
        }
        match self.max_seen {
            Some(m) if ts < m => self.reordered_count += 1,
            Some(m) if ts <= m => {}
            _ => self.max_seen = Some(ts),
        }
        self.pending.push(Reverse(Pending {
            timestamp: ts,
            seq: self.seq,
            event,
        }));
        self.seq += 1;

        let wm = self.watermark().expect("max_seen set above");
        let mut released = Vec::new();
        while let Some(Reverse(top)) = self.pending.peek() {
            if top.timestamp > wm {
                break;
            }
            let Reverse(p) = self.pending.pop().expect("peeked");
            released.push(p.event);
        }
        released
    }

    /// Releases everything still held, in order. Used at end of stream.
    pub fn flush(&mut self) -> Vec<StreamEvent> {
        let mut out = Vec::with_capacity(self.pending.len());
        while let Some(Reverse(p)) = self.pending.pop() {
            out.push(p.event);
        }
        out
    }
}
