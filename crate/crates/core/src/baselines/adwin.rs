use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AdwinError {
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("invalid ADWIN parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bucket {
    sum: f64,
    count: u64,
}

/// Adaptive window over a real-valued stream (exponential-histogram variant).
///
/// Row `i` holds buckets of `2^i` values, newest at the back; every bucket in
/// row `i + 1` is older than every bucket in row `i`. When a row exceeds `M`
/// buckets its two oldest are merged into the next row.
#[derive(Debug, Clone)]
pub struct Adwin {
    delta: f64,
    max_buckets: usize,
    rows: Vec<VecDeque<Bucket>>,
    total: f64,
    width: u64,
    cuts: u64,
}

impl Default for Adwin {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DELTA, Self::DEFAULT_M).expect("default parameters are valid")
    }
}

impl Adwin {
    pub const DEFAULT_DELTA: f64 = 0.002;
    pub const DEFAULT_M: usize = 5;

    pub fn new(delta: f64, max_buckets: usize) -> Result<Self, AdwinError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AdwinError::InvalidParams(format!("delta must be in (0, 1), got {delta}")));
        }
        if max_buckets < 2 {
            return Err(AdwinError::InvalidParams(format!("M must be >= 2, got {max_buckets}")));
        }
        Ok(Self {
            delta,
            max_buckets,
            rows: Vec::new(),
            total: 0.0,
            width: 0,
            cuts: 0,
        })
    }

    /// Values currently retained.
    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn sum(&self) -> f64 {
        self.total
    }

    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    /// Oldest-bucket drops so far.
    pub fn cuts(&self) -> u64 {
        self.cuts
    }

    pub fn bucket_count(&self) -> usize {
        self.rows.iter().map(VecDeque::len).sum()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn max_row_len(&self) -> usize {
        self.rows.iter().map(VecDeque::len).max().unwrap_or(0)
    }

    /// `(sum, count)` re-aggregated from the buckets.
    pub fn bucket_totals(&self) -> (f64, u64) {
        self.rows
            .iter()
            .flatten()
            .fold((0.0, 0), |(s, c), b| (s + b.sum, c + b.count))
    }

    /// `M * (max(floor(log2(n / M)), 0) + 2)`.
    pub fn bucket_bound(n: u64, m: usize) -> usize {
        let ratio = n as f64 / m as f64;
        let rows = if ratio >= 2.0 { ratio.log2().floor() as usize } else { 0 };
        m * (rows + 2)
    }

    /// Inserts `value`, then drops oldest buckets while any split is
    /// significant. Returns whether anything was dropped and the retained width.
    pub fn update(&mut self, value: f64) -> Result<(bool, u64), AdwinError> {
        if !value.is_finite() {
            return Err(AdwinError::NonFinite(value));
        }
        self.insert(value);
        let mut dropped = false;
        while self.width > 1 && self.has_cut() {
            self.drop_oldest();
            dropped = true;
            self.cuts += 1;
        }
        Ok((dropped, self.width))
    }

    fn insert(&mut self, value: f64) {
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_back(Bucket { sum: value, count: 1 });
        self.total += value;
        self.width += 1;
        let mut i = 0;
        while self.rows[i].len() > self.max_buckets {
            let a = self.rows[i].pop_front().expect("row over capacity");
            let b = self.rows[i].pop_front().expect("row over capacity");
            if i + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[i + 1].push_back(Bucket {
                sum: a.sum + b.sum,
                count: a.count + b.count,
            });
            i += 1;
        }
    }

    fn drop_oldest(&mut self) {
        let top = self.rows.len() - 1;
        let b = self.rows[top].pop_front().expect("nonempty window");
        self.total -= b.sum;
        self.width -= b.count;
        if self.rows[top].is_empty() {
            self.rows.pop();
        }
        if self.width == 0 {
            self.total = 0.0;
        }
    }

    /// Any bucket boundary, scanned oldest first, whose two sides differ by
    /// at least `sqrt(ln(4n/delta) / (2m))`, `1/m = 1/n0 + 1/n1`.
    fn has_cut(&self) -> bool {
        let n = self.width as f64;
        let log_term = (4.0 * n / self.delta).ln();
        let (mut n0, mut s0) = (0u64, 0.0);
        for b in self.rows.iter().rev().flat_map(|r| r.iter()) {
            n0 += b.count;
            s0 += b.sum;
            let n1 = self.width - n0;
            if n1 == 0 {
                break;
            }
            let (a, c) = (n0 as f64, n1 as f64);
            let mu0 = s0 / a;
            let mu1 = (self.total - s0) / c;
            let m = 1.0 / (1.0 / a + 1.0 / c);
            let eps = (log_term / (2.0 * m)).sqrt();
            if (mu0 - mu1).abs() >= eps {
                return true;
            }
        }
        false
    }
}
