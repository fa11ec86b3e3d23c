use std::collections::VecDeque;

use super::FeatureError;

/// Ring of the last `capacity` samples with running first and second moments.
///
/// Sums are kept relative to a per-dimension shift (an actual stored sample),
/// which keeps the moment formulas well conditioned and makes constant
/// dimensions come out exactly zero. They are rebuilt from the ring every
/// `capacity` pushes so rounding cannot accumulate.
#[derive(Debug, Clone)]
pub struct FeatureWindow {
    capacity: usize,
    dims: usize,
    ring: VecDeque<Vec<f64>>,
    shift: Vec<f64>,
    sum: Vec<f64>,
    /// Upper triangle (including diagonal) of shifted cross products, row-major.
    cross: Vec<f64>,
    since_refresh: usize,
    seen: u64,
}

impl FeatureWindow {
    pub const DEFAULT_CAPACITY: usize = 200;

    pub fn new(capacity: usize, dims: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be >= 1");
        assert!(dims >= 1, "window needs at least one dimension");
        Self {
            capacity,
            dims,
            ring: VecDeque::with_capacity(capacity + 1),
            shift: vec![0.0; dims],
            sum: vec![0.0; dims],
            cross: vec![0.0; dims * (dims + 1) / 2],
            since_refresh: 0,
            seen: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    /// Total samples ever pushed.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Stored samples, oldest first.
    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + DoubleEndedIterator {
        self.ring.iter().map(|v| v.as_slice())
    }

    pub fn get(&self, i: usize) -> Option<&[f64]> {
        self.ring.get(i).map(|v| v.as_slice())
    }

    fn tri(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        i * self.dims - i * (i + 1) / 2 + j
    }

    fn accumulate(&mut self, values: &[f64], sign: f64) {
        for i in 0..self.dims {
            let di = values[i] - self.shift[i];
            self.sum[i] += sign * di;
            for j in i..self.dims {
                let dj = values[j] - self.shift[j];
                let k = self.tri(i, j);
                self.cross[k] += sign * di * dj;
            }
        }
    }

    fn refresh(&mut self) {
        self.shift = self.ring.front().cloned().unwrap_or_else(|| vec![0.0; self.dims]);
        self.sum.iter_mut().for_each(|s| *s = 0.0);
        self.cross.iter_mut().for_each(|s| *s = 0.0);
        let ring = std::mem::take(&mut self.ring);
        for v in &ring {
            self.accumulate(v, 1.0);
        }
        self.ring = ring;
        self.since_refresh = 0;
    }

    pub fn push(&mut self, values: &[f64]) -> Result<(), FeatureError> {
        if values.len() != self.dims {
            return Err(FeatureError::DimensionMismatch {
                expected: self.dims,
                found: values.len(),
            });
        }
        if self.ring.is_empty() {
            self.shift.copy_from_slice(values);
        }
        self.accumulate(values, 1.0);
        self.ring.push_back(values.to_vec());
        if self.ring.len() > self.capacity {
            let old = self.ring.pop_front().expect("ring over capacity");
            self.accumulate(&old, -1.0);
        }
        self.seen += 1;
        self.since_refresh += 1;
        if self.since_refresh >= self.capacity {
            self.refresh();
        }
        Ok(())
    }

    /// Per-dimension mean over the stored samples.
    pub fn means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        if self.is_empty() {
            return vec![0.0; self.dims];
        }
        (0..self.dims).map(|i| self.shift[i] + self.sum[i] / n).collect()
    }

    /// Population variance per dimension; 0 with fewer than two samples.
    pub fn variances(&self) -> Vec<f64> {
        let n = self.len();
        if n < 2 {
            return vec![0.0; self.dims];
        }
        let n = n as f64;
        (0..self.dims)
            .map(|i| {
                let m = self.sum[i] / n;
                (self.cross[self.tri(i, i)] / n - m * m).max(0.0)
            })
            .collect()
    }

    /// Pearson correlation for every pair `i < j`, lexicographic order.
    /// Pairs involving a zero-variance dimension are 0.
    pub fn correlations(&self) -> Vec<f64> {
        let d = self.dims;
        let pairs = d * (d - 1) / 2;
        let n = self.len();
        if n < 2 {
            return vec![0.0; pairs];
        }
        let var = self.variances();
        let nf = n as f64;
        let mut out = Vec::with_capacity(pairs);
        for i in 0..d {
            for j in i + 1..d {
                if var[i] <= 0.0 || var[j] <= 0.0 {
                    out.push(0.0);
                    continue;
                }
                let cov = self.cross[self.tri(i, j)] / nf - (self.sum[i] / nf) * (self.sum[j] / nf);
                out.push((cov / (var[i] * var[j]).sqrt()).clamp(-1.0, 1.0));
            }
        }
        out
    }

    /// `x_t - x_{t-1}`; zeros with fewer than two samples.
    pub fn rate_of_change(&self) -> Vec<f64> {
        let n = self.len();
        if n < 2 {
            return vec![0.0; self.dims];
        }
        let last = &self.ring[n - 1];
        let prev = &self.ring[n - 2];
        last.iter().zip(prev).map(|(a, b)| a - b).collect()
    }
}
