use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sumtree::SumTree;
use super::AgentError;

/// `(s, a, r, s')`; streams are continuing tasks, so there is no terminal flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    /// Importance weights, normalized so the largest in the batch is 1.
    pub weights: Vec<f64>,
}

/// Ring buffer of transitions with optional proportional prioritization.
///
/// The tree stores `p^alpha`. New transitions enter at the largest raw
/// priority seen so far (1.0 initially). In uniform mode the tree is still
/// maintained but sampling ignores it and all weights are 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    head: usize,
    tree: SumTree,
    alpha: f64,
    max_priority: f64,
    prioritized: bool,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, alpha: f64, prioritized: bool) -> Self {
        Self {
            capacity,
            data: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            tree: SumTree::new(capacity),
            alpha,
            max_priority: 1.0,
            prioritized,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn prioritized(&self) -> bool {
        self.prioritized
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Raw (pre-exponent) priority of slot `i`.
    pub fn priority(&self, i: usize) -> f64 {
        self.tree.get(i).powf(1.0 / self.alpha)
    }

    /// Stores at the write head, overwriting the oldest entry when full. Returns the slot.
    pub fn push(&mut self, tr: Transition) -> usize {
        let slot = self.head;
        if self.data.len() < self.capacity {
            self.data.push(tr);
        } else {
            self.data[slot] = tr;
        }
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        self.head = (self.head + 1) % self.capacity;
        slot
    }

    /// Stratified proportional sample of `k` slots with importance weights `(N P(i))^-beta`.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, beta: f64, rng: &mut R) -> Result<SampledBatch, AgentError> {
        let n = self.len();
        if k == 0 || n < k {
            return Err(AgentError::InsufficientReplay { have: n, need: k.max(1) });
        }
        if !self.prioritized {
            let indices = (0..k).map(|_| rng.gen_range(0..n)).collect();
            return Ok(SampledBatch {
                indices,
                weights: vec![1.0; k],
            });
        }
        let total = self.tree.total();
        let segment = total / k as f64;
        let mut indices = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        for i in 0..k {
            let mass = segment * (i as f64 + rng.gen::<f64>());
            let leaf = self.tree.find(mass).min(n - 1);
            let p = self.tree.get(leaf) / total;
            indices.push(leaf);
            weights.push((n as f64 * p).powf(-beta));
        }
        let max = weights.iter().cloned().fold(0.0, f64::max);
        weights.iter_mut().for_each(|w| *w /= max);
        Ok(SampledBatch { indices, weights })
    }

    /// Sets raw priorities (typically `|td| + floor`).
    pub fn update_priorities(&mut self, indices: &[usize], priorities: &[f64]) {
        for (&i, &p) in indices.iter().zip(priorities) {
            assert!(p > 0.0 && p.is_finite(), "priority must be positive and finite, got {p}");
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.alpha));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition {
        Transition {
            state: vec![r],
            action: 0,
            reward: r,
            next_state: vec![r],
        }
    }

    /// Pearson chi-square statistic.
    fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
        let n: usize = counts.iter().sum();
        counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| {
                let e = n as f64 * p;
                (c as f64 - e).powi(2) / e
            })
            .sum()
    }

    #[test]
    fn first_store_has_unit_priority() {
        let mut b = ReplayBuffer::new(8, 0.6, true);
        let slot = b.push(tr(0.0));
        assert_eq!(b.priority(slot), 1.0);
        assert_eq!(b.tree().total(), 1.0);
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(4, 0.6, true);
        for r in 0..5 {
            b.push(tr(r as f64));
        }
        assert_eq!(b.len(), 4);
        assert_eq!(b.get(0).reward, 4.0);
        assert_eq!(b.get(1).reward, 1.0);
    }

    #[test]
    fn new_entries_take_max_priority() {
        let mut b = ReplayBuffer::new(4, 1.0, true);
        b.push(tr(0.0));
        b.update_priorities(&[0], &[7.5]);
        let s = b.push(tr(1.0));
        assert_eq!(b.priority(s), 7.5);
    }

    #[test]
    fn insufficient_contents() {
        let mut b = ReplayBuffer::new(4, 0.6, true);
        b.push(tr(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            b.sample(2, 0.4, &mut rng),
            Err(AgentError::InsufficientReplay { have: 1, need: 2 })
        ));
    }

    #[test]
    fn three_to_one_priorities() {
        let mut b = ReplayBuffer::new(2, 1.0, true);
        b.push(tr(0.0));
        b.push(tr(1.0));
        b.update_priorities(&[0, 1], &[3.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            counts[b.sample(1, 0.4, &mut rng).unwrap().indices[0]] += 1;
        }
        // chi-square, 1 dof, significance 0.001
        assert!(chi_square(&counts, &[0.75, 0.25]) < 10.828, "{counts:?}");
    }

    #[test]
    fn equal_priorities_sample_uniformly_with_unit_weights() {
        let mut b = ReplayBuffer::new(10, 0.6, true);
        for r in 0..10 {
            b.push(tr(r as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 10];
        for _ in 0..1000 {
            let s = b.sample(10, 1.0, &mut rng).unwrap();
            assert!(s.weights.iter().all(|&w| (w - 1.0).abs() < 1e-12));
            for i in s.indices {
                counts[i] += 1;
            }
        }
        // 9 dof, significance 0.001
        assert!(chi_square(&counts, &[0.1; 10]) < 27.877, "{counts:?}");
    }

    #[test]
    fn importance_weights_favor_rare_slots() {
        let mut b = ReplayBuffer::new(2, 1.0, true);
        b.push(tr(0.0));
        b.push(tr(1.0));
        b.update_priorities(&[0, 1], &[3.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = b.sample(2, 1.0, &mut rng).unwrap();
        // stratified: one draw from each half of the mass -> slot 0 then
        // (mass >= 2) slot 0 or 1; weights relative to the max.
        for (&i, &w) in s.indices.iter().zip(&s.weights) {
            let p = if i == 0 { 0.75 } else { 0.25 };
            let raw = 1.0 / (2.0 * p);
            let max = s
                .indices
                .iter()
                .map(|&j| 1.0 / (2.0 * if j == 0 { 0.75 } else { 0.25 }))
                .fold(0.0, f64::max);
            assert!((w - raw / max).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_mode_ignores_priorities() {
        let mut b = ReplayBuffer::new(2, 1.0, false);
        b.push(tr(0.0));
        b.push(tr(1.0));
        b.update_priorities(&[0, 1], &[1000.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            let s = b.sample(1, 0.4, &mut rng).unwrap();
            assert_eq!(s.weights, vec![1.0]);
            counts[s.indices[0]] += 1;
        }
        assert!(chi_square(&counts, &[0.5, 0.5]) < 10.828);
    }
}
