use serde::{Deserialize, Serialize};

/// Array-backed sum tree over a fixed number of leaves.
///
/// `2n - 1` nodes, heap ordered; leaves start at `n - 1`. Parents are
/// recomputed from their children on every update (never patched with
/// deltas), so each internal node equals the sum of its children exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "sum tree capacity must be >= 1");
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity - 1],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[0]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity - 1 + leaf]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.capacity - 1..]
    }

    pub fn set(&mut self, leaf: usize, priority: f64) {
        assert!(leaf < self.capacity, "leaf {leaf} out of range");
        assert!(priority.is_finite() && priority >= 0.0, "bad priority {priority}");
        let mut i = self.capacity - 1 + leaf;
        self.nodes[i] = priority;
        while i > 0 {
            i = (i - 1) / 2;
            self.nodes[i] = self.nodes[2 * i + 1] + self.nodes[2 * i + 2];
        }
        debug_assert!(self.path_consistent(leaf));
    }

    fn path_consistent(&self, leaf: usize) -> bool {
        let mut i = self.capacity - 1 + leaf;
        while i > 0 {
            i = (i - 1) / 2;
            if self.nodes[i] != self.nodes[2 * i + 1] + self.nodes[2 * i + 2] {
                return false;
            }
        }
        true
    }

    /// Every internal node equals the sum of its children.
    pub fn is_consistent(&self) -> bool {
        (0..self.capacity - 1).all(|i| self.nodes[i] == self.nodes[2 * i + 1] + self.nodes[2 * i + 2])
    }

    /// Leaf whose cumulative-mass interval contains `mass`, for `mass` in `[0, total)`.
    /// Zero-priority leaves are never returned while the total is positive.
    pub fn find(&self, mass: f64) -> usize {
        let mut i = 0;
        let mut mass = mass.clamp(0.0, self.total());
        while 2 * i + 1 < self.nodes.len() {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            if mass < self.nodes[l] || self.nodes[r] <= 0.0 {
                i = l;
            } else {
                mass -= self.nodes[l];
                i = r;
            }
        }
        i - (self.capacity - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn total_and_find() {
        let mut t = SumTree::new(4);
        for (i, p) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            t.set(i, p);
        }
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 1);
        assert_eq!(t.find(5.5), 2);
        assert_eq!(t.find(9.99), 3);
        assert_eq!(t.find(10.0), 3);
    }

    #[test]
    fn odd_capacity_and_zero_leaves() {
        let mut t = SumTree::new(5);
        t.set(4, 2.0);
        t.set(1, 1.0);
        assert!(t.is_consistent());
        for k in 0..300 {
            let m = t.total() * k as f64 / 300.0;
            let leaf = t.find(m);
            assert!(t.get(leaf) > 0.0, "mass {m} hit empty leaf {leaf}");
        }
    }

    proptest! {
        #[test]
        fn root_equals_leaf_sum(ops in prop::collection::vec((0usize..37, 0.0f64..100.0), 1..400)) {
            let mut t = SumTree::new(37);
            for (leaf, p) in ops {
                t.set(leaf, p);
            }
            prop_assert!(t.is_consistent());
            let brute: f64 = t.leaves().iter().sum();
            prop_assert!((t.total() - brute).abs() <= 1e-9 * brute.max(1.0));
        }
    }
}
