use serde::{Deserialize, Serialize};

use super::network::QNetwork;
use super::NnError;
use crate::schedule::LinearSchedule;

pub const DEFAULT_LR: LinearSchedule = LinearSchedule::new(1e-3, 1e-4, 50_000);

/// Adam with a linearly decaying step size. Moments are allocated lazily on
/// the first step so the optimizer can be built before the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: LinearSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(DEFAULT_LR)
    }
}

impl Adam {
    pub fn new(lr: LinearSchedule) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Updates applied so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Step size the next update will use.
    pub fn current_lr(&self) -> f64 {
        self.lr.value(self.step)
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    /// One update from the gradients currently stored in `net`. Returns the step size used.
    pub fn step(&mut self, net: &mut QNetwork) -> Result<f64, NnError> {
        let lr = self.current_lr();
        let pairs = net.params_and_grads();
        if self.m.is_empty() {
            self.m = pairs.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != pairs.len() || self.m.iter().zip(&pairs).any(|(m, (p, _))| m.len() != p.len()) {
            return Err(NnError::Checkpoint("optimizer moments do not match network parameters".into()));
        }
        let t = (self.step + 1) as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((p, g), (m, v)) in pairs.into_iter().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        self.step += 1;
        Ok(lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mode, NetworkConfig};
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lr_schedule_points() {
        let mut opt = Adam::default();
        assert_eq!(opt.current_lr(), 1e-3);
        opt.step = 25_000;
        assert!((opt.current_lr() - 5.5e-4).abs() < 1e-15);
        opt.step = 50_000;
        assert_eq!(opt.current_lr(), 1e-4);
        opt.step = 100_000;
        assert_eq!(opt.current_lr(), 1e-4);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // 1 -> [] -> 1 dense net: parameters are one weight and one bias.
        let cfg = NetworkConfig {
            inputs: 1,
            hidden: vec![],
            actions: 1,
            dueling: false,
            batch_norm: false,
            noisy: false,
        };
        let mut net = QNetwork::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        net.set_flat_params(&[0.0, 0.0]).unwrap();
        // dL/dQ = 1 with x = 1 gives gradient 1.0 for both parameters.
        net.forward(&Array2::ones((1, 1)), Mode::Train).unwrap();
        net.backward(&Array2::ones((1, 1))).unwrap();
        assert_eq!(net.flat_grads(), vec![1.0, 1.0]);
        let mut opt = Adam::default();
        let lr = opt.step(&mut net).unwrap();
        // m_hat = 1, v_hat = 1 -> update = lr / (1 + eps)
        let want = -lr / (1.0 + 1e-8);
        for p in net.flat_params() {
            assert!((p - want).abs() < 1e-15, "{p} vs {want}");
        }
        assert_eq!(opt.steps(), 1);
        let (m, v) = opt.moments();
        assert_eq!(m[0].len(), 1);
        assert!((m[0][0] - 0.1).abs() < 1e-15 && (v[0][0] - 0.001).abs() < 1e-15);
    }
}
