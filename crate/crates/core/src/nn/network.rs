use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Dense, NoisyDense, Relu};
use super::NnError;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Train mode caches activations and updates batch-norm statistics;
/// eval mode uses the running statistics and keeps all caches empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub inputs: usize,
    #[serde(default = "NetworkConfig::default_hidden")]
    pub hidden: Vec<usize>,
    pub actions: usize,
    #[serde(default = "yes")]
    pub dueling: bool,
    #[serde(default)]
    pub batch_norm: bool,
    #[serde(default)]
    pub noisy: bool,
}

fn yes() -> bool {
    true
}

impl NetworkConfig {
    pub fn default_hidden() -> Vec<usize> {
        vec![256, 128, 64]
    }

    /// Default trunk, dueling head, no batch norm, no noisy layers.
    pub fn new(inputs: usize, actions: usize) -> Self {
        Self {
            inputs,
            hidden: Self::default_hidden(),
            actions,
            dueling: true,
            batch_norm: false,
            noisy: false,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.inputs == 0 || self.actions == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(NnError::InvalidConfig(format!(
                "all layer widths must be positive (inputs {}, hidden {:?}, actions {})",
                self.inputs, self.hidden, self.actions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Linear {
    Plain(Dense),
    Noisy(NoisyDense),
}

impl Linear {
    fn new<R: Rng + ?Sized>(noisy: bool, i: usize, o: usize, rng: &mut R) -> Self {
        if noisy {
            Linear::Noisy(NoisyDense::new(i, o, rng))
        } else {
            Linear::Plain(Dense::new(i, o, rng))
        }
    }

    fn forward(&mut self, x: &Array2<f64>, train: bool) -> Array2<f64> {
        match self {
            Linear::Plain(l) => l.forward(x, train),
            Linear::Noisy(l) => l.forward(x, train),
        }
    }

    fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        match self {
            Linear::Plain(l) => l.backward(dy),
            Linear::Noisy(l) => l.backward(dy),
        }
    }

    fn params(&self) -> Vec<&[f64]> {
        match self {
            Linear::Plain(l) => vec![slice(&l.weight), slice(&l.bias)],
            Linear::Noisy(l) => vec![
                slice(&l.mu_weight),
                slice(&l.sigma_weight),
                slice(&l.mu_bias),
                slice(&l.sigma_bias),
            ],
        }
    }

    fn params_mut(&mut self) -> Vec<(&mut [f64], &[f64])> {
        match self {
            Linear::Plain(l) => vec![
                (slice_mut(&mut l.weight), slice(&l.grad_weight)),
                (slice_mut(&mut l.bias), slice(&l.grad_bias)),
            ],
            Linear::Noisy(l) => vec![
                (slice_mut(&mut l.mu_weight), slice(&l.grad_mu_weight)),
                (slice_mut(&mut l.sigma_weight), slice(&l.grad_sigma_weight)),
                (slice_mut(&mut l.mu_bias), slice(&l.grad_mu_bias)),
                (slice_mut(&mut l.sigma_bias), slice(&l.grad_sigma_bias)),
            ],
        }
    }

    fn buffers(&self) -> Vec<&[f64]> {
        match self {
            Linear::Plain(_) => vec![],
            Linear::Noisy(l) => vec![slice(&l.noise_in), slice(&l.noise_out)],
        }
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Linear::Plain(_) => vec![],
            Linear::Noisy(l) => vec![slice_mut(&mut l.noise_in), slice_mut(&mut l.noise_out)],
        }
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are contiguous")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are contiguous")
}

#[derive(Debug, Clone)]
struct Block {
    dense: Dense,
    norm: Option<BatchNorm>,
    relu: Relu,
}

#[derive(Debug, Clone)]
enum Head {
    Plain(Linear),
    Dueling { value: Linear, advantage: Linear },
}

/// Q-value network: ReLU trunk plus a plain or dueling head.
#[derive(Debug, Clone)]
pub struct QNetwork {
    config: NetworkConfig,
    blocks: Vec<Block>,
    head: Head,
    /// Rows of the last train-mode forward not yet consumed by `backward`.
    pending: Option<usize>,
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Result<Self, NnError> {
        config.validate()?;
        let mut blocks = Vec::with_capacity(config.hidden.len());
        let mut width = config.inputs;
        for &h in &config.hidden {
            blocks.push(Block {
                dense: Dense::new(width, h, rng),
                norm: config.batch_norm.then(|| BatchNorm::new(h)),
                relu: Relu::default(),
            });
            width = h;
        }
        let head = if config.dueling {
            Head::Dueling {
                value: Linear::new(config.noisy, width, 1, rng),
                advantage: Linear::new(config.noisy, width, config.actions, rng),
            }
        } else {
            Head::Plain(Linear::new(config.noisy, width, config.actions, rng))
        };
        Ok(Self {
            config,
            blocks,
            head,
            pending: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>, NnError> {
        if x.ncols() != self.config.inputs {
            return Err(NnError::WidthMismatch {
                expected: self.config.inputs,
                found: x.ncols(),
            });
        }
        let train = mode == Mode::Train;
        if train && self.config.batch_norm && x.nrows() < 2 {
            return Err(NnError::BatchTooSmall(x.nrows()));
        }
        let mut h = x.to_owned();
        for b in &mut self.blocks {
            h = b.dense.forward(&h, train);
            if let Some(norm) = &mut b.norm {
                h = norm.forward(&h, train);
            }
            h = b.relu.forward(h, train);
        }
        let q = match &mut self.head {
            Head::Plain(l) => l.forward(&h, train),
            Head::Dueling { value, advantage } => {
                let v = value.forward(&h, train);
                let a = advantage.forward(&h, train);
                combine_dueling(&v, &a)
            }
        };
        self.pending = train.then_some(x.nrows());
        Ok(q)
    }

    /// Single-state eval forward.
    pub fn q_values(&mut self, state: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = Array2::from_shape_vec((1, state.len()), state.to_vec()).expect("row shape");
        Ok(self.forward(&x, Mode::Eval)?.into_raw_vec_and_offset().0)
    }

    /// Fills every parameter gradient from `dq = dL/dQ` of the last train-mode forward.
    pub fn backward(&mut self, dq: &Array2<f64>) -> Result<(), NnError> {
        let rows = self.pending.take().ok_or(NnError::NoForwardCache)?;
        if dq.dim() != (rows, self.config.actions) {
            return Err(NnError::GradientShape {
                expected: (rows, self.config.actions),
                found: dq.dim(),
            });
        }
        let mut g = match &mut self.head {
            Head::Plain(l) => l.backward(dq)?,
            Head::Dueling { value, advantage } => {
                let dv = dq.sum_axis(Axis(1)).insert_axis(Axis(1));
                let mean = dq.mean_axis(Axis(1)).expect("actions > 0").insert_axis(Axis(1));
                let da = dq - &mean;
                value.backward(&dv)? + advantage.backward(&da)?
            }
        };
        for b in self.blocks.iter_mut().rev() {
            g = b.relu.backward(&g)?;
            if let Some(norm) = &mut b.norm {
                g = norm.backward(&g)?;
            }
            g = b.dense.backward(&g)?;
        }
        Ok(())
    }

    pub fn resample_noise<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for l in self.head_layers_mut() {
            if let Linear::Noisy(n) = l {
                n.resample(rng);
            }
        }
    }

    pub fn set_noise_enabled(&mut self, on: bool) {
        for l in self.head_layers_mut() {
            if let Linear::Noisy(n) = l {
                n.noise_enabled = on;
            }
        }
    }

    /// Overwrites every noise scale; used to check the zero-noise reduction.
    pub fn set_noise_scale(&mut self, sigma: f64) {
        for l in self.head_layers_mut() {
            if let Linear::Noisy(n) = l {
                n.sigma_weight.fill(sigma);
                n.sigma_bias.fill(sigma);
            }
        }
    }

    fn head_layers_mut(&mut self) -> Vec<&mut Linear> {
        match &mut self.head {
            Head::Plain(l) => vec![l],
            Head::Dueling { value, advantage } => vec![value, advantage],
        }
    }

    fn head_layers(&self) -> Vec<&Linear> {
        match &self.head {
            Head::Plain(l) => vec![l],
            Head::Dueling { value, advantage } => vec![value, advantage],
        }
    }

    /// Trainable parameter arrays in a fixed order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(slice(&b.dense.weight));
            out.push(slice(&b.dense.bias));
            if let Some(n) = &b.norm {
                out.push(slice(&n.gamma));
                out.push(slice(&n.beta));
            }
        }
        for l in self.head_layers() {
            out.extend(l.params());
        }
        out
    }

    /// `(parameter, gradient)` pairs, same order as [`params`](Self::params).
    pub fn params_and_grads(&mut self) -> Vec<(&mut [f64], &[f64])> {
        let mut out = Vec::new();
        let (blocks, head) = (&mut self.blocks, &mut self.head);
        for b in blocks.iter_mut() {
            out.push((slice_mut(&mut b.dense.weight), slice(&b.dense.grad_weight)));
            out.push((slice_mut(&mut b.dense.bias), slice(&b.dense.grad_bias)));
            if let Some(n) = &mut b.norm {
                out.push((slice_mut(&mut n.gamma), slice(&n.grad_gamma)));
                out.push((slice_mut(&mut n.beta), slice(&n.grad_beta)));
            }
        }
        match head {
            Head::Plain(l) => out.extend(l.params_mut()),
            Head::Dueling { value, advantage } => {
                out.extend(value.params_mut());
                out.extend(advantage.params_mut());
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn flat_grads(&mut self) -> Vec<f64> {
        self.params_and_grads().into_iter().flat_map(|(_, g)| g.to_vec()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        let want = self.param_count();
        if flat.len() != want {
            return Err(NnError::WidthMismatch {
                expected: want,
                found: flat.len(),
            });
        }
        let mut offset = 0;
        for (p, _) in self.params_and_grads() {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    /// Non-trainable state: batch-norm running statistics and noise samples.
    fn buffers(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if let Some(n) = &b.norm {
                out.push(slice(&n.running_mean));
                out.push(slice(&n.running_var));
            }
        }
        for l in self.head_layers() {
            out.extend(l.buffers());
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        let (blocks, head) = (&mut self.blocks, &mut self.head);
        for b in blocks.iter_mut() {
            if let Some(n) = &mut b.norm {
                out.push(slice_mut(&mut n.running_mean));
                out.push(slice_mut(&mut n.running_var));
            }
        }
        match head {
            Head::Plain(l) => out.extend(l.buffers_mut()),
            Head::Dueling { value, advantage } => {
                out.extend(value.buffers_mut());
                out.extend(advantage.buffers_mut());
            }
        }
        out
    }

    fn noise_enabled(&self) -> bool {
        self.head_layers().iter().any(|l| matches!(l, Linear::Noisy(n) if n.noise_enabled))
    }

    /// Test hook: direct access to the batch-norm layers' shift/scale.
    pub fn batch_norm_affine_mut(&mut self) -> Vec<(&mut [f64], &mut [f64])> {
        self.blocks
            .iter_mut()
            .filter_map(|b| b.norm.as_mut())
            .map(|n| (slice_mut(&mut n.gamma), slice_mut(&mut n.beta)))
            .collect()
    }

    pub fn checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self.params().into_iter().map(<[f64]>::to_vec).collect(),
            buffers: self.buffers().into_iter().map(<[f64]>::to_vec).collect(),
            noise_enabled: self.noise_enabled(),
        }
    }

    pub fn from_checkpoint(ck: &NetworkCheckpoint) -> Result<Self, NnError> {
        if ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        let mut net = Self::new(ck.config.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        fn load(dst: Vec<&mut [f64]>, src: &[Vec<f64>], what: &str) -> Result<(), NnError> {
            if dst.len() != src.len() {
                return Err(NnError::Checkpoint(format!(
                    "{what}: expected {} arrays, found {}",
                    dst.len(),
                    src.len()
                )));
            }
            for (i, (d, s)) in dst.into_iter().zip(src).enumerate() {
                if d.len() != s.len() {
                    return Err(NnError::Checkpoint(format!(
                        "{what} array {i}: expected {} values, found {}",
                        d.len(),
                        s.len()
                    )));
                }
                d.copy_from_slice(s);
            }
            Ok(())
        }
        let params = net.params_and_grads().into_iter().map(|(p, _)| p).collect();
        load(params, &ck.params, "params")?;
        load(net.buffers_mut(), &ck.buffers, "buffers")?;
        net.set_noise_enabled(ck.noise_enabled);
        Ok(net)
    }
}

/// `Q = V + A - mean(A)` row-wise.
pub fn combine_dueling(v: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
    let mean = a.mean_axis(Axis(1)).expect("actions > 0").insert_axis(Axis(1));
    a - &mean + v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub version: u32,
    pub config: NetworkConfig,
    pub params: Vec<Vec<f64>>,
    pub buffers: Vec<Vec<f64>>,
    pub noise_enabled: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny(dueling: bool, batch_norm: bool, noisy: bool) -> QNetwork {
        let cfg = NetworkConfig {
            inputs: 4,
            hidden: vec![3],
            actions: 2,
            dueling,
            batch_norm,
            noisy,
        };
        QNetwork::new(cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    fn relu(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        m.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
    }

    /// Row-vector times matrix (stored `in x out`, row-major), plus bias.
    fn affine(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
        let out = b.len();
        (0..out)
            .map(|j| b[j] + x.iter().enumerate().map(|(i, xi)| xi * w[i * out + j]).sum::<f64>())
            .collect()
    }

    #[test]
    fn forward_matches_hand_oracle() {
        for dueling in [false, true] {
            let mut net = tiny(dueling, false, false);
            let p: Vec<Vec<f64>> = net.params().into_iter().map(<[f64]>::to_vec).collect();
            let inputs = [[0.5, -1.0, 2.0, 0.25], [-0.3, 0.8, 0.0, 1.5]];
            let x = Array2::from_shape_vec((2, 4), inputs.concat()).unwrap();
            let q = net.forward(&x, Mode::Eval).unwrap();
            for (r, row) in inputs.iter().enumerate() {
                let h = relu(&[affine(row, &p[0], &p[1])]).remove(0);
                let want = if dueling {
                    let v = affine(&h, &p[2], &p[3])[0];
                    let a = affine(&h, &p[4], &p[5]);
                    let m = a.iter().sum::<f64>() / a.len() as f64;
                    a.iter().map(|ai| v + ai - m).collect()
                } else {
                    affine(&h, &p[2], &p[3])
                };
                for j in 0..2 {
                    assert!((q[[r, j]] - want[j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = tiny(true, false, false);
        let n = net.param_count();
        net.set_flat_params(&vec![0.0; n]).unwrap();
        let q = net.forward(&array![[1.0, 2.0, 3.0, 4.0]], Mode::Eval).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equal_advantages_give_value() {
        let v = array![[1.5], [-2.0]];
        let a = array![[3.0, 3.0, 3.0], [0.1, 0.1, 0.1]];
        let q = combine_dueling(&v, &a);
        assert!(q.row(0).iter().all(|&x| (x - 1.5).abs() < 1e-15));
        assert!(q.row(1).iter().all(|&x| (x + 2.0).abs() < 1e-15));
    }

    #[test]
    fn advantage_shift_is_unidentifiable() {
        let v = array![[0.7]];
        let a = array![[0.3, -1.2, 2.5, 0.0]];
        let c = 17.25;
        let q0 = combine_dueling(&v, &a);
        let q1 = combine_dueling(&v, &(&a + c));
        for (x, y) in q0.iter().zip(q1.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut net = tiny(true, false, false);
        assert!(matches!(
            net.forward(&Array2::zeros((1, 3)), Mode::Eval),
            Err(NnError::WidthMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn backward_requires_train_forward() {
        let mut net = tiny(true, false, false);
        let x = Array2::ones((2, 4));
        let dq = Array2::ones((2, 2));
        assert!(matches!(net.backward(&dq), Err(NnError::NoForwardCache)));
        net.forward(&x, Mode::Eval).unwrap();
        assert!(net.backward(&dq).is_err());
        net.forward(&x, Mode::Train).unwrap();
        assert!(net.backward(&Array2::ones((3, 2))).is_err());
        net.forward(&x, Mode::Train).unwrap();
        net.backward(&dq).unwrap();
        assert!(net.backward(&dq).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        for (d, b, n) in [(false, false, false), (true, true, true)] {
            let mut net = tiny(d, b, n);
            let x = array![[0.1, 0.2, 0.3, 0.4], [1.0, -1.0, 0.5, 0.0]];
            net.forward(&x, Mode::Train).unwrap();
            net.backward(&Array2::zeros((2, 2))).unwrap();
            assert!(net.flat_grads().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn eval_forward_is_bit_deterministic() {
        let mut net = tiny(true, true, true);
        net.set_noise_enabled(false);
        let x = array![[0.3, -0.1, 0.9, 2.0]];
        let a = net.forward(&x, Mode::Eval).unwrap();
        let b = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(a, b);
        let mut clone = net.clone();
        assert_eq!(a, clone.forward(&x, Mode::Eval).unwrap());
    }

    #[test]
    fn zero_noise_scale_equals_plain_head() {
        let mut noisy = tiny(true, false, true);
        let mut plain = tiny(true, false, false);
        // Copy the trunk and the deterministic head weights across.
        let np: Vec<Vec<f64>> = noisy.params().into_iter().map(<[f64]>::to_vec).collect();
        // noisy order: trunk w, b, value (mu_w, sigma_w, mu_b, sigma_b), adv (same)
        let flat = [&np[0][..], &np[1], &np[2], &np[4], &np[6], &np[8]].concat();
        plain.set_flat_params(&flat).unwrap();
        noisy.set_noise_scale(0.0);
        let x = array![[0.3, -0.1, 0.9, 2.0], [1.0, 1.0, -1.0, 0.0]];
        assert_eq!(
            noisy.forward(&x, Mode::Eval).unwrap(),
            plain.forward(&x, Mode::Eval).unwrap()
        );
    }

    #[test]
    fn eval_mode_freezes_batch_norm() {
        let mut net = tiny(false, true, false);
        let x = array![[0.3, -0.1, 0.9, 2.0], [1.0, 1.0, -1.0, 0.0]];
        let before = net.checkpoint().buffers;
        net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(net.checkpoint().buffers, before);
        net.forward(&x, Mode::Train).unwrap();
        assert_ne!(net.checkpoint().buffers, before);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        let mut net = tiny(true, true, true);
        let x = array![[0.3, -0.1, 0.9, 2.0], [1.0, 1.0, -1.0, 0.0]];
        net.forward(&x, Mode::Train).unwrap();
        let json = serde_json::to_string(&net.checkpoint()).unwrap();
        let ck: NetworkCheckpoint = serde_json::from_str(&json).unwrap();
        let mut back = QNetwork::from_checkpoint(&ck).unwrap();
        assert_eq!(net.forward(&x, Mode::Eval).unwrap(), back.forward(&x, Mode::Eval).unwrap());
    }

    #[test]
    fn checkpoint_rejects_bad_version_and_shapes() {
        let net = tiny(true, false, false);
        let mut ck = net.checkpoint();
        ck.version = 99;
        assert!(QNetwork::from_checkpoint(&ck).is_err());
        let mut ck = net.checkpoint();
        ck.params[0].pop();
        assert!(QNetwork::from_checkpoint(&ck).is_err());
    }

    #[test]
    fn default_architecture() {
        let net = QNetwork::new(NetworkConfig::new(36, 8), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let want = 36 * 256 + 256 + 256 * 128 + 128 + 128 * 64 + 64 + 64 + 1 + 64 * 8 + 8;
        assert_eq!(net.param_count(), want);
    }
}
