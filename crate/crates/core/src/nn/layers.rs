//! Layer types with hand-written backward passes.
//!
//! Matrices are `batch x features`. Every layer caches what its backward pass
//! needs during a train-mode forward; `backward` consumes that cache.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use super::NnError;

fn uniform_init<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound))
}

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, bound: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.gen_range(-bound..=bound))
}

/// Fully connected layer, `y = x W + b` with `W: in x out`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub grad_weight: Array2<f64>,
    pub grad_bias: Array1<f64>,
    input: Option<Array2<f64>>,
}

impl Dense {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self::from_params(uniform_init(rng, inputs, outputs, bound), uniform_vec(rng, outputs, bound))
    }

    pub fn from_params(weight: Array2<f64>, bias: Array1<f64>) -> Self {
        assert_eq!(weight.ncols(), bias.len());
        let (i, o) = weight.dim();
        Self {
            grad_weight: Array2::zeros((i, o)),
            grad_bias: Array1::zeros(o),
            weight,
            bias,
            input: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&mut self, x: &Array2<f64>, train: bool) -> Array2<f64> {
        let y = x.dot(&self.weight) + &self.bias;
        self.input = train.then(|| x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let x = self.input.take().ok_or(NnError::NoForwardCache)?;
        self.grad_weight.assign(&x.t().dot(dy));
        self.grad_bias.assign(&dy.sum_axis(Axis(0)));
        Ok(dy.dot(&self.weight.t()))
    }
}

/// Factorized-Gaussian noisy linear layer.
///
/// `W = mu_w + sigma_w * (f(e_in) f(e_out)^T)`, `b = mu_b + sigma_b * f(e_out)`,
/// with `f(x) = sign(x) sqrt|x|`. With noise disabled the layer is exactly
/// the dense layer `(mu_w, mu_b)`.
#[derive(Debug, Clone)]
pub struct NoisyDense {
    pub mu_weight: Array2<f64>,
    pub sigma_weight: Array2<f64>,
    pub mu_bias: Array1<f64>,
    pub sigma_bias: Array1<f64>,
    pub grad_mu_weight: Array2<f64>,
    pub grad_sigma_weight: Array2<f64>,
    pub grad_mu_bias: Array1<f64>,
    pub grad_sigma_bias: Array1<f64>,
    pub noise_in: Array1<f64>,
    pub noise_out: Array1<f64>,
    pub noise_enabled: bool,
    cache: Option<(Array2<f64>, Array2<f64>)>,
}

impl NoisyDense {
    pub const SIGMA_ZERO: f64 = 0.5;

    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let sigma = Self::SIGMA_ZERO / (inputs as f64).sqrt();
        let mut layer = Self {
            mu_weight: uniform_init(rng, inputs, outputs, bound),
            sigma_weight: Array2::from_elem((inputs, outputs), sigma),
            mu_bias: uniform_vec(rng, outputs, bound),
            sigma_bias: Array1::from_elem(outputs, sigma),
            grad_mu_weight: Array2::zeros((inputs, outputs)),
            grad_sigma_weight: Array2::zeros((inputs, outputs)),
            grad_mu_bias: Array1::zeros(outputs),
            grad_sigma_bias: Array1::zeros(outputs),
            noise_in: Array1::zeros(inputs),
            noise_out: Array1::zeros(outputs),
            noise_enabled: true,
            cache: None,
        };
        layer.resample(rng);
        layer
    }

    pub fn inputs(&self) -> usize {
        self.mu_weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.mu_weight.ncols()
    }

    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let f = |x: f64| x.signum() * x.abs().sqrt();
        self.noise_in.mapv_inplace(|_| f(rng.sample(StandardNormal)));
        self.noise_out.mapv_inplace(|_| f(rng.sample(StandardNormal)));
    }

    fn outer_noise(&self) -> Array2<f64> {
        let col = self.noise_in.view().insert_axis(Axis(1));
        let row = self.noise_out.view().insert_axis(Axis(0));
        &col * &row
    }

    fn effective(&self) -> (Array2<f64>, Array1<f64>) {
        if !self.noise_enabled {
            return (self.mu_weight.clone(), self.mu_bias.clone());
        }
        let eps = self.outer_noise();
        (
            &self.mu_weight + &(&self.sigma_weight * &eps),
            &self.mu_bias + &(&self.sigma_bias * &self.noise_out),
        )
    }

    pub fn forward(&mut self, x: &Array2<f64>, train: bool) -> Array2<f64> {
        let (w, b) = self.effective();
        let y = x.dot(&w) + &b;
        self.cache = train.then(|| (x.clone(), w));
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let (x, w) = self.cache.take().ok_or(NnError::NoForwardCache)?;
        self.grad_mu_weight.assign(&x.t().dot(dy));
        self.grad_mu_bias.assign(&dy.sum_axis(Axis(0)));
        if self.noise_enabled {
            let g = &self.grad_mu_weight * &self.outer_noise();
            self.grad_sigma_weight.assign(&g);
            let g = &self.grad_mu_bias * &self.noise_out;
            self.grad_sigma_bias.assign(&g);
        } else {
            self.grad_sigma_weight.fill(0.0);
            self.grad_sigma_bias.fill(0.0);
        }
        Ok(dy.dot(&w.t()))
    }
}

/// Per-feature batch normalization with running statistics for eval mode.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub grad_gamma: Array1<f64>,
    pub grad_beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<(Array2<f64>, Array1<f64>)>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Array1::ones(features),
            beta: Array1::zeros(features),
            grad_gamma: Array1::zeros(features),
            grad_beta: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array2<f64>, train: bool) -> Array2<f64> {
        if !train {
            self.cache = None;
            let inv_std = self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt());
            return (x - &self.running_mean) * &inv_std * &self.gamma + &self.beta;
        }
        let n = x.nrows() as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let centered = x - &mean;
        let var = centered.mapv(|c| c * c).sum_axis(Axis(0)) / n;
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let x_hat = &centered * &inv_std;
        let m = self.momentum;
        Zip::from(&mut self.running_mean)
            .and(&mean)
            .for_each(|r, &b| *r = (1.0 - m) * *r + m * b);
        Zip::from(&mut self.running_var)
            .and(&var)
            .for_each(|r, &b| *r = (1.0 - m) * *r + m * b);
        let y = &x_hat * &self.gamma + &self.beta;
        self.cache = Some((x_hat, inv_std));
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let (x_hat, inv_std) = self.cache.take().ok_or(NnError::NoForwardCache)?;
        let n = dy.nrows() as f64;
        self.grad_gamma.assign(&(dy * &x_hat).sum_axis(Axis(0)));
        self.grad_beta.assign(&dy.sum_axis(Axis(0)));
        let dx_hat = dy * &self.gamma;
        let sum_dx_hat = dx_hat.sum_axis(Axis(0));
        let sum_dx_hat_x_hat = (&dx_hat * &x_hat).sum_axis(Axis(0));
        let dx = (&dx_hat * n - &sum_dx_hat - &(&x_hat * &sum_dx_hat_x_hat)) * &(&inv_std / n);
        Ok(dx)
    }
}

/// ReLU with a cached activation mask.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Array2<bool>>,
}

impl Relu {
    pub fn forward(&mut self, x: Array2<f64>, train: bool) -> Array2<f64> {
        self.mask = train.then(|| x.mapv(|v| v > 0.0));
        x.mapv_into(|v| v.max(0.0))
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let mask = self.mask.take().ok_or(NnError::NoForwardCache)?;
        let mut dx = dy.clone();
        Zip::from(&mut dx).and(&mask).for_each(|d, &keep| {
            if !keep {
                *d = 0.0;
            }
        });
        Ok(dx)
    }
}
