//! Central finite-difference check of `QNetwork::backward`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{Mode, NetworkConfig, QNetwork};
use super::NnError;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared absolutely; below it the
/// finite-difference quotient is dominated by rounding in the loss.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index of the worst parameter.
    pub worst: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Checks all parameters against the scalar loss `L = sum(upstream * Q(x))`
/// evaluated in train mode (noise samples held fixed).
pub fn check_gradients(
    net: &QNetwork,
    x: &Array2<f64>,
    upstream: &Array2<f64>,
    h: f64,
) -> Result<GradCheckReport, NnError> {
    check_gradients_with(net, x, upstream, h, |_| {})
}

/// Like [`check_gradients`], but lets the caller tamper with the analytic
/// gradient before comparison (used to test the checker itself).
pub fn check_gradients_with(
    net: &QNetwork,
    x: &Array2<f64>,
    upstream: &Array2<f64>,
    h: f64,
    tamper: impl FnOnce(&mut [f64]),
) -> Result<GradCheckReport, NnError> {
    let mut work = net.clone();
    work.forward(x, Mode::Train)?;
    work.backward(upstream)?;
    let mut analytic = work.flat_grads();
    tamper(&mut analytic);

    let base = net.flat_params();
    let mut probe = net.clone();
    let mut loss = |params: &[f64]| -> Result<f64, NnError> {
        probe.set_flat_params(params)?;
        let q = probe.forward(x, Mode::Train)?;
        Ok((&q * upstream).sum())
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: 0,
        checked: base.len(),
    };
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + h;
        let up = loss(&p)?;
        p[i] = base[i] - h;
        let down = loss(&p)?;
        p[i] = base[i];
        let err = relative_error(analytic[i], (up - down) / (2.0 * h));
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = i;
        }
    }
    Ok(report)
}

/// Exhaustive check on a freshly initialized copy of `config` with random
/// inputs and random upstream gradients; returns the worst relative error.
pub fn grad_check(config: &NetworkConfig, batch: usize, seed: u64) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = randomized_net(config, &mut rng)?;
    let x = Array2::from_shape_simple_fn((batch, config.inputs), || rng.gen_range(-1.0..1.0));
    let up = Array2::from_shape_simple_fn((batch, config.actions), || rng.gen_range(-1.0..1.0));
    Ok(check_gradients(&net, &x, &up, DEFAULT_STEP)?.max_rel_error)
}

/// Fresh network whose batch-norm affine parameters are moved off their
/// (1, 0) defaults so that no ReLU sits exactly on its kink.
pub fn randomized_net<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<QNetwork, NnError> {
    let mut net = QNetwork::new(config.clone(), rng)?;
    for (gamma, beta) in net.batch_norm_affine_mut() {
        gamma.iter_mut().for_each(|g| *g = rng.gen_range(0.5..1.5));
        beta.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    }
    Ok(net)
}
