//! Tanh-squashed diagonal Gaussian policy.
//!
//! The network maps `s` to `(mean, log_std)`; `log_std` is clamped to
//! `[LOG_STD_MIN, LOG_STD_MAX]`. A sample is `a = scale·tanh(mean + std·ε)` and
//! its log-density carries the change-of-variables term
//! `−Σ log(scale·(1 − tanh²u))`.

use ndarray::{s, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{standard_normal, Activation, ApproximatorParams, Tape, Trainable};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// `ln(1 − tanh²u)` without cancellation for large `|u|`.
#[inline]
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let x = -2.0 * u;
    let softplus = if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    };
    2.0 * (std::f64::consts::LN_2 - u - softplus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHead {
    pub net: Trainable,
    action_dim: usize,
    action_scale: f64,
}

/// A reparameterized batch sample with everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub actions: Array2<f64>,
    pub log_probs: Vec<f64>,
    tape: Tape,
    pre_tanh: Array2<f64>,
    noise: Array2<f64>,
    log_std: Array2<f64>,
    std_active: Array2<bool>,
}

impl PolicyHead {
    pub fn new(net: Trainable, action_dim: usize, action_scale: f64) -> Result<Self> {
        if net.params.output_dim() != 2 * action_dim {
            return Err(Error::DimensionMismatch {
                context: "policy head output",
                expected: 2 * action_dim,
                actual: net.params.output_dim(),
            });
        }
        Ok(Self {
            net,
            action_dim,
            action_scale,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        action_scale: f64,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let net = Trainable::init(
            state_dim,
            hidden,
            2 * action_dim,
            Activation::Relu,
            learning_rate,
            rng,
        )?;
        Self::new(net, action_dim, action_scale)
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn action_scale(&self) -> f64 {
        self.action_scale
    }

    pub fn params(&self) -> &ApproximatorParams {
        &self.net.params
    }

    fn log_prob_term(&self, u: f64, eps: f64, log_std: f64) -> f64 {
        -0.5 * eps * eps - log_std - HALF_LOG_TWO_PI - self.action_scale.ln() - log_one_minus_tanh_sq(u)
    }

    fn split_head(&self, out: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<bool>) {
        let ad = self.action_dim;
        let mean = out.slice(s![.., ..ad]).to_owned();
        let raw = out.slice(s![.., ad..]);
        let active = raw.mapv(|v| v > LOG_STD_MIN && v < LOG_STD_MAX);
        let log_std = raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        (mean, log_std, active)
    }

    /// Action and log-density for one state. Deterministic mode returns
    /// `scale·tanh(mean)` and evaluates the density there; it draws nothing from `rng`.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        s: &[f64],
        rng: &mut R,
        deterministic: bool,
    ) -> Result<(Vec<f64>, f64)> {
        let out = self.net.params.forward(s)?;
        let ad = self.action_dim;
        let mut action = Vec::with_capacity(ad);
        let mut log_prob = 0.0;
        for j in 0..ad {
            let mean = out[j];
            let log_std = out[ad + j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let eps = if deterministic { 0.0 } else { standard_normal(rng) };
            let u = mean + log_std.exp() * eps;
            action.push(self.action_scale * u.tanh());
            log_prob += self.log_prob_term(u, eps, log_std);
        }
        Ok((action, log_prob))
    }

    /// Deterministic actions for a batch of states.
    pub fn mean_actions(&self, states: &Array2<f64>) -> Result<Array2<f64>> {
        let out = self.net.params.forward_batch(&states.view())?;
        let scale = self.action_scale;
        Ok(out.slice(s![.., ..self.action_dim]).mapv(|m| scale * m.tanh()))
    }

    /// Reparameterized samples without a tape; for bootstrap targets.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        states: &Array2<f64>,
        rng: &mut R,
    ) -> Result<(Array2<f64>, Vec<f64>)> {
        let out = self.net.params.forward_batch(&states.view())?;
        let (mean, log_std, _) = self.split_head(&out);
        let n = states.nrows();
        let mut actions = Array2::zeros((n, self.action_dim));
        let mut log_probs = vec![0.0; n];
        for i in 0..n {
            for j in 0..self.action_dim {
                let eps = standard_normal(rng);
                let u = mean[[i, j]] + log_std[[i, j]].exp() * eps;
                actions[[i, j]] = self.action_scale * u.tanh();
                log_probs[i] += self.log_prob_term(u, eps, log_std[[i, j]]);
            }
        }
        Ok((actions, log_probs))
    }

    /// Reparameterized samples with a tape, for [`Self::backward`].
    pub fn sample_with_tape<R: Rng + ?Sized>(
        &self,
        states: &Array2<f64>,
        rng: &mut R,
    ) -> Result<PolicySample> {
        let n = states.nrows();
        let noise = Array2::from_shape_simple_fn((n, self.action_dim), || standard_normal(rng));
        self.sample_with_noise(states, noise)
    }

    /// Same as [`Self::sample_with_tape`] with caller-supplied standard-normal noise.
    pub fn sample_with_noise(&self, states: &Array2<f64>, noise: Array2<f64>) -> Result<PolicySample> {
        let tape = self.net.params.forward_tape(states.clone())?;
        let (mean, log_std, std_active) = self.split_head(tape.output());
        let pre_tanh = &mean + &(log_std.mapv(f64::exp) * &noise);
        let actions = pre_tanh.mapv(|u| self.action_scale * u.tanh());
        let mut log_probs = vec![0.0; states.nrows()];
        for ((i, j), &u) in pre_tanh.indexed_iter() {
            log_probs[i] += self.log_prob_term(u, noise[[i, j]], log_std[[i, j]]);
        }
        Ok(PolicySample {
            actions,
            log_probs,
            tape,
            pre_tanh,
            noise,
            log_std,
            std_active,
        })
    }

    /// Parameter gradient of a loss `L(actions, log_probs)` given
    /// `dL/d actions` and `dL/d log_probs`.
    pub fn backward(
        &self,
        sample: &PolicySample,
        d_actions: &Array2<f64>,
        d_log_probs: &[f64],
    ) -> Result<Vec<f64>> {
        let n = sample.actions.nrows();
        let ad = self.action_dim;
        let mut upstream = Array2::zeros((n, 2 * ad));
        for i in 0..n {
            for j in 0..ad {
                let u = sample.pre_tanh[[i, j]];
                let t = u.tanh();
                let std = sample.log_std[[i, j]].exp();
                let d_u = d_actions[[i, j]] * self.action_scale * (1.0 - t * t) + d_log_probs[i] * 2.0 * t;
                upstream[[i, j]] = d_u;
                upstream[[i, ad + j]] = if sample.std_active[[i, j]] {
                    d_u * std * sample.noise[[i, j]] - d_log_probs[i]
                } else {
                    0.0
                };
            }
        }
        let (grad, _) = self.net.params.backward(&sample.tape, &upstream.view(), false)?;
        Ok(grad)
    }

    /// Log-density of given actions (clamped just inside the box) and the
    /// gradient of `Σ_i weights[i]·log π(a_i|s_i)` with respect to the parameters.
    pub fn log_prob_and_grad(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        weights: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = states.nrows();
        let ad = self.action_dim;
        let tape = self.net.params.forward_tape(states.clone())?;
        let (mean, log_std, active) = self.split_head(tape.output());
        let mut log_probs = vec![0.0; n];
        let mut upstream = Array2::zeros((n, 2 * ad));
        let bound = 1.0 - 1e-6;
        for i in 0..n {
            for j in 0..ad {
                let y = (actions[[i, j]] / self.action_scale).clamp(-bound, bound);
                let u = y.atanh();
                let std = log_std[[i, j]].exp();
                let eps = (u - mean[[i, j]]) / std;
                log_probs[i] += self.log_prob_term(u, eps, log_std[[i, j]]);
                upstream[[i, j]] = weights[i] * eps / std;
                upstream[[i, ad + j]] = if active[[i, j]] {
                    weights[i] * (eps * eps - 1.0)
                } else {
                    0.0
                };
            }
        }
        let (grad, _) = self.net.params.backward(&tape, &upstream.view(), false)?;
        Ok((log_probs, grad))
    }
}
