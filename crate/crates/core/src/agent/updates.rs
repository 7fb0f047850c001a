//! Critic, policy and temperature updates.

use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::critics::CriticSet;
use super::policy::{PolicyHead, PolicySample};
use super::target::{mixed_targets, MixedTargetConfig};
use crate::data::{hconcat, require_domain, vconcat, Batch, Domain, Transition};
use crate::error::{Error, Result};
use crate::numcore::{ApproximatorParams, OptimizerState};
use crate::ratio::{DiscriminatorPair, RatioStats};

/// Weighted squared error `Σ_i c_i·(Q(x_i) − y_i)²` and its gradient.
pub fn critic_loss_and_grad(
    q: &ApproximatorParams,
    inputs: &Array2<f64>,
    targets: &[f64],
    row_weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = targets.len();
    let tape = q.forward_tape(inputs.clone())?;
    let mut upstream = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for (i, (&qi, (&y, &c))) in tape
        .output()
        .iter()
        .zip(targets.iter().zip(row_weights))
        .enumerate()
    {
        let err = qi - y;
        loss += c * err * err;
        upstream[[i, 0]] = 2.0 * c * err;
    }
    let (grad, _) = q.backward(&tape, &upstream.view(), false)?;
    Ok((loss, grad))
}

/// Everything the critic step regresses onto, for offline rows followed by sim rows.
#[derive(Debug, Clone)]
pub struct CriticObjective {
    pub inputs: Array2<f64>,
    pub targets: Vec<f64>,
    /// `1/n_D` on offline rows, `w_i/n_B` on simulated rows.
    pub row_weights: Vec<f64>,
    /// Ratios applied to the simulated rows (all 1 when reweighting is off).
    pub sim_ratios: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn critic_objective<R: Rng + ?Sized>(
    cfg: &MixedTargetConfig,
    critics: &CriticSet,
    policy: &PolicyHead,
    beta: f64,
    ratio: Option<&DiscriminatorPair>,
    offline: &Batch,
    sim: &Batch,
    reward_scale: f64,
    rng: &mut R,
) -> Result<CriticObjective> {
    let (n_d, n_b) = (offline.len(), sim.len());
    let sim_ratios = match (cfg.use_ratio, ratio) {
        (true, Some(pair)) if n_b > 0 => pair.estimate(sim)?,
        (true, None) if n_b > 0 => {
            return Err(Error::InvalidParams(
                "ratio reweighting enabled without discriminators".into(),
            ))
        }
        _ => vec![1.0; n_b],
    };

    let mut targets = Vec::with_capacity(n_d + n_b);
    let mut row_weights = Vec::with_capacity(n_d + n_b);
    let inputs = match (n_d, n_b) {
        (0, 0) => return Err(Error::EmptyBuffer),
        (_, 0) => offline.state_action(),
        (0, _) => sim.state_action(),
        _ => vconcat(&offline.state_action(), &sim.state_action()),
    };
    if n_d > 0 {
        targets.extend(mixed_targets(
            cfg,
            critics,
            policy,
            beta,
            offline,
            reward_scale,
            rng,
        )?);
        row_weights.extend(std::iter::repeat_n(1.0 / n_d as f64, n_d));
    }
    if n_b > 0 {
        targets.extend(mixed_targets(cfg, critics, policy, beta, sim, reward_scale, rng)?);
        row_weights.extend(sim_ratios.iter().map(|w| w / n_b as f64));
    }
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(Error::PoisonedUpdate {
            context: "critic target",
        });
    }
    Ok(CriticObjective {
        inputs,
        targets,
        row_weights,
        sim_ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticLosses {
    pub q1: f64,
    pub q2: f64,
    pub ratio: Option<RatioStats>,
}

impl CriticLosses {
    pub fn mean(&self) -> f64 {
        0.5 * (self.q1 + self.q2)
    }
}

/// One step per critic on `mean_D (Q − y)² + mean_B w·(Q − y)²`. Targets are
/// computed once, from the pre-update networks, and held fixed.
#[allow(clippy::too_many_arguments)]
pub fn q_update<R: Rng + ?Sized>(
    cfg: &MixedTargetConfig,
    critics: &mut CriticSet,
    policy: &PolicyHead,
    beta: f64,
    ratio: Option<&DiscriminatorPair>,
    offline: &[&Transition],
    sim: &[&Transition],
    reward_scale: f64,
    rng: &mut R,
) -> Result<CriticLosses> {
    require_domain(offline.iter().copied(), Domain::Real, "critic offline batch")?;
    require_domain(sim.iter().copied(), Domain::Sim, "critic sim batch")?;
    let offline = Batch::from_transitions(offline);
    let sim = Batch::from_transitions(sim);
    let obj = critic_objective(
        cfg,
        critics,
        policy,
        beta,
        ratio,
        &offline,
        &sim,
        reward_scale,
        rng,
    )?;
    let (l1, g1) = critic_loss_and_grad(&critics.q1.params, &obj.inputs, &obj.targets, &obj.row_weights)?;
    let (l2, g2) = critic_loss_and_grad(&critics.q2.params, &obj.inputs, &obj.targets, &obj.row_weights)?;
    if !(l1.is_finite() && l2.is_finite()) {
        return Err(Error::PoisonedUpdate {
            context: "critic loss",
        });
    }
    critics.q1.apply_gradient(&g1)?;
    critics.q2.apply_gradient(&g2)?;
    let ratio_stats = (cfg.use_ratio && !obj.sim_ratios.is_empty()).then(|| RatioStats::of(&obj.sim_ratios));
    Ok(CriticLosses {
        q1: l1,
        q2: l2,
        ratio: ratio_stats,
    })
}

/// Gradient of `min(Q1, Q2)(s, a)` with respect to `a`, per row.
fn min_q_action_grad(
    critics: &CriticSet,
    states: &Array2<f64>,
    actions: &Array2<f64>,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let sa = hconcat(states, actions);
    let n = sa.nrows();
    let t1 = critics.q1.params.forward_tape(sa.clone())?;
    let t2 = critics.q2.params.forward_tape(sa)?;
    let mut pick1 = Array2::zeros((n, 1));
    let mut pick2 = Array2::zeros((n, 1));
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (t1.output()[[i, 0]], t2.output()[[i, 0]]);
        if a <= b {
            pick1[[i, 0]] = 1.0;
            q.push(a);
        } else {
            pick2[[i, 0]] = 1.0;
            q.push(b);
        }
    }
    let d1 = critics.q1.params.backward_input(&t1, &pick1.view())?;
    let d2 = critics.q2.params.backward_input(&t2, &pick2.view())?;
    let sd = states.ncols();
    let grad = (&d1 + &d2).slice(s![.., sd..]).to_owned();
    Ok((q, grad))
}

/// Mean of `β·log π(a|s) − min Q(s, a)` over a reparameterized sample, with
/// the policy-parameter gradient. Critics are read only.
pub fn policy_loss_and_grad(
    critics: &CriticSet,
    policy: &PolicyHead,
    beta: f64,
    states: &Array2<f64>,
    sample: &PolicySample,
) -> Result<(f64, Vec<f64>)> {
    let n = states.nrows() as f64;
    let (q, dq_da) = min_q_action_grad(critics, states, &sample.actions)?;
    let loss = q
        .iter()
        .zip(&sample.log_probs)
        .map(|(q, lp)| beta * lp - q)
        .sum::<f64>()
        / n;
    let d_actions = dq_da.mapv(|g| -g / n);
    let d_log_probs = vec![beta / n; states.nrows()];
    let grad = policy.backward(sample, &d_actions, &d_log_probs)?;
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyOutcome {
    pub loss: f64,
    /// Log-densities of the pre-update sample, reused by the temperature step.
    pub log_probs: Vec<f64>,
}

/// Gradient step maximizing `E[min Q(s, a_π) − β·log π(a_π|s)]`.
pub fn policy_update<R: Rng + ?Sized>(
    critics: &CriticSet,
    policy: &mut PolicyHead,
    beta: f64,
    states: &Array2<f64>,
    rng: &mut R,
) -> Result<PolicyOutcome> {
    let sample = policy.sample_with_tape(states, rng)?;
    let (loss, grad) = policy_loss_and_grad(critics, policy, beta, states, &sample)?;
    if !loss.is_finite() {
        return Err(Error::PoisonedUpdate {
            context: "policy loss",
        });
    }
    policy.net.apply_gradient(&grad)?;
    Ok(PolicyOutcome {
        loss,
        log_probs: sample.log_probs,
    })
}

/// Advantage-weighted policy extraction on dataset actions:
/// maximize `mean_i min(exp(temperature·A_i), max_weight)·log π(a_i|s_i)`.
pub fn advantage_weighted_update(
    policy: &mut PolicyHead,
    states: &Array2<f64>,
    actions: &Array2<f64>,
    advantages: &[f64],
    temperature: f64,
    max_weight: f64,
) -> Result<f64> {
    let n = advantages.len() as f64;
    let weights: Vec<f64> = advantages
        .iter()
        .map(|a| (temperature * a).exp().min(max_weight))
        .collect();
    // Descend on −Σ w·log π / n.
    let scaled: Vec<f64> = weights.iter().map(|w| -w / n).collect();
    let (log_probs, grad) = policy.log_prob_and_grad(states, actions, &scaled)?;
    let loss = log_probs.iter().zip(&scaled).map(|(lp, w)| lp * w).sum::<f64>();
    if !loss.is_finite() {
        return Err(Error::PoisonedUpdate {
            context: "advantage-weighted policy loss",
        });
    }
    policy.net.apply_gradient(&grad)?;
    Ok(loss)
}

/// Entropy temperature `β = exp(log_β)`, adjusted toward a target entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Temperature {
    log_beta: f64,
    opt: OptimizerState,
}

impl Temperature {
    pub fn new(initial_beta: f64, learning_rate: f64) -> Self {
        assert!(initial_beta > 0.0, "temperature must start positive");
        Self {
            log_beta: initial_beta.ln(),
            opt: OptimizerState::new(1, learning_rate),
        }
    }

    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    pub fn log_beta(&self) -> f64 {
        self.log_beta
    }

    /// `d/d log_β` of `mean(−β·(log π + target_entropy))`.
    pub fn gradient(&self, log_probs: &[f64], target_entropy: f64) -> f64 {
        let mean = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / log_probs.len() as f64;
        -self.beta() * mean
    }

    pub fn update(&mut self, log_probs: &[f64], target_entropy: f64) -> Result<f64> {
        let g = self.gradient(log_probs, target_entropy);
        let mut p = [self.log_beta];
        self.opt.step(&mut p, &[g])?;
        self.log_beta = p[0];
        Ok(self.beta())
    }
}

/// Standalone form: fresh samples from `policy` at `states`.
pub fn temperature_update<R: Rng + ?Sized>(
    temperature: &mut Temperature,
    target_entropy: f64,
    policy: &PolicyHead,
    states: &Array2<f64>,
    rng: &mut R,
) -> Result<f64> {
    let (_, log_probs) = policy.sample_batch(states, rng)?;
    temperature.update(&log_probs, target_entropy)
}
