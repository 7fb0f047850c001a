//! The mixed Bellman target
//!
//! ```text
//! y = r + λ·γ·V(s') + (1 − λ)·γ·[Q̂(s', a') − β·log π(a'|s')],   a' ~ π(·|s')
//! ```
//!
//! with `Q̂` the minimum of the twin target critics and `y = r` on failure
//! transitions. λ = 1 recovers the in-sample target `r + γV(s')`, λ = 0 the
//! soft actor-critic target.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::critics::CriticSet;
use super::policy::PolicyHead;
use crate::data::{hconcat, Batch, Transition};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedTargetConfig {
    pub lambda: f64,
    pub gamma: f64,
    /// Defaults to `−action_dim` when unset.
    pub target_entropy: Option<f64>,
    pub polyak: f64,
    pub use_ratio: bool,
    pub offline_fraction: f64,
}

impl Default for MixedTargetConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            gamma: 0.99,
            target_entropy: None,
            polyak: 0.005,
            use_ratio: true,
            offline_fraction: 0.5,
        }
    }
}

impl MixedTargetConfig {
    pub fn target_entropy(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(format!("lambda must lie in [0,1], got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !(self.polyak > 0.0 && self.polyak < 1.0) {
            return Err(format!("polyak must lie in (0,1), got {}", self.polyak));
        }
        if !(0.0..=1.0).contains(&self.offline_fraction) {
            return Err(format!(
                "offline_fraction must lie in [0,1], got {}",
                self.offline_fraction
            ));
        }
        Ok(())
    }
}

/// Combines precomputed next-state quantities into the target.
///
/// `soft_next` is `Q̂(s',a') − β·log π(a'|s')`.
#[inline]
pub fn combine_target(
    lambda: f64,
    gamma: f64,
    reward: f64,
    terminal: bool,
    v_next: f64,
    soft_next: f64,
) -> f64 {
    if terminal {
        return reward;
    }
    reward + lambda * gamma * v_next + (1.0 - lambda) * gamma * soft_next
}

/// Next-state ingredients of the target for every row of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetParts {
    pub v_next: Vec<f64>,
    pub soft_next: Vec<f64>,
}

/// Evaluates `V(s')` and one-sample soft values at `s'`. Branches whose
/// weight is exactly zero are skipped (reported as 0) and draw no randomness.
pub fn target_parts<R: Rng + ?Sized>(
    lambda: f64,
    critics: &CriticSet,
    policy: &PolicyHead,
    beta: f64,
    s_next: &Array2<f64>,
    rng: &mut R,
) -> Result<TargetParts> {
    let n = s_next.nrows();
    let v_next = if lambda > 0.0 {
        critics
            .v
            .params
            .forward_batch(&s_next.view())?
            .into_raw_vec_and_offset()
            .0
    } else {
        vec![0.0; n]
    };
    let soft_next = if lambda < 1.0 {
        let (a_next, log_probs) = policy.sample_batch(s_next, rng)?;
        let q = critics.min_target(&hconcat(s_next, &a_next))?;
        q.iter().zip(&log_probs).map(|(q, lp)| q - beta * lp).collect()
    } else {
        vec![0.0; n]
    };
    Ok(TargetParts { v_next, soft_next })
}

/// Targets for a whole batch; rewards are multiplied by `reward_scale` first.
pub fn mixed_targets<R: Rng + ?Sized>(
    cfg: &MixedTargetConfig,
    critics: &CriticSet,
    policy: &PolicyHead,
    beta: f64,
    batch: &Batch,
    reward_scale: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let parts = target_parts(cfg.lambda, critics, policy, beta, &batch.s_next, rng)?;
    Ok((0..batch.len())
        .map(|i| {
            combine_target(
                cfg.lambda,
                cfg.gamma,
                reward_scale * batch.r[i],
                batch.terminal[i],
                parts.v_next[i],
                parts.soft_next[i],
            )
        })
        .collect())
}

/// Target for a single transition.
pub fn mixed_target<R: Rng + ?Sized>(
    cfg: &MixedTargetConfig,
    critics: &CriticSet,
    policy: &PolicyHead,
    beta: f64,
    transition: &Transition,
    rng: &mut R,
) -> Result<f64> {
    let batch = Batch::from_transitions(&[transition]);
    mixed_targets(cfg, critics, policy, beta, &batch, 1.0, rng).map(|v| v[0])
}
