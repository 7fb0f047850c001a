//! Policy, critics, the mixed value update and the training loop, plus the
//! soft actor-critic and offline in-sample baselines as configuration extremes.

mod critics;
mod learner;
mod policy;
mod target;
mod updates;

pub use critics::CriticSet;
pub use learner::{evaluate, stream_rng, EvalStats, Learner, LearnerConfig, Mode, StepMetrics, Stream};
pub use policy::{log_one_minus_tanh_sq, PolicyHead, PolicySample, LOG_STD_MAX, LOG_STD_MIN};
pub use target::{combine_target, mixed_target, mixed_targets, target_parts, MixedTargetConfig, TargetParts};
pub use updates::{
    advantage_weighted_update, critic_loss_and_grad, critic_objective, policy_loss_and_grad, policy_update,
    q_update, temperature_update, CriticLosses, CriticObjective, PolicyOutcome, Temperature,
};
