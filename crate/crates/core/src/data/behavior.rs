//! Scripted stand-in for the human operator that produced the real-domain data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::OfflineDataset;
use super::transition::{Domain, Transition};
use crate::envs::{DynamicsPerturbation, RobotEnv, RobotState, Task, TaskSpec};
use crate::numcore::standard_normal;

/// Linear state feedback plus Gaussian action noise.
///
/// `τ = k_θ·θ + k_θ̇·θ̇ + k_x·x + k_v·(v − v_tgt) + N(0, σ²)`. Positive torque
/// accelerates the wheels forward, which pitches the body backward, so all
/// gains enter with a positive sign. The displacement gain is ignored on
/// `moving_forward`, where `x` is not tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdController {
    pub k_theta: f64,
    pub k_theta_dot: f64,
    pub k_x: f64,
    pub k_v: f64,
    pub noise_std: f64,
}

impl Default for PdController {
    fn default() -> Self {
        Self {
            k_theta: 8.0,
            k_theta_dot: 1.0,
            k_x: 0.5,
            k_v: 1.0,
            noise_std: 0.3,
        }
    }
}

impl PdController {
    pub fn noiseless(self) -> Self {
        Self {
            noise_std: 0.0,
            ..self
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, spec: &TaskSpec, s: &RobotState, rng: &mut R) -> f64 {
        let k_x = match spec.task {
            Task::StandingStill => self.k_x,
            Task::MovingForward => 0.0,
        };
        let feedback = self.k_theta * s.theta
            + self.k_theta_dot * s.theta_dot
            + k_x * s.x
            + self.k_v * (s.v - spec.target_velocity);
        if self.noise_std > 0.0 {
            feedback + self.noise_std * standard_normal(rng)
        } else {
            feedback
        }
    }
}

/// Rolls the controller in the reference environment until `n` transitions are
/// recorded, restarting episodes on failure or time limit.
pub fn collect_offline<R: Rng + ?Sized>(
    spec: &TaskSpec,
    controller: &PdController,
    n: usize,
    rng: &mut R,
) -> OfflineDataset {
    assert!(n >= 1, "collect_offline needs n >= 1");
    let mut env = RobotEnv::new(*spec, DynamicsPerturbation::REFERENCE);
    let mut ds = OfflineDataset::new(spec.state_dim(), spec.action_dim());
    env.reset(rng);
    while ds.len() < n {
        let tau = controller.act(spec, env.state(), rng);
        let step = env.step(tau, rng);
        let done = step.done();
        ds.push(Transition {
            s: step.obs,
            a: vec![step.action],
            r: step.reward,
            s_next: step.next_obs,
            terminal: step.terminal,
            domain: Domain::Real,
        })
        .expect("collector builds well-formed real transitions");
        if done {
            env.reset(rng);
        }
    }
    ds
}

/// Undiscounted return of one episode of `act` in `env`.
pub fn rollout_return<R, F>(env: &mut RobotEnv, mut act: F, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: FnMut(&RobotState, &[f64], &mut R) -> f64,
{
    env.reset(rng);
    let mut total = 0.0;
    loop {
        let obs = env.observation();
        let state = *env.state();
        let tau = act(&state, &obs, rng);
        let step = env.step(tau, rng);
        total += step.reward;
        if step.done() {
            return total;
        }
    }
}
