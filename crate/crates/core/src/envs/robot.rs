//! Wheeled inverted-pendulum robot.
//!
//! Dynamics, integrated with semi-implicit Euler (velocities first):
//!
//! ```text
//! v̇ = τ / (m·r_w) − c_f·v
//! θ̈ = (g/l)·sin θ − (v̇/l)·cos θ − c_d·θ̇
//! ẋ = v
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::standard_normal;

pub const WHEEL_RADIUS: f64 = 0.1;
pub const PENDULUM_LENGTH: f64 = 0.5;
pub const BASE_MASS: f64 = 1.0;
pub const BASE_GRAVITY: f64 = 9.81;
pub const BASE_FRICTION: f64 = 0.5;
pub const PITCH_DAMPING: f64 = 0.1;
pub const FAILURE_ANGLE: f64 = 0.7;
pub const DEFAULT_TORQUE_LIMIT: f64 = 2.0;
pub const RESET_ANGLE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub theta: f64,
    pub theta_dot: f64,
    pub x: f64,
    pub v: f64,
}

impl RobotState {
    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.theta_dot.is_finite() && self.x.is_finite() && self.v.is_finite()
    }

    pub fn has_fallen(&self) -> bool {
        self.theta.abs() > FAILURE_ANGLE
    }
}

/// Knobs that turn the reference dynamics into an imperfect simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsPerturbation {
    pub gravity_scale: f64,
    pub friction_scale: f64,
    pub mass_scale: f64,
    pub actuation_noise_std: f64,
}

impl Default for DynamicsPerturbation {
    fn default() -> Self {
        Self::REFERENCE
    }
}

impl DynamicsPerturbation {
    pub const REFERENCE: Self = Self {
        gravity_scale: 1.0,
        friction_scale: 1.0,
        mass_scale: 1.0,
        actuation_noise_std: 0.0,
    };

    pub fn gravity(scale: f64) -> Self {
        Self {
            gravity_scale: scale,
            ..Self::REFERENCE
        }
    }

    pub fn is_reference(&self) -> bool {
        *self == Self::REFERENCE
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("gravity_scale", self.gravity_scale),
            ("friction_scale", self.friction_scale),
            ("mass_scale", self.mass_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.actuation_noise_std.is_finite() && self.actuation_noise_std >= 0.0) {
            return Err(format!(
                "actuation_noise_std must be non-negative, got {}",
                self.actuation_noise_std
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    StandingStill,
    MovingForward,
}

impl Task {
    pub fn tag(self) -> &'static str {
        match self {
            Task::StandingStill => "standing_still",
            Task::MovingForward => "moving_forward",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "standing_still" => Some(Task::StandingStill),
            "moving_forward" => Some(Task::MovingForward),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub target_velocity: f64,
    pub max_steps: usize,
    pub dt: f64,
    pub torque_limit: f64,
}

impl TaskSpec {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            target_velocity: match task {
                Task::StandingStill => 0.0,
                Task::MovingForward => 0.2,
            },
            max_steps: 500,
            dt: 0.01,
            torque_limit: DEFAULT_TORQUE_LIMIT,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.task {
            Task::StandingStill => 4,
            Task::MovingForward => 3,
        }
    }

    pub const fn action_dim(&self) -> usize {
        1
    }

    /// Observation vector: `(θ, θ̇, x, v)` or `(v, θ, θ̇)`.
    pub fn observe(&self, s: &RobotState) -> Vec<f64> {
        match self.task {
            Task::StandingStill => vec![s.theta, s.theta_dot, s.x, s.v],
            Task::MovingForward => vec![s.v, s.theta, s.theta_dot],
        }
    }

    /// Per-step reward as a function of the pre-step state and the applied torque.
    pub fn reward(&self, s: &RobotState, torque: f64) -> f64 {
        match self.task {
            Task::StandingStill => {
                30.0 - s.x * s.x - s.v * s.v - s.theta * s.theta - s.theta_dot * s.theta_dot - torque * torque
            }
            Task::MovingForward => {
                let dv = s.v - self.target_velocity;
                15.0 - dv * dv - torque * torque
            }
        }
    }

    /// Same reward, evaluated from an observation vector.
    pub fn reward_from_observation(&self, obs: &[f64], torque: f64) -> f64 {
        let s = match self.task {
            Task::StandingStill => RobotState {
                theta: obs[0],
                theta_dot: obs[1],
                x: obs[2],
                v: obs[3],
            },
            Task::MovingForward => RobotState {
                v: obs[0],
                theta: obs[1],
                theta_dot: obs[2],
                x: 0.0,
            },
        };
        self.reward(&s, torque)
    }

    pub fn clip_torque(&self, torque: f64) -> f64 {
        if torque.is_nan() {
            return 0.0;
        }
        torque.clamp(-self.torque_limit, self.torque_limit)
    }
}

/// Result of one physics step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotStep {
    pub next: RobotState,
    /// Commanded torque after clipping; the reward is charged on this value.
    pub torque: f64,
    pub reward: f64,
    /// Failure termination (|θ| beyond the limit). Time limits are tracked by [`RobotEnv`].
    pub fallen: bool,
}

/// Pure physics step. Actuation noise is drawn only when its std is positive,
/// so reference and unit-scale perturbed steps consume the rng identically.
pub fn robot_step<R: Rng + ?Sized>(
    spec: &TaskSpec,
    state: &RobotState,
    torque: f64,
    perturbation: &DynamicsPerturbation,
    rng: &mut R,
) -> RobotStep {
    let torque = spec.clip_torque(torque);
    let reward = spec.reward(state, torque);
    let applied = if perturbation.actuation_noise_std > 0.0 {
        torque + perturbation.actuation_noise_std * standard_normal(rng)
    } else {
        torque
    };
    let mass = BASE_MASS * perturbation.mass_scale;
    let gravity = BASE_GRAVITY * perturbation.gravity_scale;
    let friction = BASE_FRICTION * perturbation.friction_scale;

    let v_dot = applied / (mass * WHEEL_RADIUS) - friction * state.v;
    let theta_ddot = (gravity / PENDULUM_LENGTH) * state.theta.sin()
        - (v_dot / PENDULUM_LENGTH) * state.theta.cos()
        - PITCH_DAMPING * state.theta_dot;

    let dt = spec.dt;
    let v = state.v + dt * v_dot;
    let theta_dot = state.theta_dot + dt * theta_ddot;
    let next = RobotState {
        theta: state.theta + dt * theta_dot,
        theta_dot,
        x: state.x + dt * v,
        v,
    };
    RobotStep {
        next,
        torque,
        reward,
        fallen: next.has_fallen(),
    }
}

pub fn robot_reset<R: Rng + ?Sized>(rng: &mut R) -> RobotState {
    RobotState {
        theta: rng.random_range(-RESET_ANGLE..=RESET_ANGLE),
        ..RobotState::default()
    }
}

/// Outcome of [`RobotEnv::step`] in observation space.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub action: f64,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Failure: bootstrap value is zero.
    pub terminal: bool,
    /// Time limit reached without failure: bootstrap continues.
    pub truncated: bool,
}

impl EnvStep {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Episodic wrapper that tracks the step counter.
#[derive(Debug, Clone)]
pub struct RobotEnv {
    pub spec: TaskSpec,
    pub perturbation: DynamicsPerturbation,
    state: RobotState,
    steps: usize,
}

impl RobotEnv {
    pub fn new(spec: TaskSpec, perturbation: DynamicsPerturbation) -> Self {
        Self {
            spec,
            perturbation,
            state: RobotState::default(),
            steps: 0,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        self.state = robot_reset(rng);
        self.steps = 0;
        self.observation()
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn set_state(&mut self, state: RobotState) {
        self.state = state;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn observation(&self) -> Vec<f64> {
        self.spec.observe(&self.state)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, torque: f64, rng: &mut R) -> EnvStep {
        let obs = self.observation();
        let out = robot_step(&self.spec, &self.state, torque, &self.perturbation, rng);
        self.state = out.next;
        self.steps += 1;
        let truncated = !out.fallen && self.steps >= self.spec.max_steps;
        EnvStep {
            obs,
            action: out.torque,
            reward: out.reward,
            next_obs: self.observation(),
            terminal: out.fallen,
            truncated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    fn rng() -> SimRng {
        SimRng::seed_from_u64(7)
    }

    #[test]
    fn upright_equilibrium_is_fixed_point() {
        let spec = TaskSpec::new(Task::StandingStill);
        let s = RobotState::default();
        let out = robot_step(&spec, &s, 0.0, &DynamicsPerturbation::REFERENCE, &mut rng());
        assert_eq!(out.next, s);
        assert_eq!(out.reward, 30.0);
        assert!(!out.fallen);
    }

    #[test]
    fn moving_forward_reward_at_target() {
        let spec = TaskSpec::new(Task::MovingForward);
        let s = RobotState {
            v: 0.2,
            ..Default::default()
        };
        assert_eq!(spec.reward(&s, 0.0), 15.0);
    }

    #[test]
    fn gravity_scale_doubles_gravity_term() {
        let spec = TaskSpec::new(Task::StandingStill);
        let s = RobotState {
            theta: 0.1,
            ..Default::default()
        };
        let one = robot_step(&spec, &s, 0.0, &DynamicsPerturbation::gravity(1.0), &mut rng());
        let two = robot_step(&spec, &s, 0.0, &DynamicsPerturbation::gravity(2.0), &mut rng());
        // θ̈ = (g/l)·sin(0.1), so θ̇' = dt·θ̈.
        let by_hand = 0.01 * (9.81 / 0.5) * 0.1f64.sin();
        assert!((one.next.theta_dot - by_hand).abs() < 1e-15);
        assert_eq!(two.next.theta_dot, 2.0 * one.next.theta_dot);
    }

    #[test]
    fn torque_is_clipped() {
        let spec = TaskSpec::new(Task::StandingStill);
        let out = robot_step(
            &spec,
            &RobotState::default(),
            50.0,
            &DynamicsPerturbation::REFERENCE,
            &mut rng(),
        );
        assert_eq!(out.torque, 2.0);
        assert_eq!(out.reward, 30.0 - 4.0);
        assert_eq!(spec.clip_torque(f64::NAN), 0.0);
    }

    #[test]
    fn unit_perturbation_matches_reference_bitwise() {
        let spec = TaskSpec::new(Task::StandingStill);
        let mut a = RobotEnv::new(spec, DynamicsPerturbation::REFERENCE);
        let mut b = RobotEnv::new(spec, DynamicsPerturbation::gravity(1.0));
        let (mut ra, mut rb) = (rng(), rng());
        a.reset(&mut ra);
        b.reset(&mut rb);
        for i in 0..200 {
            let tau = ((i as f64) * 0.37).sin();
            assert_eq!(a.step(tau, &mut ra), b.step(tau, &mut rb));
        }
    }

    #[test]
    fn episode_respects_time_limit() {
        let mut spec = TaskSpec::new(Task::StandingStill);
        spec.max_steps = 20;
        let mut env = RobotEnv::new(spec, DynamicsPerturbation::REFERENCE);
        env.set_state(RobotState::default());
        let mut r = rng();
        let mut last = None;
        for _ in 0..20 {
            last = Some(env.step(0.0, &mut r));
        }
        let last = last.unwrap();
        assert!(last.truncated && !last.terminal);
    }

    #[test]
    fn falling_terminates() {
        let spec = TaskSpec::new(Task::StandingStill);
        let mut env = RobotEnv::new(spec, DynamicsPerturbation::REFERENCE);
        env.set_state(RobotState {
            theta: 0.69,
            theta_dot: 3.0,
            ..Default::default()
        });
        let out = env.step(0.0, &mut rng());
        assert!(out.terminal && !out.truncated);
    }

    #[test]
    fn reset_is_reproducible_and_bounded() {
        let draws = |seed| {
            let mut r = SimRng::seed_from_u64(seed);
            (0..3).map(|_| robot_reset(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draws(5), draws(5));
        let mut r = rng();
        let n = 10_000;
        let thetas: Vec<f64> = (0..n).map(|_| robot_reset(&mut r).theta).collect();
        assert!(thetas.iter().all(|t| t.abs() <= RESET_ANGLE));
        let mean = thetas.iter().sum::<f64>() / n as f64;
        // Uniform(±0.05) has std 0.05/√3.
        let se = RESET_ANGLE / 3f64.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn observation_layouts() {
        let s = RobotState {
            theta: 1.0,
            theta_dot: 2.0,
            x: 3.0,
            v: 4.0,
        };
        assert_eq!(
            TaskSpec::new(Task::StandingStill).observe(&s),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert_eq!(
            TaskSpec::new(Task::MovingForward).observe(&s),
            vec![4.0, 1.0, 2.0]
        );
    }
}
