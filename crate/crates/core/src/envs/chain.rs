//! Two-dimensional Gaussian chain with closed-form transition densities.
//!
//! `s' = s + a + bias + ε`, `ε ~ N(0, σ² I)`, with the action clipped to the
//! unit ball. The reference and perturbed variants differ in `bias` and `σ`,
//! which makes the true dynamics ratio available in closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::standard_normal;

pub const CHAIN_DIM: usize = 2;
pub const CHAIN_EPISODE_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDynamics {
    pub bias: [f64; CHAIN_DIM],
    pub noise_std: f64,
}

impl ChainDynamics {
    pub const REFERENCE: Self = Self {
        bias: [0.0, 0.0],
        noise_std: 0.1,
    };
    pub const PERTURBED: Self = Self {
        bias: [0.2, 0.0],
        noise_std: 0.2,
    };

    /// Log density of the displacement `d = s' − s − a`.
    pub fn log_density(&self, displacement: &[f64; CHAIN_DIM]) -> f64 {
        let var = self.noise_std * self.noise_std;
        let sq: f64 = displacement
            .iter()
            .zip(&self.bias)
            .map(|(d, b)| (d - b) * (d - b))
            .sum();
        -0.5 * sq / var - CHAIN_DIM as f64 * (self.noise_std.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainState {
    pub s: [f64; CHAIN_DIM],
}

pub fn clip_to_unit_ball(a: &[f64; CHAIN_DIM]) -> [f64; CHAIN_DIM] {
    let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
    if norm > 1.0 {
        [a[0] / norm, a[1] / norm]
    } else {
        *a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStep {
    pub next: ChainState,
    pub action: [f64; CHAIN_DIM],
    pub reward: f64,
}

pub fn chain_step<R: Rng + ?Sized>(
    state: &ChainState,
    action: &[f64; CHAIN_DIM],
    dynamics: &ChainDynamics,
    rng: &mut R,
) -> ChainStep {
    let action = clip_to_unit_ball(action);
    let mut next = [0.0; CHAIN_DIM];
    for i in 0..CHAIN_DIM {
        let noise = if dynamics.noise_std > 0.0 {
            dynamics.noise_std * standard_normal(rng)
        } else {
            0.0
        };
        next[i] = state.s[i] + action[i] + dynamics.bias[i] + noise;
    }
    let reward = -(next[0] * next[0] + next[1] * next[1]);
    ChainStep {
        next: ChainState { s: next },
        action,
        reward,
    }
}

pub fn chain_reset<R: Rng + ?Sized>(rng: &mut R) -> ChainState {
    ChainState {
        s: [standard_normal(rng), standard_normal(rng)],
    }
}

/// Exact `P_real(s'|s,a) / P_sim(s'|s,a)`.
pub fn true_ratio(
    real: &ChainDynamics,
    sim: &ChainDynamics,
    s: &[f64; CHAIN_DIM],
    a: &[f64; CHAIN_DIM],
    s_next: &[f64; CHAIN_DIM],
) -> f64 {
    let a = clip_to_unit_ball(a);
    let d = [s_next[0] - s[0] - a[0], s_next[1] - s[1] - a[1]];
    (real.log_density(&d) - sim.log_density(&d)).exp()
}

/// Episodic wrapper: `done` after [`CHAIN_EPISODE_STEPS`] steps.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    pub dynamics: ChainDynamics,
    state: ChainState,
    steps: usize,
}

impl ChainEnv {
    pub fn new(dynamics: ChainDynamics) -> Self {
        Self {
            dynamics,
            state: ChainState::default(),
            steps: 0,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ChainState {
        self.state = chain_reset(rng);
        self.steps = 0;
        self.state
    }

    pub fn state(&self) -> ChainState {
        self.state
    }

    /// Returns the step and whether the episode is over.
    pub fn step<R: Rng + ?Sized>(&mut self, action: &[f64; CHAIN_DIM], rng: &mut R) -> (ChainStep, bool) {
        let out = chain_step(&self.state, action, &self.dynamics, rng);
        self.state = out.next;
        self.steps += 1;
        (out, self.steps >= CHAIN_EPISODE_STEPS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    #[test]
    fn deterministic_limit() {
        let dyn0 = ChainDynamics {
            bias: [0.0, 0.0],
            noise_std: 0.0,
        };
        let out = chain_step(
            &ChainState::default(),
            &[1.0, 0.0],
            &dyn0,
            &mut SimRng::seed_from_u64(0),
        );
        assert_eq!(out.next.s, [1.0, 0.0]);
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn action_clipped_to_unit_ball() {
        assert_eq!(clip_to_unit_ball(&[3.0, 4.0]), [0.6, 0.8]);
        assert_eq!(clip_to_unit_ball(&[0.3, -0.4]), [0.3, -0.4]);
    }

    #[test]
    fn ratio_at_zero_displacement() {
        // N(0; 0, 0.01 I) / N(0; b, 0.04 I)
        //   = (0.04/0.01) / exp(−0.5·0.04/0.04) = 4·e^{1/2}
        let w = true_ratio(
            &ChainDynamics::REFERENCE,
            &ChainDynamics::PERTURBED,
            &[0.3, -0.2],
            &[0.1, 0.1],
            &[0.4, -0.1],
        );
        assert!((w - 4.0 * 0.5f64.exp()).abs() < 1e-12, "{w}");
    }

    #[test]
    fn ratio_at_midpoint() {
        // d = b/2 = (0.1, 0): real exponent −0.5·0.01/0.01, sim −0.5·0.01/0.04.
        // w = 4·exp(−0.5 + 0.125) = 4·e^{−0.375}
        let w = true_ratio(
            &ChainDynamics::REFERENCE,
            &ChainDynamics::PERTURBED,
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0.1, 0.0],
        );
        assert!((w - 4.0 * (-0.375f64).exp()).abs() < 1e-12, "{w}");
    }

    #[test]
    fn identical_configs_give_unit_ratio() {
        let d = ChainDynamics::PERTURBED;
        let w = true_ratio(&d, &d, &[1.0, 2.0], &[0.5, 0.5], &[1.9, 2.2]);
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_is_translation_invariant() {
        let (r, p) = (ChainDynamics::REFERENCE, ChainDynamics::PERTURBED);
        let a = [0.2, -0.3];
        let w0 = true_ratio(&r, &p, &[0.0, 0.0], &a, &[0.35, -0.2]);
        let w1 = true_ratio(&r, &p, &[5.0, -3.0], &a, &[5.35, -3.2]);
        assert!((w0 - w1).abs() < 1e-9 * w0);
    }

    #[test]
    fn perturbed_mean_displacement_is_bias() {
        let mut rng = SimRng::seed_from_u64(1);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let a = [0.3, 0.1];
        for _ in 0..n {
            let s = chain_reset(&mut rng);
            let out = chain_step(&s, &a, &ChainDynamics::PERTURBED, &mut rng);
            for (i, acc) in sum.iter_mut().enumerate() {
                *acc += out.next.s[i] - s.s[i] - a[i];
            }
        }
        let se = 0.2 / (n as f64).sqrt();
        for (i, total) in sum.iter().enumerate() {
            let mean = total / n as f64;
            assert!(
                (mean - ChainDynamics::PERTURBED.bias[i]).abs() < 3.0 * se,
                "{i}: {mean}"
            );
        }
    }

    #[test]
    fn ratio_integrates_to_one_under_sim() {
        let mut rng = SimRng::seed_from_u64(2);
        let n = 100_000;
        let (r, p) = (ChainDynamics::REFERENCE, ChainDynamics::PERTURBED);
        let mut total = 0.0;
        for _ in 0..n {
            let s = chain_reset(&mut rng);
            let a = [0.5 * standard_normal(&mut rng), 0.5 * standard_normal(&mut rng)];
            let out = chain_step(&s, &a, &p, &mut rng);
            total += true_ratio(&r, &p, &s.s, &a, &out.next.s);
        }
        let mean = total / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn episode_ends_after_twenty_steps() {
        let mut env = ChainEnv::new(ChainDynamics::REFERENCE);
        let mut rng = SimRng::seed_from_u64(3);
        env.reset(&mut rng);
        for i in 1..=CHAIN_EPISODE_STEPS {
            let (_, done) = env.step(&[0.0, 0.0], &mut rng);
            assert_eq!(done, i == CHAIN_EPISODE_STEPS);
        }
    }
}
