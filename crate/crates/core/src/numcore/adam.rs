use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bias-corrected adaptive-moment optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub moment_decays: (f64, f64),
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            step_count: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            learning_rate,
            moment_decays: (0.9, 0.999),
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// Applies one descent step to `params` along `gradient`.
    ///
    /// A gradient with any non-finite entry is rejected before anything is
    /// touched, so both `params` and the moments stay as they were.
    pub fn step(&mut self, params: &mut [f64], gradient: &[f64]) -> Result<()> {
        if params.len() != self.len() || gradient.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "optimizer step",
                expected: self.len(),
                actual: if params.len() != self.len() {
                    params.len()
                } else {
                    gradient.len()
                },
            });
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::PoisonedUpdate {
                context: "optimizer gradient",
            });
        }
        let (b1, b2) = self.moment_decays;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(gradient)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut opt = OptimizerState::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_step_is_normalized() {
        let lr = 0.01;
        let mut opt = OptimizerState::new(2, lr);
        let g = [0.3, -4.0];
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &g).unwrap();
        // m̂ = g and v̂ = g² after bias correction.
        for (pi, gi) in p.iter().zip(g) {
            let expected = -lr * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut opt = OptimizerState::new(2, 0.1);
        let mut p = vec![1.0, 2.0];
        let before = opt.clone();
        let err = opt.step(&mut p, &[0.1, f64::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::PoisonedUpdate { .. }));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(opt, before);
    }

    #[test]
    fn identical_steps_are_bitwise_reproducible() {
        let run = || {
            let mut opt = OptimizerState::new(3, 3e-4);
            let mut p = vec![0.1, 0.2, 0.3];
            for _ in 0..2 {
                opt.step(&mut p, &[0.7, -0.1, 1e-3]).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn length_mismatch() {
        let mut opt = OptimizerState::new(2, 0.1);
        let mut p = vec![0.0; 3];
        assert!(opt.step(&mut p, &[0.0; 3]).is_err());
    }
}
