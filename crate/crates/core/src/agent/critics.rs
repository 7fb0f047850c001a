use ndarray::Array2;
use rand::Rng;

use crate::error::Result;
use crate::numcore::{Activation, ApproximatorParams, Trainable};

/// Twin critics, their slow target copies, and the state-value anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticSet {
    pub q1: Trainable,
    pub q2: Trainable,
    pub q1_target: ApproximatorParams,
    pub q2_target: ApproximatorParams,
    pub v: Trainable,
}

impl CriticSet {
    /// The value network is drawn from its own `v_rng` so that whether it
    /// exists does not shift the critics' initialization stream.
    pub fn init<R: Rng + ?Sized, Rv: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        rng: &mut R,
        v_rng: &mut Rv,
    ) -> Result<Self> {
        let sa = state_dim + action_dim;
        let q1 = Trainable::init(sa, hidden, 1, Activation::Relu, learning_rate, rng)?;
        let q2 = Trainable::init(sa, hidden, 1, Activation::Relu, learning_rate, rng)?;
        let v = Trainable::init(state_dim, hidden, 1, Activation::Relu, learning_rate, v_rng)?;
        Ok(Self {
            q1_target: q1.params.clone(),
            q2_target: q2.params.clone(),
            q1,
            q2,
            v,
        })
    }

    pub fn from_parts(q1: Trainable, q2: Trainable, v: Trainable) -> Self {
        Self {
            q1_target: q1.params.clone(),
            q2_target: q2.params.clone(),
            q1,
            q2,
            v,
        }
    }

    /// `θ_target ← (1 − rate)·θ_target + rate·θ` for both critics.
    pub fn polyak_update(&mut self, rate: f64) {
        self.q1_target.polyak_from(&self.q1.params, rate);
        self.q2_target.polyak_from(&self.q2.params, rate);
    }

    pub fn min_online(&self, sa: &Array2<f64>) -> Result<Vec<f64>> {
        crate::backbones::min_q(&self.q1.params, &self.q2.params, sa)
    }

    pub fn min_target(&self, sa: &Array2<f64>) -> Result<Vec<f64>> {
        crate::backbones::min_q(&self.q1_target, &self.q2_target, sa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    fn dist(a: &ApproximatorParams, b: &ApproximatorParams) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn polyak_shrinks_gap_by_exact_factor() {
        let mut rng = SimRng::seed_from_u64(0);
        let mut v_rng = SimRng::seed_from_u64(1);
        let mut c = CriticSet::init(3, 1, &[8, 8], 1e-3, &mut rng, &mut v_rng).unwrap();
        // Move the online nets away from their targets.
        for v in
            c.q1.params
                .values_mut()
                .iter_mut()
                .chain(c.q2.params.values_mut())
        {
            *v += 0.5;
        }
        let before = (dist(&c.q1_target, &c.q1.params), dist(&c.q2_target, &c.q2.params));
        let rate = 0.005;
        c.polyak_update(rate);
        let after = (dist(&c.q1_target, &c.q1.params), dist(&c.q2_target, &c.q2.params));
        assert!((after.0 / before.0 - (1.0 - rate)).abs() < 1e-12);
        assert!((after.1 / before.1 - (1.0 - rate)).abs() < 1e-12);
    }
}
