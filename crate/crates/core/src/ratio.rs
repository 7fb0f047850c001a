//! Dynamics-ratio estimation with a pair of domain discriminators.
//!
//! One classifier sees `(s, a)`, the other `(s, a, s')`; both predict the
//! probability that the input came from the real domain. With
//! `p_sa = p(real|s,a)` and `p_sas = p(real|s,a,s')`,
//!
//! ```text
//! P_real(s'|s,a) / P_sim(s'|s,a) = [(1 − p_sa)/p_sa] · [p_sas/(1 − p_sas)]
//! ```

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{require_domain, vconcat, Batch, Domain, OfflineDataset, Transition};
use crate::error::{Error, Result};
use crate::numcore::{standard_normal, Activation, ApproximatorParams, Trainable};

pub const PROBABILITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioConfig {
    pub clip_low: f64,
    pub clip_high: f64,
    pub input_noise_std: f64,
    pub learning_rate: f64,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self {
            clip_low: 0.01,
            clip_high: 100.0,
            input_noise_std: 0.1,
            learning_rate: 3e-4,
        }
    }
}

impl RatioConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.clip_low > 0.0 && self.clip_low <= 1.0 && self.clip_high >= 1.0)
            || !self.clip_high.is_finite()
        {
            return Err(format!(
                "ratio clip bounds must satisfy 0 < low <= 1 <= high, got ({}, {})",
                self.clip_low, self.clip_high
            ));
        }
        if !(self.input_noise_std >= 0.0 && self.input_noise_std.is_finite()) {
            return Err("ratio.input_noise_std must be non-negative".into());
        }
        Ok(())
    }

    pub fn clip(&self, w: f64) -> f64 {
        w.clamp(self.clip_low, self.clip_high)
    }
}

/// Per-column affine standardization, fitted once on the offline data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(rows: &Array2<f64>) -> Self {
        let n = rows.nrows().max(1) as f64;
        let mean: Vec<f64> = rows.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
        let std = rows
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(col, m)| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, rows: &mut Array2<f64>) {
        for mut row in rows.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DiscriminatorLosses {
    pub sa: f64,
    pub sas: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioStats {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
}

impl RatioStats {
    pub fn of(weights: &[f64]) -> Self {
        if weights.is_empty() {
            return Self {
                mean: f64::NAN,
                max: f64::NAN,
                min: f64::NAN,
            };
        }
        Self {
            mean: weights.iter().sum::<f64>() / weights.len() as f64,
            max: weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: weights.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
}

/// Unclipped ratio from the two real-domain probabilities.
pub fn ratio_from_probabilities(p_sa: f64, p_sas: f64) -> f64 {
    let p_sa = clamp_probability(p_sa);
    let p_sas = clamp_probability(p_sas);
    ((1.0 - p_sa) / p_sa) * (p_sas / (1.0 - p_sas))
}

/// Mean binary cross-entropy of a single-logit classifier and its parameter
/// gradient. `labels[i]` is 1 for real, 0 for sim.
pub fn bce_loss_and_grad(
    net: &ApproximatorParams,
    inputs: Array2<f64>,
    labels: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = labels.len();
    if inputs.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "discriminator labels",
            expected: inputs.nrows(),
            actual: n,
        });
    }
    let tape = net.forward_tape(inputs)?;
    let mut upstream = Array2::zeros((n, 1));
    let mut total = 0.0;
    for (i, (&z, &y)) in tape.output().iter().zip(labels).enumerate() {
        total += softplus(z) - y * z;
        upstream[[i, 0]] = (sigmoid(z) - y) / n as f64;
    }
    let (grad, _) = net.backward(&tape, &upstream.view(), false)?;
    Ok((total / n as f64, grad))
}

/// The `(s,a)` and `(s,a,s')` domain classifiers with their input scaling.
#[derive(Debug, Clone)]
pub struct DiscriminatorPair {
    pub sa_net: Trainable,
    pub sas_net: Trainable,
    sa_norm: Standardizer,
    sas_norm: Standardizer,
    pub config: RatioConfig,
}

impl DiscriminatorPair {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        config: RatioConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let sa_dim = state_dim + action_dim;
        let sas_dim = 2 * state_dim + action_dim;
        Ok(Self {
            sa_net: Trainable::init(sa_dim, hidden, 1, Activation::Relu, config.learning_rate, rng)?,
            sas_net: Trainable::init(sas_dim, hidden, 1, Activation::Relu, config.learning_rate, rng)?,
            sa_norm: Standardizer::identity(sa_dim),
            sas_norm: Standardizer::identity(sas_dim),
            config,
        })
    }

    /// Fits the input standardizers to a set of transitions, normally the offline dataset.
    pub fn fit_standardizers(&mut self, transitions: &[Transition]) {
        let refs: Vec<&Transition> = transitions.iter().collect();
        let batch = Batch::from_transitions(&refs);
        self.sa_norm = Standardizer::fit(&batch.state_action());
        self.sas_norm = Standardizer::fit(&batch.state_action_next());
    }

    pub fn from_dataset<R: Rng + ?Sized>(
        dataset: &OfflineDataset,
        hidden: &[usize],
        config: RatioConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut pair = Self::new(dataset.state_dim(), dataset.action_dim(), hidden, config, rng)?;
        pair.fit_standardizers(dataset.transitions());
        Ok(pair)
    }

    fn sa_inputs(&self, batch: &Batch) -> Array2<f64> {
        let mut x = batch.state_action();
        self.sa_norm.apply(&mut x);
        x
    }

    fn sas_inputs(&self, batch: &Batch) -> Array2<f64> {
        let mut x = batch.state_action_next();
        self.sas_norm.apply(&mut x);
        x
    }

    /// One cross-entropy step per classifier on real (label 1) and sim
    /// (label 0) batches, with Gaussian smoothing noise on standardized inputs.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        real: &[&Transition],
        sim: &[&Transition],
        rng: &mut R,
    ) -> Result<DiscriminatorLosses> {
        if real.is_empty() || sim.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        require_domain(real.iter().copied(), Domain::Real, "discriminator real batch")?;
        require_domain(sim.iter().copied(), Domain::Sim, "discriminator sim batch")?;
        let real = Batch::from_transitions(real);
        let sim = Batch::from_transitions(sim);
        let labels: Vec<f64> = std::iter::repeat_n(1.0, real.len())
            .chain(std::iter::repeat_n(0.0, sim.len()))
            .collect();

        let noise = self.config.input_noise_std;
        let mut sa = vconcat(&self.sa_inputs(&real), &self.sa_inputs(&sim));
        let mut sas = vconcat(&self.sas_inputs(&real), &self.sas_inputs(&sim));
        if noise > 0.0 {
            sa.mapv_inplace(|v| v + noise * standard_normal(rng));
            sas.mapv_inplace(|v| v + noise * standard_normal(rng));
        }
        let (sa_loss, sa_grad) = bce_loss_and_grad(&self.sa_net.params, sa, &labels)?;
        let (sas_loss, sas_grad) = bce_loss_and_grad(&self.sas_net.params, sas, &labels)?;
        self.sa_net.apply_gradient(&sa_grad)?;
        self.sas_net.apply_gradient(&sas_grad)?;
        Ok(DiscriminatorLosses {
            sa: sa_loss,
            sas: sas_loss,
        })
    }

    /// `(p(real|s,a), p(real|s,a,s'))` per row, without noise.
    pub fn probabilities(&self, batch: &Batch) -> Result<(Vec<f64>, Vec<f64>)> {
        let za = self.sa_net.params.forward_batch(&self.sa_inputs(batch).view())?;
        let zs = self
            .sas_net
            .params
            .forward_batch(&self.sas_inputs(batch).view())?;
        Ok((
            za.iter().map(|&z| sigmoid(z)).collect(),
            zs.iter().map(|&z| sigmoid(z)).collect(),
        ))
    }

    pub fn unclipped_ratios(&self, batch: &Batch) -> Result<Vec<f64>> {
        let (p_sa, p_sas) = self.probabilities(batch)?;
        Ok(p_sa
            .iter()
            .zip(&p_sas)
            .map(|(&a, &b)| ratio_from_probabilities(a, b))
            .collect())
    }

    /// Clipped dynamics ratios for every row of `batch`.
    pub fn estimate(&self, batch: &Batch) -> Result<Vec<f64>> {
        Ok(self
            .unclipped_ratios(batch)?
            .into_iter()
            .map(|w| self.config.clip(w))
            .collect())
    }

    pub fn estimate_ratio(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<f64> {
        let t = Transition {
            s: s.to_vec(),
            a: a.to_vec(),
            r: 0.0,
            s_next: s_next.to_vec(),
            terminal: false,
            domain: Domain::Sim,
        };
        Ok(self.estimate(&Batch::from_transitions(&[&t]))?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    #[test]
    fn symmetric_probabilities_give_unit_ratio() {
        assert_eq!(ratio_from_probabilities(0.5, 0.5), 1.0);
    }

    #[test]
    fn hand_computed_ratio() {
        // (0.5/0.5)·(0.8/0.2) = 4
        let w = ratio_from_probabilities(0.5, 0.8);
        assert!((w - 4.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn label_swap_inverts_ratio() {
        for (a, b) in [(0.3, 0.9), (0.5, 0.8), (0.71, 0.12)] {
            let w = ratio_from_probabilities(a, b);
            let swapped = ratio_from_probabilities(1.0 - a, 1.0 - b);
            assert!((w * swapped - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probability_clamp_keeps_ratio_finite() {
        let w = ratio_from_probabilities(0.0, 1.0);
        let edge = (1.0 - PROBABILITY_FLOOR) / PROBABILITY_FLOOR;
        assert!(w.is_finite());
        assert!((w / (edge * edge) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clip_bounds() {
        let cfg = RatioConfig::default();
        assert_eq!(cfg.clip(1e9), 100.0);
        assert_eq!(cfg.clip(1e-9), 0.01);
        assert_eq!(cfg.clip(3.0), 3.0);
        let bad = RatioConfig { clip_low: 2.0, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn standardizer_zero_mean_unit_std() {
        let x = Array2::from_shape_vec((4, 2), vec![1.0, 10.0, 2.0, 10.0, 3.0, 10.0, 4.0, 10.0]).unwrap();
        let st = Standardizer::fit(&x);
        let mut y = x.clone();
        st.apply(&mut y);
        let col0: Vec<f64> = y.column(0).to_vec();
        assert!(col0.iter().sum::<f64>().abs() < 1e-12);
        assert!((col0.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
        // Constant columns are centred but not rescaled.
        assert!(y.column(1).iter().all(|v| *v == 0.0));
    }

    fn tagged(s: f64, domain: Domain) -> Transition {
        Transition {
            s: vec![s],
            a: vec![0.0],
            r: 0.0,
            s_next: vec![s],
            terminal: false,
            domain,
        }
    }

    #[test]
    fn update_rejects_mixed_domains() {
        let mut rng = SimRng::seed_from_u64(0);
        let mut pair = DiscriminatorPair::new(1, 1, &[4], RatioConfig::default(), &mut rng).unwrap();
        let real = [tagged(0.0, Domain::Real), tagged(1.0, Domain::Sim)];
        let sim = [tagged(2.0, Domain::Sim)];
        let r: Vec<&Transition> = real.iter().collect();
        let s: Vec<&Transition> = sim.iter().collect();
        assert!(matches!(
            pair.update(&r, &s, &mut rng),
            Err(Error::DomainContamination { .. })
        ));
        let r: Vec<&Transition> = real[..1].iter().collect();
        assert!(matches!(
            pair.update(&r, &r, &mut rng),
            Err(Error::DomainContamination {
                found: Domain::Real,
                ..
            })
        ));
        assert!(matches!(pair.update(&[], &s, &mut rng), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn estimates_stay_within_clip_bounds() {
        let mut rng = SimRng::seed_from_u64(1);
        let cfg = RatioConfig {
            clip_low: 0.5,
            clip_high: 2.0,
            ..RatioConfig::default()
        };
        let mut pair = DiscriminatorPair::new(1, 1, &[8], cfg, &mut rng).unwrap();
        // Blow up the logits so raw ratios fall far outside the bounds.
        for v in pair.sas_net.params.values_mut() {
            *v *= 50.0;
        }
        for i in 0..50 {
            let x = i as f64 - 25.0;
            let w = pair.estimate_ratio(&[x], &[0.1 * x], &[-x]).unwrap();
            assert!((0.5..=2.0).contains(&w), "{w}");
        }
    }

    #[test]
    fn separable_blobs_are_classified() {
        let mut rng = SimRng::seed_from_u64(2);
        let mut pair = DiscriminatorPair::new(
            1,
            1,
            &[16, 16],
            RatioConfig {
                input_noise_std: 0.0,
                learning_rate: 1e-3,
                ..RatioConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        let blob = |centre: f64, domain, rng: &mut SimRng| Transition {
            s: vec![centre + 0.3 * standard_normal(rng)],
            a: vec![centre + 0.3 * standard_normal(rng)],
            r: 0.0,
            s_next: vec![0.3 * standard_normal(rng)],
            terminal: false,
            domain,
        };
        for _ in 0..2_000 {
            let real: Vec<Transition> = (0..32).map(|_| blob(1.0, Domain::Real, &mut rng)).collect();
            let sim: Vec<Transition> = (0..32).map(|_| blob(-1.0, Domain::Sim, &mut rng)).collect();
            let r: Vec<&Transition> = real.iter().collect();
            let s: Vec<&Transition> = sim.iter().collect();
            pair.update(&r, &s, &mut rng).unwrap();
        }
        let mut correct = 0;
        let n = 1_000;
        for i in 0..n {
            let (centre, domain) = if i % 2 == 0 {
                (1.0, Domain::Real)
            } else {
                (-1.0, Domain::Sim)
            };
            let t = blob(centre, domain, &mut rng);
            let (p_sa, p_sas) = pair.probabilities(&Batch::from_transitions(&[&t])).unwrap();
            let predicted_real = p_sa[0] > 0.5;
            if predicted_real == (domain == Domain::Real) {
                correct += 1;
            }
            let predicted_real = p_sas[0] > 0.5;
            if predicted_real == (domain == Domain::Real) {
                correct += 1;
            }
        }
        let acc = correct as f64 / (2 * n) as f64;
        assert!(acc >= 0.95, "{acc}");
    }
}
