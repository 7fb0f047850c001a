//! In-sample state-value losses `L(y)` on the residual `y = Q(s,a) − V(s)`,
//! and the value update that fits `V` to real-domain data only.
//!
//! | kind      | `L(y)`                                         |
//! |-----------|------------------------------------------------|
//! | expectile | `|τ − 1(y<0)|·y²`                              |
//! | sql       | `1(1 + y/2α > 0)·(1 + y/2α)² − y/α`            |
//! | eql       | `exp(y/α) − y/α` (linear past y/α = 20)        |

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{require_domain, Batch, Domain, Transition};
use crate::error::{Error, Result};
use crate::numcore::{ApproximatorParams, Trainable};

pub const EQL_EXPONENT_CLAMP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackboneSpec {
    Expectile { tau: f64 },
    Sql { alpha: f64 },
    Eql { alpha: f64 },
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec::Expectile { tau: 0.7 }
    }
}

impl BackboneSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            BackboneSpec::Expectile { .. } => "expectile",
            BackboneSpec::Sql { .. } => "sql",
            BackboneSpec::Eql { .. } => "eql",
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            BackboneSpec::Expectile { tau } if !(tau > 0.0 && tau < 1.0) => {
                Err(format!("expectile tau must lie in (0,1), got {tau}"))
            }
            BackboneSpec::Sql { alpha } | BackboneSpec::Eql { alpha }
                if !(alpha.is_finite() && alpha > 0.0) =>
            {
                Err(format!("alpha must be positive, got {alpha}"))
            }
            _ => Ok(()),
        }
    }

    /// Loss value and `dL/dy` at residual `y`.
    pub fn residual_loss(&self, y: f64) -> (f64, f64) {
        value_residual_loss(self, y)
    }
}

pub fn value_residual_loss(spec: &BackboneSpec, y: f64) -> (f64, f64) {
    match *spec {
        BackboneSpec::Expectile { tau } => {
            let weight = if y < 0.0 { 1.0 - tau } else { tau };
            (weight * y * y, 2.0 * weight * y)
        }
        BackboneSpec::Sql { alpha } => {
            let z = 1.0 + y / (2.0 * alpha);
            if z > 0.0 {
                (z * z - y / alpha, z / alpha - 1.0 / alpha)
            } else {
                (-y / alpha, -1.0 / alpha)
            }
        }
        BackboneSpec::Eql { alpha } => {
            let t = y / alpha;
            if t <= EQL_EXPONENT_CLAMP {
                let e = t.exp();
                (e - t, (e - 1.0) / alpha)
            } else {
                // Continue linearly past the clamp; value and slope stay continuous.
                let e = EQL_EXPONENT_CLAMP.exp();
                (e * (1.0 + t - EQL_EXPONENT_CLAMP) - t, (e - 1.0) / alpha)
            }
        }
    }
}

/// Elementwise minimum of the two critics' outputs on `[s | a]` rows.
pub fn min_q(q1: &ApproximatorParams, q2: &ApproximatorParams, sa: &Array2<f64>) -> Result<Vec<f64>> {
    let a = q1.forward_batch(&sa.view())?;
    let b = q2.forward_batch(&sa.view())?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.min(*y)).collect())
}

/// Mean residual loss and its gradient with respect to the value parameters.
/// `Q` is held fixed.
pub fn value_loss_and_grad(
    v: &ApproximatorParams,
    q1: &ApproximatorParams,
    q2: &ApproximatorParams,
    batch: &Batch,
    spec: &BackboneSpec,
) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::EmptyBuffer);
    }
    let q = min_q(q1, q2, &batch.state_action())?;
    let tape = v.forward_tape(batch.s.clone())?;
    let mut upstream = Array2::zeros((n, 1));
    let mut total = 0.0;
    for (i, (qi, vi)) in q.iter().zip(tape.output().iter()).enumerate() {
        let (loss, dloss) = value_residual_loss(spec, qi - vi);
        total += loss;
        // y = Q − V, so dL/dV = −dL/dy.
        upstream[[i, 0]] = -dloss / n as f64;
    }
    let mean = total / n as f64;
    if !mean.is_finite() {
        return Err(Error::PoisonedUpdate {
            context: "value loss",
        });
    }
    let (grad, _) = v.backward(&tape, &upstream.view(), false)?;
    Ok((mean, grad))
}

/// One gradient step of `V` on an offline batch. Any non-real transition is
/// rejected before the network is touched.
pub fn value_update(
    v: &mut Trainable,
    q1: &ApproximatorParams,
    q2: &ApproximatorParams,
    batch: &[&Transition],
    spec: &BackboneSpec,
) -> Result<f64> {
    require_domain(batch.iter().copied(), Domain::Real, "value update")?;
    let batch = Batch::from_transitions(batch);
    let (loss, grad) = value_loss_and_grad(&v.params, q1, q2, &batch, spec)?;
    v.apply_gradient(&grad)?;
    Ok(loss)
}
