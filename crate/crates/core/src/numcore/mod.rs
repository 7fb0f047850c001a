//! Fixed-topology perceptrons with hand-written reverse-mode gradients and an
//! adaptive first-order optimizer. Every network in the learner is built from
//! these pieces.

mod adam;
pub mod checkpoint;
mod mlp;

pub use adam::OptimizerState;
pub use mlp::{param_count, Activation, ApproximatorParams, Gradients, Tape};

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;

/// Default hidden width and depth for every approximator.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// Parameters paired with the optimizer state that updates them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainable {
    pub params: ApproximatorParams,
    pub opt: OptimizerState,
}

impl Trainable {
    pub fn new(params: ApproximatorParams, learning_rate: f64) -> Self {
        let opt = OptimizerState::new(params.len(), learning_rate);
        Self { params, opt }
    }

    /// Builds a freshly initialized `input → hidden… → output` network.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        activation: Activation,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Ok(Self::new(
            ApproximatorParams::init(sizes, activation, rng)?,
            learning_rate,
        ))
    }

    pub fn apply_gradient(&mut self, gradient: &[f64]) -> Result<()> {
        self.opt.step(self.params.values_mut(), gradient)
    }
}

/// Builds a `rows × cols` matrix whose row `i` is `row(i)`.
pub fn stack_rows<'a, I>(rows: I, cols: usize) -> Array2<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut flat = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), cols);
        flat.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, cols), flat).expect("rows have equal width")
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
