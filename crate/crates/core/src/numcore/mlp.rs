use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Parameter gradient and input gradient, each present only when requested.
type BackwardParts = (Option<Vec<f64>>, Option<Array2<f64>>);

/// Parameters of a fixed-topology multilayer perceptron.
///
/// The flat vector stores, for every layer in order, an `in × out` row-major
/// weight block followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximatorParams {
    layer_sizes: Vec<usize>,
    activation: Activation,
    values: Vec<f64>,
}

/// Activations recorded by a batched forward pass, consumed by [`ApproximatorParams::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// `layers[0]` is the input batch, `layers[i]` the post-activation input of layer `i`.
    layers: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

/// Result of [`ApproximatorParams::grad`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidParams(
            "an approximator needs at least an input and an output layer".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidParams("layer sizes must be positive".into()));
    }
    Ok(())
}

impl ApproximatorParams {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, values: Vec<f64>) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "parameter vector has non-finite entries".into(),
            ));
        }
        Ok(Self {
            layer_sizes,
            activation,
            values,
        })
    }

    pub fn zeros(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        let n = param_count(&layer_sizes);
        Self::new(layer_sizes, activation, vec![0.0; n])
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        layer_sizes: Vec<usize>,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        let mut values = Vec::with_capacity(param_count(&layer_sizes));
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self::new(layer_sizes, activation, values)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for optimizers. Callers must keep entries finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn layer_offset(&self, layer: usize) -> usize {
        param_count(&self.layer_sizes[..=layer])
    }

    fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.layer_offset(layer);
        ArrayView2::from_shape((fan_in, fan_out), &self.values[start..start + fan_in * fan_out])
            .expect("layout matches layer sizes")
    }

    fn biases(&self, layer: usize) -> &[f64] {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.layer_offset(layer) + fan_in * fan_out;
        &self.values[start..start + fan_out]
    }

    fn check_input_cols(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "approximator input",
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    fn affine(&self, layer: usize, input: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights(layer));
        let b = self.biases(layer);
        for mut row in z.rows_mut() {
            for (zj, bj) in row.iter_mut().zip(b) {
                *zj += bj;
            }
        }
        z
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input_cols(input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(&x)?.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass over the rows of `input`.
    pub fn forward_batch(&self, input: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input_cols(input.ncols())?;
        let last = self.num_layers() - 1;
        let mut a = self.affine(0, input);
        for layer in 1..=last {
            a.mapv_inplace(|z| self.activation.apply(z));
            a = self.affine(layer, &a.view());
        }
        Ok(a)
    }

    /// Batched forward pass that keeps the activations needed for [`Self::backward`].
    pub fn forward_tape(&self, input: Array2<f64>) -> Result<Tape> {
        self.check_input_cols(input.ncols())?;
        let mut layers = Vec::with_capacity(self.num_layers());
        layers.push(input);
        for layer in 0..self.num_layers() {
            let mut z = self.affine(layer, &layers[layer].view());
            if layer + 1 == self.num_layers() {
                return Ok(Tape { layers, output: z });
            }
            z.mapv_inplace(|v| self.activation.apply(v));
            layers.push(z);
        }
        unreachable!("at least one layer")
    }

    /// Reverse-mode pass for the scalar `Σ_rows ⟨output_row, upstream_row⟩`.
    ///
    /// Returns the parameter gradient and, when `want_input` is set, the gradient
    /// with respect to the input batch.
    pub fn backward(
        &self,
        tape: &Tape,
        upstream: &ArrayView2<'_, f64>,
        want_input: bool,
    ) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
        self.backward_impl(tape, upstream, true, want_input)
            .map(|(p, i)| (p.expect("requested"), i))
    }

    /// Input gradient only; skips all parameter-gradient products.
    pub fn backward_input(&self, tape: &Tape, upstream: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.backward_impl(tape, upstream, false, true)
            .map(|(_, i)| i.expect("requested"))
    }

    fn backward_impl(
        &self,
        tape: &Tape,
        upstream: &ArrayView2<'_, f64>,
        want_params: bool,
        want_input: bool,
    ) -> Result<BackwardParts> {
        if upstream.dim() != tape.output.dim() {
            return Err(Error::DimensionMismatch {
                context: "upstream gradient",
                expected: tape.output.len(),
                actual: upstream.len(),
            });
        }
        let mut grad = want_params.then(|| vec![0.0; self.values.len()]);
        let mut delta = upstream.to_owned();
        let mut input_grad = None;
        for layer in (0..self.num_layers()).rev() {
            let a_in = &tape.layers[layer];
            if let Some(g) = grad.as_mut() {
                let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
                let start = self.layer_offset(layer);
                let dw = a_in.t().dot(&delta);
                g[start..start + fan_in * fan_out]
                    .iter_mut()
                    .zip(dw.iter())
                    .for_each(|(gi, di)| *gi = *di);
                let db: Array1<f64> = delta.sum_axis(Axis(0));
                g[start + fan_in * fan_out..start + fan_in * fan_out + fan_out]
                    .iter_mut()
                    .zip(db.iter())
                    .for_each(|(gi, di)| *gi = *di);
            }
            if layer == 0 && !want_input {
                break;
            }
            let mut d_in = delta.dot(&self.weights(layer).t());
            if layer == 0 {
                input_grad = Some(d_in);
                break;
            }
            let act = self.activation;
            ndarray::Zip::from(&mut d_in)
                .and(a_in)
                .for_each(|d, &a| *d *= act.derivative_from_output(a));
            delta = d_in;
        }
        Ok((grad, input_grad))
    }

    /// Single-sample gradient of `⟨forward(input), upstream⟩` with respect to
    /// the parameters and the input.
    pub fn grad(&self, input: &[f64], upstream: &[f64]) -> Result<Gradients> {
        self.check_input_cols(input.len())?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "upstream gradient",
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        let tape = self.forward_tape(x)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        let (params, input_grad) = self.backward(&tape, &up, true)?;
        Ok(Gradients {
            params,
            input: input_grad.expect("requested").into_raw_vec_and_offset().0,
        })
    }

    /// `self ← (1 − rate)·self + rate·source`.
    pub fn polyak_from(&mut self, source: &ApproximatorParams, rate: f64) {
        debug_assert_eq!(self.layer_sizes, source.layer_sizes);
        for (t, s) in self.values.iter_mut().zip(&source.values) {
            *t = (1.0 - rate) * *t + rate * s;
        }
    }

    /// Output column `col` of a batched forward pass, as a vector.
    pub fn column(out: &Array2<f64>, col: usize) -> Vec<f64> {
        out.slice(s![.., col]).to_vec()
    }
}
