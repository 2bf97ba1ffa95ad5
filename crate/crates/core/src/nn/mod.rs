//! Dense feed-forward networks with hand-written reverse mode.
//!
//! Layers store their weights as a row-major `(fan_in, fan_out)` matrix so
//! that the batched affine map is a sequence of contiguous axpy updates. The
//! summation order for a given output element is fixed (bias first, then
//! inputs in ascending order) and does not depend on the batch size, which
//! makes single-sample and batched evaluation bitwise identical.

pub(crate) mod checkpoint;
mod finite_diff;
mod optim;

pub use finite_diff::{finite_difference_gradient, relative_error};
pub use optim::{polyak_update, Adam, AdamConfig};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Row-major batch of vectors, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Stacks equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("matrix row", cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Matrix) -> Result<Matrix> {
        check_len("hconcat rows", self.rows, other.rows)?;
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Copies columns `start..start + width` into a new matrix.
    pub fn columns(&self, start: usize, width: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + width]);
        }
        Matrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }
}

/// One affine map followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `(inputs, outputs)`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        check_len("layer weights", inputs * outputs, weights.len())?;
        check_len("layer bias", outputs, bias.len())?;
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let weights = (0..inputs * outputs).map(|_| dist.sample(rng)).collect();
        let bias = (0..outputs).map(|_| dist.sample(rng)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows, self.outputs);
        for r in 0..x.rows {
            let xr = x.row(r);
            let orow = out.row_mut(r);
            orow.copy_from_slice(&self.bias);
            for (k, &xv) in xr.iter().enumerate() {
                let wrow = &self.weights[k * self.outputs..(k + 1) * self.outputs];
                for (o, &w) in orow.iter_mut().zip(wrow) {
                    *o += xv * w;
                }
            }
            for o in orow.iter_mut() {
                *o = self.activation.apply(*o);
            }
        }
        out
    }
}

/// Reverse-mode derivatives for every parameter of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn layers(&self) -> &[LayerGradient] {
        &self.layers
    }

    /// Same flat order as [`Network::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn from_flat(net: &Network, flat: &[f64]) -> Result<Self> {
        check_len("flat gradient", net.param_count(), flat.len())?;
        let mut g = Self::zeros_like(net);
        let mut i = 0;
        for l in &mut g.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&flat[i..i + n]);
            i += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&flat[i..i + n]);
            i += n;
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    #[cfg(test)]
    pub(crate) fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }
}

/// Intermediate activations of a batched forward pass. `activations[0]` is the
/// input and `activations[k + 1]` the output of layer `k`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    activations: Vec<Matrix>,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("at least the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }
}

/// Multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network from explicit layers, checking that widths chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Usage("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_len("layer chain", pair[0].outputs, pair[1].inputs)?;
        }
        Ok(Self { layers })
    }

    /// Randomly initialized MLP: `hidden` rectifier layers, then an output
    /// layer with `output_activation`.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(Layer::init(width, h, Activation::Relu, rng));
            width = h;
        }
        layers.push(Layer::init(width, output, output_activation, rng));
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer: weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len("flat parameters", self.param_count(), flat.len())?;
        let mut i = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&flat[i..i + n]);
            i += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&flat[i..i + n]);
            i += n;
        }
        Ok(())
    }

    pub fn same_architecture(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.inputs == b.inputs && a.outputs == b.outputs && a.activation == b.activation
            })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Evaluates the network on a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_width(), input.len())?;
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&x)?.into_vec())
    }

    /// Evaluates the network on every row of `input`.
    pub fn forward_batch(&self, input: &Matrix) -> Result<Matrix> {
        check_len("network input", self.input_width(), input.cols)?;
        let mut x = self.layers[0].forward(input);
        for layer in &self.layers[1..] {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Forward pass that keeps every intermediate activation for
    /// [`Network::backward_pass`].
    pub fn forward_pass(&self, input: &Matrix) -> Result<ForwardPass> {
        check_len("network input", self.input_width(), input.cols)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("non-empty"));
            activations.push(next);
        }
        Ok(ForwardPass { activations })
    }

    /// Back-propagates `cotangent` (one row per sample) through a recorded
    /// pass. Parameter gradients summed over the batch are added into
    /// `grads` when given; the input cotangent is returned when requested.
    pub fn backward_pass(
        &self,
        pass: &ForwardPass,
        cotangent: &Matrix,
        mut grads: Option<&mut Gradients>,
        want_input: bool,
    ) -> Result<Option<Matrix>> {
        let out = pass.output();
        check_len("cotangent width", out.cols, cotangent.cols)?;
        check_len("cotangent rows", out.rows, cotangent.rows)?;
        if pass.activations.len() != self.layers.len() + 1 {
            return Err(Error::Usage(
                "forward pass belongs to another network".into(),
            ));
        }
        if let Some(g) = grads.as_deref() {
            if g.layers.len() != self.layers.len() {
                return Err(Error::Usage("gradient buffer shape mismatch".into()));
            }
        }

        let batch = cotangent.rows;
        let mut upstream = cotangent.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let y = &pass.activations[idx + 1];
            let x = &pass.activations[idx];
            let mut delta = upstream;
            for (d, &yv) in delta.data.iter_mut().zip(&y.data) {
                *d *= layer.activation.derivative_from_output(yv);
            }

            if let Some(g) = grads.as_deref_mut() {
                let lg = &mut g.layers[idx];
                for r in 0..batch {
                    let dr = delta.row(r);
                    for (b, &dv) in lg.bias.iter_mut().zip(dr) {
                        *b += dv;
                    }
                    for (k, &xv) in x.row(r).iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let gw = &mut lg.weights[k * layer.outputs..(k + 1) * layer.outputs];
                        for (w, &dv) in gw.iter_mut().zip(dr) {
                            *w += xv * dv;
                        }
                    }
                }
            }

            if idx == 0 && !want_input {
                return Ok(None);
            }

            let mut down = Matrix::zeros(batch, layer.inputs);
            for r in 0..batch {
                let dr = delta.row(r);
                let drow = down.row_mut(r);
                for (k, slot) in drow.iter_mut().enumerate() {
                    let wrow = &layer.weights[k * layer.outputs..(k + 1) * layer.outputs];
                    *slot = dot(wrow, dr);
                }
            }
            upstream = down;
        }
        Ok(Some(upstream))
    }

    /// Single-sample reverse mode: gradient of `<output, cotangent>` with
    /// respect to every parameter and to the input.
    pub fn backward(&self, input: &[f64], cotangent: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        check_len("cotangent", self.output_width(), cotangent.len())?;
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let pass = self.forward_pass(&x)?;
        let cot = Matrix::from_vec(1, cotangent.len(), cotangent.to_vec())?;
        let mut grads = Gradients::zeros_like(self);
        let dx = self
            .backward_pass(&pass, &cot, Some(&mut grads), true)?
            .expect("input cotangent requested");
        Ok((grads, dx.into_vec()))
    }
}

/// Dot product with four fixed partial sums (order independent of caller).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
