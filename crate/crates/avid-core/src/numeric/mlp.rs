//! Fixed-topology multilayer perceptron with explicit forward caches and
//! analytic backward passes.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::Matrix;
use crate::error::{CoreError, Result};
use crate::fmath;
use crate::rng;

/// Per-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer: `y = act(W x + b)`, weight shape `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// A small dense network; ReLU hidden layers, identity output by default.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations recorded by `forward`, consumed by `backward`.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `values[0]` is the input; `values[l + 1]` is layer `l`'s output.
    values: Vec<Vec<f64>>,
    /// Pre-activation vectors per layer.
    pre: Vec<Vec<f64>>,
}

/// Gradient (or moment accumulator) with the same shape as an `Mlp`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for x in w.as_mut_slice() {
                *x *= factor;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= factor;
            }
        }
    }

    /// `self += other * scale`; shapes must match.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) -> Result<()> {
        if self.weights.len() != other.weights.len() {
            return Err(CoreError::ShapeMismatch {
                context: "gradient accumulation",
            });
        }
        for (w, o) in self.weights.iter_mut().zip(other.weights.iter()) {
            if !w.same_shape(o) {
                return Err(CoreError::ShapeMismatch {
                    context: "gradient accumulation",
                });
            }
            for (x, y) in w.as_mut_slice().iter_mut().zip(o.as_slice()) {
                *x += scale * y;
            }
        }
        for (b, o) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (x, y) in b.iter_mut().zip(o.iter()) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for w in &self.weights {
            for x in w.as_slice() {
                m = m.max(fmath::abs(*x));
            }
        }
        for b in &self.biases {
            for x in b {
                m = m.max(fmath::abs(*x));
            }
        }
        m
    }
}

impl Mlp {
    /// Builds a network from explicit layers, checking dimension chaining.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::ShapeMismatch {
                context: "network needs at least one layer",
            });
        }
        for layer in &layers {
            if layer.bias.len() != layer.weight.rows() {
                return Err(CoreError::ShapeMismatch {
                    context: "bias length must equal weight rows",
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[1].weight.cols() != pair[0].weight.rows() {
                return Err(CoreError::ShapeMismatch {
                    context: "adjacent layer dimensions must chain",
                });
            }
        }
        Ok(Mlp { layers })
    }

    /// He-initialized network: ReLU on hidden layers, identity on the last.
    pub fn new_random<R: Rng + ?Sized>(dims: &[usize], rand: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(CoreError::ShapeMismatch {
                context: "need at least input and output dims",
            });
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let std = fmath::sqrt(2.0 / fan_in as f64);
            let mut weight = Matrix::zeros(fan_out, fan_in);
            for x in weight.as_mut_slice() {
                *x = std * rng::standard_normal(rand);
            }
            let activation = if l + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer {
                weight,
                bias: vec![0.0; fan_out],
                activation,
            });
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(other.layers.iter())
                .all(|(a, b)| a.weight.same_shape(&b.weight) && a.bias.len() == b.bias.len())
    }

    /// Forward pass returning the output and the cache `backward` needs.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.input_dim() {
            return Err(CoreError::LengthMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        values.push(x.to_vec());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.weight.matvec(&current);
            for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
                *zi += bi;
            }
            let out: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            values.push(out.clone());
            current = out;
        }
        Ok((current, ForwardCache { values, pre }))
    }

    /// Forward pass without caching, for inference-only paths.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(CoreError::LengthMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.weight.matvec(&current);
            for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
                *zi += bi;
            }
            for v in &mut z {
                *v = layer.activation.apply(*v);
            }
            current = z;
        }
        Ok(current)
    }

    /// Backward pass: gradients of a scalar loss with upstream gradient `dy`.
    ///
    /// Returns the gradient with respect to the input and to every parameter.
    pub fn backward(&self, cache: &ForwardCache, dy: &[f64]) -> Result<(Vec<f64>, Gradients)> {
        if cache.values.len() != self.layers.len() + 1 || cache.pre.len() != self.layers.len() {
            return Err(CoreError::StaleCache);
        }
        if dy.len() != self.output_dim() {
            return Err(CoreError::StaleCache);
        }
        for (layer, input) in self.layers.iter().zip(cache.values.iter()) {
            if layer.weight.cols() != input.len() {
                return Err(CoreError::StaleCache);
            }
        }
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = dy.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[l];
            let input = &cache.values[l];
            // d/dz = upstream ⊙ act'(z)
            let mut dz = upstream;
            for (d, p) in dz.iter_mut().zip(pre.iter()) {
                *d *= layer.activation.derivative(*p);
            }
            grads.weights[l].add_outer(&dz, input, 1.0);
            for (gb, d) in grads.biases[l].iter_mut().zip(dz.iter()) {
                *gb += d;
            }
            upstream = layer.weight.matvec_transposed(&dz);
        }
        Ok((upstream, grads))
    }
}
