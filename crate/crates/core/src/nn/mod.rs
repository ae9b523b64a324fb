//! Fully connected networks with exact backpropagation.
//!
//! Parameters and all arithmetic are `f64`. Dot products always accumulate in
//! the same fixed order (four interleaved partial sums), so every forward and
//! backward pass is bit-reproducible.

mod adam;
mod io;
mod loss;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::AdamState;
pub use io::{WeightFile, WEIGHT_FORMAT_VERSION};
pub use loss::{cce_loss, mse_loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Softmax,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// `outputs x inputs`, row-major.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
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

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn row(&self, out: usize) -> &[f64] {
        &self.weights[out * self.inputs..(out + 1) * self.inputs]
    }

    /// Affine part only.
    pub fn pre_activation(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs).map(|o| dot(self.row(o), input) + self.biases[o]));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Loss gradient with respect to every parameter, shaped like the net.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Gradients {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

impl DenseNet {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`) and zero biases.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<DenseNet> {
        validate_architecture(dims, activations)?;
        let mut rng = crate::seed::rng(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (inputs, outputs) = (pair[0], pair[1]);
                let bound = (6.0 / inputs as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                    .collect();
                Layer { inputs, outputs, weights, biases: vec![0.0; outputs], activation }
            })
            .collect();
        Ok(DenseNet { layers })
    }

    /// Build from explicit parameters, checking every shape.
    pub fn from_parameters(
        dims: &[usize],
        activations: &[Activation],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<DenseNet> {
        validate_architecture(dims, activations)?;
        if weights.len() != activations.len() || biases.len() != activations.len() {
            return Err(Error::Validation(format!(
                "expected {} layers, found {} weight and {} bias blocks",
                activations.len(),
                weights.len(),
                biases.len()
            )));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (i, ((w, b), &activation)) in weights.into_iter().zip(biases).zip(activations).enumerate() {
            let (inputs, outputs) = (dims[i], dims[i + 1]);
            if w.len() != inputs * outputs {
                return Err(Error::Validation(format!(
                    "layer {i}: expected {outputs}x{inputs} = {} weights, found {}",
                    inputs * outputs,
                    w.len()
                )));
            }
            if b.len() != outputs {
                return Err(Error::Validation(format!(
                    "layer {i}: expected {outputs} biases, found {}",
                    b.len()
                )));
            }
            if !w.iter().chain(&b).all(|v| v.is_finite()) {
                return Err(Error::Validation(format!("layer {i}: non-finite parameter")));
            }
            layers.push(Layer { inputs, outputs, weights: w, biases: b, activation });
        }
        Ok(DenseNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().all(f64::is_finite)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.pre_activation(&current, &mut next);
            activate(layer.activation, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Exact gradient of the loss with respect to every parameter, given the
    /// loss gradient with respect to the network output.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Gradients> {
        self.check_input(input)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), found: upstream.len() });
        }
        // outputs[l] is the post-activation output of layer l; its input is outputs[l-1] or `input`.
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = outputs.last().map(Vec::as_slice).unwrap_or(input);
            let mut z = Vec::new();
            layer.pre_activation(prev, &mut z);
            activate(layer.activation, &mut z);
            outputs.push(z);
        }

        let mut grads = Gradients::zeros_like(self);
        let mut grad_out = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let y = &outputs[l];
            let delta: Vec<f64> = match layer.activation {
                Activation::Identity => grad_out,
                Activation::Relu => grad_out.iter().zip(y).map(|(g, y)| if *y > 0.0 { *g } else { 0.0 }).collect(),
                Activation::Tanh => grad_out.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
                Activation::Softmax => {
                    let weighted = dot(&grad_out, y);
                    grad_out.iter().zip(y).map(|(g, p)| p * (g - weighted)).collect()
                }
            };
            let prev = if l == 0 { input } else { outputs[l - 1].as_slice() };
            let lg = &mut grads.layers[l];
            for (o, d) in delta.iter().enumerate() {
                lg.biases[o] = *d;
                let row = &mut lg.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, x) in row.iter_mut().zip(prev) {
                    *w = d * x;
                }
            }
            if l > 0 {
                let mut g = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (gi, w) in g.iter_mut().zip(layer.row(o)) {
                        *gi += w * d;
                    }
                }
                grad_out = g;
            } else {
                grad_out = Vec::new();
            }
        }
        Ok(grads)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: input.len() });
        }
        Ok(())
    }
}

fn validate_architecture(dims: &[usize], activations: &[Activation]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config("a network needs at least an input and an output size".into()));
    }
    if activations.len() != dims.len() - 1 {
        return Err(Error::Config(format!(
            "{} layer sizes need {} activations, got {}",
            dims.len(),
            dims.len() - 1,
            activations.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config("layer sizes must be positive".into()));
    }
    if activations[..activations.len() - 1].contains(&Activation::Softmax) {
        return Err(Error::Config("softmax is only allowed on the output layer".into()));
    }
    Ok(())
}

pub(crate) fn activate(activation: Activation, v: &mut [f64]) {
    match activation {
        Activation::Identity => {}
        Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
        Activation::Softmax => {
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in v.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            v.iter_mut().for_each(|x| *x /= sum);
        }
    }
}

/// Dot product with a fixed four-way accumulation order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let a4 = a.chunks_exact(4);
    let b4 = b.chunks_exact(4);
    let (ra, rb) = (a4.remainder(), b4.remainder());
    for (x, y) in a4.zip(b4) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
