//! Small fully connected network with analytically derived gradients.
//!
//! Layers are dense affine transforms with ReLU on hidden layers and
//! identity on the output layer; probabilities come from a separate sigmoid
//! step. `forward` returns the activation cache by value and `backward`
//! consumes a reference to it, so gradients can only be computed for a batch
//! that actually went through the network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Element-wise activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation output (valid for
    /// ReLU and identity; ReLU uses the zero subgradient at 0).
    pub fn grad_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Input(format!("unknown activation tag {other:?}"))),
        }
    }
}

/// One dense layer: `out = activation(W x + b)`, weights stored row-major
/// with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    weights: Tensor,
    bias: Tensor,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::Config("layer weights must be 2-D".into()));
        }
        if bias.shape() != [weights.shape()[0]] {
            return Err(Error::Config(format!(
                "bias shape {:?} does not match {} outputs",
                bias.shape(),
                weights.shape()[0]
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }
}

/// Feed-forward network; the output layer emits one logit per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Assemble from explicit layers. Dimensions must chain and the final
    /// activation must be identity.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Config(format!(
                    "layer dimensions do not chain: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        if layers.last().unwrap().activation() != Activation::Identity {
            return Err(Error::Config(
                "final layer activation must be identity (logits)".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Random init for the dimension chain `dims = [input, hidden.., output]`:
    /// He-uniform for ReLU hidden layers, Xavier-uniform for the identity
    /// output layer, zero biases.
    pub fn seeded(dims: &[usize], rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("network needs input and output dims".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let last = l == dims.len() - 2;
            let activation = if last { Activation::Identity } else { Activation::Relu };
            let limit = if last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let mut w = Vec::with_capacity(fan_out * fan_in);
            for _ in 0..fan_out * fan_in {
                w.push(rng.uniform(-limit, limit)?);
            }
            layers.push(Layer::new(
                Tensor::from_vec(&[fan_out, fan_in], w)?,
                Tensor::zeros(&[fan_out]),
                activation,
            )?);
        }
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Dimension chain `[input, hidden.., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Layer::out_dim));
        dims
    }

    /// Parameter tensors in a fixed order: `[W0, b0, W1, b1, ..]`.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    /// Exact bit-level parameter equality; used by determinism checks.
    pub fn bit_eq(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .params()
                .iter()
                .zip(other.params())
                .all(|(a, b)| a.bit_eq(b))
    }

    /// Forward pass over a batch, caching every activation for `backward`.
    pub fn forward(&self, batch: &Tensor) -> Result<ForwardPass> {
        if batch.shape().len() != 2 || batch.cols() != self.input_dim() {
            return Err(Error::Config(format!(
                "batch shape {:?} does not match network input dim {}",
                batch.shape(),
                self.input_dim()
            )));
        }
        let n = batch.rows();
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.clone());
        for layer in &self.layers {
            let prev = activations.last().unwrap();
            let mut out = Tensor::zeros(&[n, layer.out_dim()]);
            for row in 0..n {
                let input = prev.row(row);
                for o in 0..layer.out_dim() {
                    let w_row = &layer.weights.data()[o * layer.in_dim()..(o + 1) * layer.in_dim()];
                    let mut z = layer.bias.data()[o];
                    for (w, x) in w_row.iter().zip(input) {
                        z += w * x;
                    }
                    out.set(row, o, layer.activation.apply(z));
                }
            }
            activations.push(out);
        }
        Ok(ForwardPass { activations })
    }

    /// Logits only (no cache retained).
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward(batch)?.into_logits())
    }

    /// Sigmoid probabilities for a batch.
    pub fn predict_proba(&self, batch: &Tensor) -> Result<Tensor> {
        let logits = self.logits(batch)?;
        let data = logits.data().iter().map(|&z| sigmoid(z)).collect();
        Tensor::from_vec(logits.shape(), data)
    }

    /// Back-propagate `d_logits` through the cached forward pass, producing
    /// parameter gradients in `params()` order. The cache must come from a
    /// forward pass of this network on the same batch.
    pub fn backward(&self, cache: &ForwardPass, d_logits: &Tensor) -> Result<Gradients> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::State(
                "forward cache does not match network depth".into(),
            ));
        }
        if d_logits.shape() != cache.logits().shape() {
            return Err(Error::State(format!(
                "gradient shape {:?} does not match cached logits {:?}",
                d_logits.shape(),
                cache.logits().shape()
            )));
        }
        let n = d_logits.rows();
        let mut grads = Vec::with_capacity(self.layers.len() * 2);
        let mut d_out = d_logits.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[l];
            let output = &cache.activations[l + 1];
            if input.rows() != n {
                return Err(Error::State("forward cache batch size mismatch".into()));
            }
            let mut d_w = Tensor::zeros(&[layer.out_dim(), layer.in_dim()]);
            let mut d_b = Tensor::zeros(&[layer.out_dim()]);
            let mut d_in = Tensor::zeros(&[n, layer.in_dim()]);
            for row in 0..n {
                for o in 0..layer.out_dim() {
                    let d_z = d_out.at(row, o) * layer.activation.grad_from_output(output.at(row, o));
                    d_b.data_mut()[o] += d_z;
                    let w_row = &layer.weights.data()[o * layer.in_dim()..(o + 1) * layer.in_dim()];
                    let dw_row = &mut d_w.data_mut()[o * layer.in_dim()..(o + 1) * layer.in_dim()];
                    let x_row = input.row(row);
                    for i in 0..layer.in_dim() {
                        dw_row[i] += d_z * x_row[i];
                    }
                    let din_row = &mut d_in.data_mut()[row * layer.in_dim()..(row + 1) * layer.in_dim()];
                    for i in 0..layer.in_dim() {
                        din_row[i] += d_z * w_row[i];
                    }
                }
            }
            grads.push(d_b);
            grads.push(d_w);
            d_out = d_in;
        }
        grads.reverse();
        Ok(Gradients { tensors: grads })
    }
}

/// Activation cache from one forward pass: input, each hidden output, logits.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    activations: Vec<Tensor>,
}

impl ForwardPass {
    pub fn logits(&self) -> &Tensor {
        self.activations.last().unwrap()
    }

    pub fn into_logits(mut self) -> Tensor {
        self.activations.pop().unwrap()
    }
}

/// Parameter gradients, ordered like [`Network::params`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn from_tensors(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }
}
