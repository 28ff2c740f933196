//! Versioned JSON checkpoints for network parameters and optimizer state.
//!
//! Floats are written in shortest round-trip decimal form, so a save/load
//! cycle reproduces every parameter bit for bit at 64-bit precision.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network};
use crate::optim::AdamState;
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Serialized form of a network (plus optional optimizer state).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Dimension chain `[input, hidden.., output]`.
    pub layer_dims: Vec<usize>,
    /// Activation tag per layer (`"relu"` / `"identity"`).
    pub activation_tags: Vec<String>,
    /// Per layer, the weight matrix flattened row-major.
    pub weights: Vec<Vec<f64>>,
    /// Per layer, the bias vector.
    pub biases: Vec<Vec<f64>>,
    pub optimizer: Option<OptimizerCheckpoint>,
}

/// Serialized Adam state; moment arrays follow `[W0, b0, W1, b1, ..]` order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerCheckpoint {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn capture(net: &Network, optimizer: Option<&AdamState>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            layer_dims: net.dims(),
            activation_tags: net
                .layers()
                .iter()
                .map(|l| l.activation().tag().to_string())
                .collect(),
            weights: net
                .layers()
                .iter()
                .map(|l| l.weights().data().to_vec())
                .collect(),
            biases: net.layers().iter().map(|l| l.bias().data().to_vec()).collect(),
            optimizer: optimizer.map(|state| OptimizerCheckpoint {
                step: state.step_count(),
                learning_rate: state.learning_rate(),
                beta1: state.beta1(),
                beta2: state.beta2(),
                epsilon: state.epsilon(),
                first_moment: state.first_moment().iter().map(|t| t.data().to_vec()).collect(),
                second_moment: state
                    .second_moment()
                    .iter()
                    .map(|t| t.data().to_vec())
                    .collect(),
            }),
        }
    }

    pub fn restore(&self) -> Result<(Network, Option<AdamState>)> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported checkpoint format version {}",
                self.format_version
            )));
        }
        let layer_count = self.layer_dims.len().saturating_sub(1);
        if self.activation_tags.len() != layer_count
            || self.weights.len() != layer_count
            || self.biases.len() != layer_count
        {
            return Err(Error::Input("checkpoint layer arrays are inconsistent".into()));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for l in 0..layer_count {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            layers.push(Layer::new(
                Tensor::from_vec(&[fan_out, fan_in], self.weights[l].clone())?,
                Tensor::from_vec(&[fan_out], self.biases[l].clone())?,
                Activation::from_tag(&self.activation_tags[l])?,
            )?);
        }
        let net = Network::from_layers(layers)?;
        let optimizer = match &self.optimizer {
            None => None,
            Some(opt) => {
                let shapes: Vec<Vec<usize>> =
                    net.params().iter().map(|p| p.shape().to_vec()).collect();
                if opt.first_moment.len() != shapes.len() || opt.second_moment.len() != shapes.len()
                {
                    return Err(Error::Input(
                        "optimizer checkpoint does not match network parameters".into(),
                    ));
                }
                let restore_moments = |arrays: &[Vec<f64>]| -> Result<Vec<Tensor>> {
                    arrays
                        .iter()
                        .zip(&shapes)
                        .map(|(a, s)| Tensor::from_vec(s, a.clone()))
                        .collect()
                };
                Some(AdamState::from_parts(
                    opt.step,
                    opt.learning_rate,
                    opt.beta1,
                    opt.beta2,
                    opt.epsilon,
                    restore_moments(&opt.first_moment)?,
                    restore_moments(&opt.second_moment)?,
                ))
            }
        };
        Ok((net, optimizer))
    }
}

pub fn save_checkpoint(
    net: &Network,
    optimizer: Option<&AdamState>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let doc = Checkpoint::capture(net, optimizer);
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network, Option<AdamState>)> {
    let text = fs::read_to_string(path)?;
    let doc: Checkpoint = serde_json::from_str(&text)?;
    doc.restore()
}
