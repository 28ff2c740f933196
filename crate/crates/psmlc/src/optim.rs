//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Gradients, Network};
use crate::tensor::Tensor;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam moment accumulators, one tensor per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl AdamState {
    /// Fresh state for the given network with standard constants
    /// (beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8).
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor> = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            step: 0,
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn from_parts(
        step: u64,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        first_moment: Vec<Tensor>,
        second_moment: Vec<Tensor>,
    ) -> Self {
        Self {
            step,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first_moment,
            second_moment,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn first_moment(&self) -> &[Tensor] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Tensor] {
        &self.second_moment
    }

    /// Apply one bias-corrected Adam update to every parameter.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let mut params = net.params_mut();
        if grads.tensors().len() != params.len()
            || self.first_moment.len() != params.len()
        {
            return Err(Error::State(
                "optimizer state does not match network parameters".into(),
            ));
        }
        for (p, g) in params.iter().zip(grads.tensors()) {
            if g.shape() != p.shape() {
                return Err(Error::State(format!(
                    "gradient shape {:?} does not match parameter shape {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
        }
        let t = self.step + 1;
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.tensors())
            .zip(self.first_moment.iter_mut().zip(&mut self.second_moment))
        {
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let grad = g.data()[i];
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * grad;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * grad * grad;
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        self.step = t;
        Ok(())
    }
}
