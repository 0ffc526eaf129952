//! Fully-connected regression network mapping a scattering matrix straight to
//! permittivity and conductivity maps.

mod adam;
mod encode;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamState};
pub use encode::{decode_target, encode_input, encode_target, raw_features, InputNorm, TargetScaling};
pub use model::{mlp_backward, mlp_forward, BatchGradients, MlpModel};
pub use train::{infer, infer_batch, train, EpochStats, Inference, TrainingData, TrainingReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    /// Linear hidden units; only useful for tests.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
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

    pub(crate) fn from_tag(t: u8) -> Option<Self> {
        Some(match t {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Identity,
            _ => return None,
        })
    }
}

/// Layer widths and hidden activation; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>, output_dim: usize, activation: Activation) -> Result<Self> {
        let a = MlpArchitecture {
            input_dim,
            hidden_layers,
            output_dim,
            activation,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::invalid(format!("all layer widths must be >= 1: {self:?}")));
        }
        Ok(())
    }

    /// `[input, hidden..., output]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_layers);
        w.push(self.output_dim);
        w
    }

    pub fn n_params(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// SNR (dB) of the noise added to every training input; `inf` trains clean.
    pub snr_db: f64,
    pub seed: u64,
    /// Factor applied to the initial output-layer weights (0 starts from the
    /// mean training map).
    pub output_init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_layers: vec![256, 256, 256],
            activation: Activation::Relu,
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            epochs: 30,
            batch_size: 100,
            snr_db: 30.0,
            seed: 42,
            output_init_scale: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps_adam > 0.0) {
            return Err(Error::invalid("adam requires beta1, beta2 in [0, 1) and eps > 0"));
        }
        if !(self.output_init_scale >= 0.0 && self.output_init_scale.is_finite()) {
            return Err(Error::invalid("output_init_scale must be finite and >= 0"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("training SNR must be finite or +inf"));
        }
        Ok(())
    }
}
