//! Two-layer GCN trained from scratch.
//!
//! `logits = P · relu(P · X · W0) · W1`, log-softmax output, NLL on the
//! training nodes plus `λ` times the calibration loss on the unlabelled
//! (validation ∪ test) nodes. Gradients are written out by hand and checked
//! against finite differences in the tests.

mod adam;
mod loss;
mod model;
mod split;
mod train;

pub use adam::AdamState;
pub use loss::{accuracy, calib_loss, nll_loss, total_loss};
pub use model::{backward, gcn_forward, logit_gradient, ForwardPass, Gradients};
pub use split::{make_split, Split};
pub use train::{evaluate, train, EpochRecord, TrainOutcome, Trainer};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Uniform on `±√(6/(fan_in + fan_out))`.
    GlorotUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
    pub init: InitScheme,
}

impl GcnParams {
    pub fn glorot(features: usize, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        if features == 0 || hidden == 0 || classes < 2 {
            return Err(Error::domain(format!(
                "degenerate GCN shape {features}×{hidden}×{classes}"
            )));
        }
        let mut rng = rng_from_seed(derive_seed(seed, stream::INIT));
        let mut draw = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
        };
        let w0 = draw(features, hidden);
        let w1 = draw(hidden, classes);
        Ok(GcnParams { w0, w1, init: InitScheme::GlorotUniform })
    }

    pub fn hidden(&self) -> usize {
        self.w0.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.w1.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.w0.iter().chain(self.w1.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            weight_decay: 5e-4,
            lambda: 0.0,
            epochs: 400,
            dropout: 0.5,
            hidden: 64,
            seed: 0,
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::domain(format!("lambda = {} outside [0, 1]", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::domain("epochs must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::domain("hidden width must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::domain(format!("dropout = {} outside [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::domain("learning rate must be positive, weight decay non-negative"));
        }
        Ok(())
    }
}
