//! Toy-scale trainable noise estimator and conditional denoiser.
//!
//! `E` maps a noisy RGB image to a six-channel noise map; `R` takes the
//! image concatenated with a map and predicts the noise residual, so the
//! denoised image is `y − R(y, map)`. Both are plain conv + ReLU stacks
//! without batch normalization, trained jointly on estimation, blind and
//! non-blind residual losses with Adam.

mod conv;
mod loss;
mod model;
mod net;
mod optim;
mod tensor;
mod train;

use std::sync::Arc;

pub use conv::{conv2d_backward, conv2d_forward};
pub use loss::{
    loss_blind, loss_estimation, loss_nonblind, loss_total, quadratic_loss, quadratic_loss_grad,
    LossWeights,
};
pub use model::{Batch, LossParts, Model, ModelConfig, CHECKPOINT_MAGIC, IMAGE_CHANNELS};
pub use net::{ConvLayer, ConvNet, Trace};
pub use optim::Adam;
pub use tensor::Tensor;
pub use train::{train, train_with, DataMix, PatchStream, StepLog, TrainConfig, TrainLog};

use crate::error::Result;
use crate::estimation::NoiseEstimator;
use crate::image::Image;
use crate::noise_map::NoiseMap;

/// Noise map from the estimator subnetwork of a model.
pub fn estimate_map_learned(img: &Image, model: &Model) -> Result<NoiseMap> {
    model.estimate_image(img)
}

/// [`NoiseEstimator`] backed by a trained model.
#[derive(Clone, Debug)]
pub struct LearnedEstimator {
    model: Arc<Model>,
}

impl LearnedEstimator {
    pub fn new(model: Arc<Model>) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }
}

impl NoiseEstimator for LearnedEstimator {
    fn estimate(&self, img: &Image) -> Result<NoiseMap> {
        self.model.estimate_image(img)
    }

    fn name(&self) -> &'static str {
        "learned"
    }
}
