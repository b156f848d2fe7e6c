//! Seeded synthetic patch stream and the training loop.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::{extract_patches, Image};
use crate::noise::{NoiseSpec, MAX_RATIO, MAX_SIGMA};
use crate::noise_map::NoiseMap;
use crate::rng::Rng;
use crate::scene;

use super::loss::LossWeights;
use super::model::{Batch, LossParts, Model};
use super::optim::Adam;
use super::tensor::Tensor;

const POOL_IMAGES: usize = 8;
const POOL_SIDE: usize = 96;

/// Noise drawn for each training patch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DataMix {
    /// AWGN with σ uniform in `[min_sigma, max_sigma]`.
    Awgn { min_sigma: f64, max_sigma: f64 },
    /// Single-type (AWGN or RVIN) and mixed AWGN + RVIN noise in equal
    /// proportion, levels uniform over their full ranges.
    Mixed,
}

impl Default for DataMix {
    fn default() -> Self {
        DataMix::Awgn {
            min_sigma: 5.0,
            max_sigma: 50.0,
        }
    }
}

impl DataMix {
    fn draw(&self, rng: &mut Rng) -> NoiseSpec {
        match *self {
            DataMix::Awgn {
                min_sigma,
                max_sigma,
            } => NoiseSpec::awgn(rng.uniform_in(min_sigma, max_sigma)),
            DataMix::Mixed => {
                let sigma = rng.uniform_in(0.0, MAX_SIGMA);
                let ratio = rng.uniform_in(0.0, MAX_RATIO);
                if rng.uniform() < 0.5 {
                    NoiseSpec::mixed(sigma, ratio)
                } else if rng.uniform() < 0.5 {
                    NoiseSpec::awgn(sigma)
                } else {
                    NoiseSpec::rvin(ratio)
                }
            }
        }
    }
}

/// Deterministic stream of noisy patches cut from procedural scenes.
pub struct PatchStream {
    rng: Rng,
    pool: Vec<Image>,
    patch: usize,
    mix: DataMix,
}

impl PatchStream {
    pub fn new(seed: u64, patch: usize, mix: DataMix) -> Result<Self> {
        if patch == 0 || patch > POOL_SIDE {
            return Err(invalid(format!(
                "patch size must be in 1..={POOL_SIDE}, got {patch}"
            )));
        }
        let mut rng = Rng::new(seed);
        let pool = (0..POOL_IMAGES)
            .map(|_| scene::natural(POOL_SIDE, POOL_SIDE, 3, &mut rng))
            .collect();
        Ok(Self {
            rng,
            pool,
            patch,
            mix,
        })
    }

    pub fn next_batch(&mut self, n: usize) -> Result<Batch> {
        let mut noisy = Vec::with_capacity(n);
        let mut residual = Vec::with_capacity(n);
        let mut maps: Vec<NoiseMap> = Vec::with_capacity(n);
        for _ in 0..n {
            let src = &self.pool[self.rng.below(self.pool.len())];
            let clean = extract_patches(src, self.patch, 1, &mut self.rng, 1)?.remove(0);
            let spec = self.mix.draw(&mut self.rng);
            let (y, map) = spec.apply(&clean, &mut self.rng)?;
            residual.push(y.residual(&clean)?);
            noisy.push(y);
            maps.push(map);
        }
        Ok(Batch {
            noisy: Tensor::from_images(&noisy)?,
            residual: Tensor::from_images(&residual)?,
            map: Tensor::from_maps(&maps)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub patch: usize,
    pub lr: f64,
    /// Learning rate after the drop.
    pub lr_final: f64,
    /// Fraction of `steps` after which the learning rate drops.
    pub drop_at: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub mix: DataMix,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            batch: 16,
            patch: 25,
            lr: 1e-3,
            lr_final: 1e-4,
            drop_at: 0.6,
            seed: 0,
            weights: LossWeights::default(),
            mix: DataMix::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch == 0 {
            return Err(invalid("batch must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr_final >= 0.0) {
            return Err(invalid("learning rates must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.drop_at) {
            return Err(invalid("drop_at must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        if (step as f64) < self.drop_at * self.steps as f64 {
            self.lr
        } else {
            self.lr_final
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: LossParts,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
}

impl TrainLog {
    /// Moving average of the total loss over full windows of `window` steps.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let totals: Vec<f64> = self.steps.iter().map(|s| s.loss.total).collect();
        if window == 0 || totals.len() < window {
            return Vec::new();
        }
        totals
            .windows(window)
            .map(|w| w.iter().sum::<f64>() / window as f64)
            .collect()
    }
}

pub fn train(model: &mut Model, cfg: &TrainConfig) -> Result<TrainLog> {
    train_with(model, cfg, |_| {})
}

/// Runs `cfg.steps` Adam steps on the joint objective, calling `on_step`
/// after each one. Aborts with [`Error::Diverged`] on a non-finite loss.
pub fn train_with(
    model: &mut Model,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepLog),
) -> Result<TrainLog> {
    cfg.validate()?;
    let mut stream = PatchStream::new(cfg.seed, cfg.patch, cfg.mix)?;
    let mut opt = Adam::default();
    let mut log = TrainLog::default();
    for step in 0..cfg.steps {
        let batch = stream.next_batch(cfg.batch)?;
        model.zero_grad();
        let loss = model.loss(&batch, cfg.weights, true)?;
        if !loss.total.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!(
                    "loss {} (estimation {}, blind {}, non-blind {})",
                    loss.total, loss.estimation, loss.blind, loss.nonblind
                ),
            });
        }
        let lr = cfg.lr_at(step);
        opt.step(model.params_mut(), lr);
        model.set_step(model.step() + 1);
        let entry = StepLog { step, lr, loss };
        on_step(&entry);
        log.steps.push(entry);
    }
    Ok(log)
}
