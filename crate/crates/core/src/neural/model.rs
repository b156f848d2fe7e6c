//! Estimator `E` and conditional denoiser `R` with joint residual training,
//! plus the `PDNN1` checkpoint format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::noise_map::{NoiseMap, MAP_CHANNELS};
use crate::rng::Rng;

use super::loss::{loss_total, quadratic_loss, quadratic_loss_grad, LossWeights};
use super::net::{ConvLayer, ConvNet};
use super::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"PDNN1";
/// Colour channels the networks operate on; grayscale inputs are replicated.
pub const IMAGE_CHANNELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub est_layers: usize,
    pub den_layers: usize,
    /// Feature width of the hidden layers.
    pub channels: usize,
    pub kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            est_layers: 3,
            den_layers: 4,
            channels: 16,
            kernel: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.est_layers < 2 || self.den_layers < 2 {
            return Err(invalid("est_layers and den_layers must be >= 2"));
        }
        if self.channels == 0 {
            return Err(invalid("channels must be positive"));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(invalid(format!("kernel must be odd, got {}", self.kernel)));
        }
        Ok(())
    }
}

/// One training batch: noisy inputs `y`, residual targets `v = y − x` and
/// ground-truth maps `e`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub noisy: Tensor,
    pub residual: Tensor,
    pub map: Tensor,
}

/// Individual loss terms of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub estimation: f64,
    pub blind: f64,
    pub nonblind: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    seed: u64,
    step: usize,
    estimator: ConvNet,
    denoiser: ConvNet,
}

#[derive(Serialize, Deserialize)]
struct LayerShape {
    name: String,
    shape: [usize; 4],
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    layers: Vec<LayerShape>,
    seed: u64,
    step: usize,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let estimator = ConvNet::new(
            IMAGE_CHANNELS,
            config.channels,
            MAP_CHANNELS,
            config.est_layers,
            config.kernel,
            &mut rng,
        )?;
        let denoiser = ConvNet::new(
            IMAGE_CHANNELS + MAP_CHANNELS,
            config.channels,
            IMAGE_CHANNELS,
            config.den_layers,
            config.kernel,
            &mut rng,
        )?;
        Ok(Self {
            config,
            seed,
            step: 0,
            estimator,
            denoiser,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> usize {
        self.step
    }

    pub(crate) fn set_step(&mut self, step: usize) {
        self.step = step;
    }

    pub fn estimator(&self) -> &ConvNet {
        &self.estimator
    }

    pub fn estimator_mut(&mut self) -> &mut ConvNet {
        &mut self.estimator
    }

    pub fn denoiser(&self) -> &ConvNet {
        &self.denoiser
    }

    pub fn denoiser_mut(&mut self) -> &mut ConvNet {
        &mut self.denoiser
    }

    /// Estimator then denoiser parameters, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.estimator.params().chain(self.denoiser.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.estimator
            .params_mut()
            .chain(self.denoiser.params_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.estimator.zero_grad();
        self.denoiser.zero_grad();
    }

    fn check_input(y: &Tensor) -> Result<()> {
        if y.c() != IMAGE_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "network input has {} channels, expected {IMAGE_CHANNELS}",
                y.c()
            )));
        }
        Ok(())
    }

    /// Six-channel noise map, hard-clamped to `[0, 1]`.
    pub fn forward_estimator(&self, y: &Tensor) -> Result<Tensor> {
        Self::check_input(y)?;
        Ok(self.estimator.forward(y)?.map(|v| v.clamp(0.0, 1.0)))
    }

    /// Predicted residual `v̂`; the denoised image is `y − v̂`.
    pub fn forward_denoiser(&self, y: &Tensor, map: &Tensor) -> Result<Tensor> {
        Self::check_input(y)?;
        self.denoiser.forward(&Tensor::concat_channels(y, map)?)
    }

    /// Composite loss of one batch; when `accumulate` is set, parameter
    /// gradients are added to the `grad` buffers.
    pub fn loss(&mut self, batch: &Batch, w: LossWeights, accumulate: bool) -> Result<LossParts> {
        Self::check_input(&batch.noisy)?;
        let (raw, est_trace) = self.estimator.forward_traced(&batch.noisy)?;
        let e_hat = raw.map(|v| v.clamp(0.0, 1.0));
        let blind_in = Tensor::concat_channels(&batch.noisy, &e_hat)?;
        let (v_blind, blind_trace) = self.denoiser.forward_traced(&blind_in)?;
        let nb_in = Tensor::concat_channels(&batch.noisy, &batch.map)?;
        let (v_nb, nb_trace) = self.denoiser.forward_traced(&nb_in)?;

        let estimation = quadratic_loss(&e_hat, &batch.map)?;
        let blind = quadratic_loss(&v_blind, &batch.residual)?;
        let nonblind = quadratic_loss(&v_nb, &batch.residual)?;
        let parts = LossParts {
            estimation,
            blind,
            nonblind,
            total: loss_total(estimation, blind, nonblind, w),
        };
        if !accumulate {
            return Ok(parts);
        }

        let g_nb = quadratic_loss_grad(&v_nb, &batch.residual, w.gamma)?;
        self.denoiser.backward(&nb_trace, &g_nb)?;
        let g_blind = quadratic_loss_grad(&v_blind, &batch.residual, w.beta)?;
        let g_in = self.denoiser.backward(&blind_trace, &g_blind)?;
        let (_, g_map) = g_in.split_channels(IMAGE_CHANNELS)?;

        let mut g_e = quadratic_loss_grad(&e_hat, &batch.map, w.alpha)?;
        for ((g, &gm), &r) in g_e.data_mut().iter_mut().zip(g_map.data()).zip(raw.data()) {
            *g = if (0.0..=1.0).contains(&r) {
                *g + gm
            } else {
                0.0
            };
        }
        self.estimator.backward(&est_trace, &g_e)?;
        Ok(parts)
    }

    /// Noise map of an image (grayscale inputs are replicated to RGB).
    pub fn estimate_image(&self, img: &Image) -> Result<NoiseMap> {
        let y = Tensor::from_images(&[img.to_rgb()])?;
        self.forward_estimator(&y)?.to_noise_map(0)
    }

    /// `y − R(y, map)` clamped to `[0, 1]`, returned with the input's channel
    /// count.
    pub fn denoise_image(&self, img: &Image, map: &NoiseMap) -> Result<Image> {
        if !map.matches(img) {
            return Err(Error::DimensionMismatch(format!(
                "map {}x{} for image {}x{}",
                map.width(),
                map.height(),
                img.width(),
                img.height()
            )));
        }
        let rgb = img.to_rgb();
        let y = Tensor::from_images(std::slice::from_ref(&rgb))?;
        let v = self.forward_denoiser(&y, &Tensor::from_maps(std::slice::from_ref(map))?)?;
        let out = rgb.zip_map(&v.to_image(0)?, |a, b| (a - b).clamp(0.0, 1.0))?;
        Ok(if img.channels() == 1 {
            out.to_gray()
        } else {
            out
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut layers = Vec::new();
        for (net, prefix) in [(&self.estimator, "est"), (&self.denoiser, "den")] {
            for (i, l) in net.layers().iter().enumerate() {
                layers.push(LayerShape {
                    name: format!("{prefix}.{i}.weight"),
                    shape: l.weight.shape(),
                });
                layers.push(LayerShape {
                    name: format!("{prefix}.{i}.bias"),
                    shape: l.bias.shape(),
                });
            }
        }
        let header = serde_json::to_vec(&Header {
            config: self.config,
            layers,
            seed: self.seed,
            step: self.step,
        })?;
        let mut out = Vec::with_capacity(9 + header.len() + 4 * self.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.params() {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 9 || &bytes[..5] != CHECKPOINT_MAGIC {
            return Err(corrupt("missing PDNN1 magic"));
        }
        let hlen = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(9..9 + hlen)
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| corrupt(&format!("bad header: {e}")))?;
        let model = Model::new(header.config, header.seed)
            .map_err(|e| corrupt(&format!("bad config: {e}")))?;
        let expected: Vec<[usize; 4]> = model.params().map(Tensor::shape).collect();
        let found: Vec<[usize; 4]> = header.layers.iter().map(|l| l.shape).collect();
        if expected != found {
            return Err(corrupt("layer shapes disagree with config"));
        }
        let blob = &bytes[9 + hlen..];
        let n: usize = expected.iter().map(|s| s.iter().product::<usize>()).sum();
        if blob.len() != 4 * n {
            return Err(corrupt(&format!(
                "parameter blob has {} bytes, expected {}",
                blob.len(),
                4 * n
            )));
        }
        let mut values = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
        let mut split = |net: &ConvNet| -> Result<ConvNet> {
            let layers = net
                .layers()
                .iter()
                .map(|l| {
                    let w: Vec<f32> = values.by_ref().take(l.weight.len()).collect();
                    let b: Vec<f32> = values.by_ref().take(l.bias.len()).collect();
                    Ok(ConvLayer {
                        weight: Tensor::from_vec(l.weight.shape(), w)?,
                        bias: Tensor::from_vec(l.bias.shape(), b)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ConvNet::from_layers(layers)
        };
        let estimator = split(&model.estimator)?;
        let denoiser = split(&model.denoiser)?;
        Ok(Self {
            config: header.config,
            seed: header.seed,
            step: header.step,
            estimator,
            denoiser,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            est_layers: 2,
            den_layers: 3,
            channels: 4,
            kernel: 3,
        }
    }

    fn zeroed(mut m: Model) -> Model {
        for p in m.params_mut() {
            p.data_mut().fill(0.0);
        }
        m
    }

    #[test]
    fn output_shapes() {
        let m = Model::new(small(), 1).unwrap();
        let y = Tensor::zeros([2, 3, 7, 5]);
        assert_eq!(m.forward_estimator(&y).unwrap().shape(), [2, 6, 7, 5]);
        let map = Tensor::zeros([2, 6, 7, 5]);
        assert_eq!(m.forward_denoiser(&y, &map).unwrap().shape(), [2, 3, 7, 5]);
        assert!(m.forward_estimator(&Tensor::zeros([1, 1, 4, 4])).is_err());
    }

    #[test]
    fn zero_weights_give_constant_map_and_identity_denoiser() {
        let m = zeroed(Model::new(small(), 2).unwrap());
        let img =
            Image::from_fn(12, 9, 3, |x, y, c| ((x * 7 + y * 3 + c) % 11) as f32 / 10.0).unwrap();
        let map = m.estimate_image(&img).unwrap();
        assert!(map.data().iter().all(|&v| v == 0.0));
        assert_eq!(m.denoise_image(&img, &map).unwrap(), img);
    }

    #[test]
    fn nonblind_loss_leaves_estimator_untouched() {
        let mut m = Model::new(small(), 3).unwrap();
        let mut rng = Rng::new(4);
        let mut rand = |shape: [usize; 4]| {
            let n = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| rng.uniform() as f32).collect()).unwrap()
        };
        let batch = Batch {
            noisy: rand([2, 3, 6, 6]),
            residual: rand([2, 3, 6, 6]),
            map: rand([2, 6, 6, 6]),
        };
        let w = LossWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 1.0,
        };
        m.loss(&batch, w, true).unwrap();
        assert!(m
            .estimator()
            .params()
            .all(|p| p.grad().unwrap().iter().all(|&g| g == 0.0)));
        assert!(m
            .denoiser()
            .params()
            .any(|p| p.grad().unwrap().iter().any(|&g| g != 0.0)));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = Model::new(small(), 9).unwrap();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..5], b"PDNN1");
        let back = Model::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn checkpoint_header_is_json() {
        let bytes = Model::new(small(), 9).unwrap().to_bytes().unwrap();
        let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let v: serde_json::Value = serde_json::from_slice(&bytes[9..9 + hlen]).unwrap();
        assert_eq!(v["seed"], 9);
        assert_eq!(v["config"]["channels"], 4);
        assert_eq!(v["layers"][0]["name"], "est.0.weight");
        assert_eq!(v["layers"][0]["shape"], serde_json::json!([4, 3, 3, 3]));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let bytes = Model::new(small(), 9).unwrap().to_bytes().unwrap();
        assert!(matches!(
            Model::from_bytes(b"NOPE"),
            Err(Error::CorruptCheckpoint(_))
        ));
        assert!(Model::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Model::from_bytes(&bad).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(Model::new(
            ModelConfig {
                est_layers: 1,
                ..small()
            },
            0
        )
        .is_err());
        assert!(Model::new(
            ModelConfig {
                kernel: 2,
                ..small()
            },
            0
        )
        .is_err());
    }
}
