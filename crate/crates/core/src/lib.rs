//! Pixel-shuffle down-sampling (PD) toolkit: adapts denoisers built for
//! pixel-independent noise (AWGN / impulse noise) to spatially correlated
//! real noise.
//!
//! The pieces, bottom-up:
//!
//! - [`image`], [`io`], [`rng`]: planar raster, PNG/PNM I/O, seeded streams.
//! - [`noise`], [`noise_map`]: synthetic noise families with their
//!   six-channel ground-truth level maps.
//! - [`shuffle`]: the lossless PD permutation and sub-image refill.
//! - [`estimation`]: pixel-wise noise maps, histogram changing factor and
//!   stride adaptation.
//! - [`denoise`]: non-blind denoisers and the PD refinement pipeline.
//! - [`neural`]: a small trainable estimator + conditional denoiser pair.
//! - [`metrics`]: PSNR / SSIM.

pub mod denoise;
pub mod error;
pub mod estimation;
pub mod image;
pub mod io;
pub mod metrics;
pub mod neural;
pub mod noise;
pub mod noise_map;
pub mod rng;
pub mod scene;
pub mod shuffle;

pub use denoise::{
    blend, denoise_nonblind, flat_region_map, pd_refine, DenoiserKind, PdConfig, PdMode, PdReport,
};
pub use error::{Error, Result};
pub use estimation::{adapt_stride, AdaptationResult, ClassicalEstimator, NoiseEstimator};
pub use image::Image;
pub use neural::{Model, ModelConfig, Tensor};
pub use noise::{NoiseKind, NoiseSpec};
pub use noise_map::NoiseMap;
pub use rng::Rng;
pub use shuffle::{pd_down, pd_up, Mosaic};
