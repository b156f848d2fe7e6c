//! Non-blind denoisers and the PD refinement pipeline.

mod dct;
mod pipeline;

use std::sync::Arc;

pub use dct::{
    dct2, dct_denoise, dct_denoise_with_step, idct2, DCT_SIZE, DCT_STEP, THRESHOLD_FACTOR,
};
pub use pipeline::{pd_refine, EstimatorKind, PdConfig, PdMode, PdReport, Timings, FEATHER};

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::neural::Model;
use crate::noise_map::NoiseMap;

/// A denoiser conditioned on a pixel-wise noise map.
#[derive(Clone, Debug)]
pub enum DenoiserKind {
    DctThreshold,
    LearnedToy(Arc<Model>),
    /// Returns the stored clean image. For tests and ablations only.
    Oracle(Image),
}

impl DenoiserKind {
    pub fn name(&self) -> &'static str {
        match self {
            DenoiserKind::DctThreshold => "dct",
            DenoiserKind::LearnedToy(_) => "learned",
            DenoiserKind::Oracle(_) => "oracle",
        }
    }

    /// Applies `f` to the oracle's clean reference so it follows the same
    /// geometric transform as the noisy input. Other kinds are unchanged.
    pub fn reframe(&self, f: impl FnOnce(&Image) -> Result<Image>) -> Result<DenoiserKind> {
        Ok(match self {
            DenoiserKind::Oracle(clean) => DenoiserKind::Oracle(f(clean)?),
            other => other.clone(),
        })
    }
}

pub fn denoise_nonblind(y: &Image, map: &NoiseMap, kind: &DenoiserKind) -> Result<Image> {
    map.check_matches(y)?;
    match kind {
        DenoiserKind::DctThreshold => dct_denoise(y, map),
        DenoiserKind::LearnedToy(model) => model.denoise_image(y, map),
        DenoiserKind::Oracle(clean) => {
            y.check_same_shape(clean, "oracle reference")?;
            Ok(clean.clone())
        }
    }
}

/// Every channel replaced by its own spatial maximum.
pub fn flat_region_map(map: &NoiseMap) -> NoiseMap {
    let mut out = map.clone();
    for c in 0..6 {
        let plane = out.plane_mut(c);
        let m = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        plane.fill(if m.is_finite() { m } else { 0.0 });
    }
    out
}

/// `k·F + (1 − k)·T`, exact at both endpoints.
pub fn blend(flat: &Image, texture: &Image, k: f64) -> Result<Image> {
    if !(0.0..=1.0).contains(&k) {
        return Err(invalid(format!("k must be in [0, 1], got {k}")));
    }
    if !flat.same_shape(texture) {
        return Err(Error::DimensionMismatch(format!(
            "blend {}x{}x{} with {}x{}x{}",
            flat.width(),
            flat.height(),
            flat.channels(),
            texture.width(),
            texture.height(),
            texture.channels()
        )));
    }
    texture.zip_map(flat, |t, f| ((1.0 - k) * t as f64 + k * f as f64) as f32)
}
