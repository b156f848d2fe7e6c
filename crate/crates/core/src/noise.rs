//! Synthetic noise families and their ground-truth noise-level maps.
//!
//! Levels are given in 8-bit units (σ ∈ [0, 75]) and corruption ratios in
//! `[0, 0.3]`. Noisy images are clamped to `[0, 1]`; the returned maps
//! describe the pre-clamp parameters.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::Image;
use crate::noise_map::{NoiseMap, AWGN_SCALE, RVIN_SCALE};
use crate::rng::Rng;

pub const MAX_SIGMA: f64 = 75.0;
pub const MAX_RATIO: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Awgn,
    Rvin,
    MixedAwgnRvin,
    SignalDependent,
    CorrelatedAwgn,
}

/// Parameters of one synthetic noise process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// AWGN std in 8-bit units, clamped to `[0, 75]`.
    pub sigma: f64,
    /// RVIN corruption fraction, clamped to `[0, 0.3]`.
    pub ratio: f64,
    pub sigma_s: f64,
    pub sigma_c: f64,
    pub upscale: usize,
    /// Corrupt RGB channels independently for RVIN (otherwise whole pixels).
    pub per_channel: bool,
}

impl NoiseSpec {
    fn base(kind: NoiseKind) -> Self {
        Self {
            kind,
            sigma: 0.0,
            ratio: 0.0,
            sigma_s: 0.0,
            sigma_c: 0.0,
            upscale: 2,
            per_channel: true,
        }
    }

    pub fn awgn(sigma: f64) -> Self {
        Self {
            sigma: sigma.clamp(0.0, MAX_SIGMA),
            ..Self::base(NoiseKind::Awgn)
        }
    }

    pub fn rvin(ratio: f64) -> Self {
        Self {
            ratio: ratio.clamp(0.0, MAX_RATIO),
            ..Self::base(NoiseKind::Rvin)
        }
    }

    pub fn mixed(sigma: f64, ratio: f64) -> Self {
        Self {
            sigma: sigma.clamp(0.0, MAX_SIGMA),
            ratio: ratio.clamp(0.0, MAX_RATIO),
            ..Self::base(NoiseKind::MixedAwgnRvin)
        }
    }

    pub fn signal_dependent(sigma_s: f64, sigma_c: f64) -> Self {
        Self {
            sigma_s: sigma_s.max(0.0),
            sigma_c: sigma_c.max(0.0),
            ..Self::base(NoiseKind::SignalDependent)
        }
    }

    pub fn correlated(sigma: f64, upscale: usize) -> Self {
        Self {
            sigma: sigma.clamp(0.0, MAX_SIGMA),
            upscale,
            ..Self::base(NoiseKind::CorrelatedAwgn)
        }
    }

    /// Corrupts `img`. Correlated noise has no pixel-wise ground truth and
    /// reports its nominal σ as a uniform map.
    pub fn apply(&self, img: &Image, rng: &mut Rng) -> Result<(Image, NoiseMap)> {
        match self.kind {
            NoiseKind::Awgn => add_awgn(img, self.sigma, rng),
            NoiseKind::Rvin => add_rvin(img, self.ratio, rng, self.per_channel),
            NoiseKind::MixedAwgnRvin => add_mixed(img, self.sigma, self.ratio, rng),
            NoiseKind::SignalDependent => {
                add_signal_dependent(img, self.sigma_s, self.sigma_c, rng)
            }
            NoiseKind::CorrelatedAwgn => {
                let noisy = add_correlated_awgn(img, self.sigma, self.upscale, rng)?;
                let level = (self.sigma / AWGN_SCALE) as f32;
                let map = NoiseMap::uniform(img.width(), img.height(), [level; 3], [0.0; 3]);
                Ok((noisy, map))
            }
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(0.0..=MAX_SIGMA).contains(&sigma) {
        return Err(invalid(format!("sigma {sigma} outside [0, {MAX_SIGMA}]")));
    }
    Ok(())
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(0.0..=MAX_RATIO).contains(&ratio) {
        return Err(invalid(format!("ratio {ratio} outside [0, {MAX_RATIO}]")));
    }
    Ok(())
}

/// Additive white Gaussian noise with std `sigma / 255`.
pub fn add_awgn(img: &Image, sigma: f64, rng: &mut Rng) -> Result<(Image, NoiseMap)> {
    check_sigma(sigma)?;
    let level = (sigma / AWGN_SCALE) as f32;
    let map = NoiseMap::uniform(img.width(), img.height(), [level; 3], [0.0; 3]);
    if sigma == 0.0 {
        return Ok((img.clone(), map));
    }
    let std = sigma / 255.0;
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = (*v as f64 + std * rng.standard_normal()).clamp(0.0, 1.0) as f32;
    }
    Ok((out, map))
}

/// Random-value impulse noise: each sample (or each pixel, when
/// `per_channel` is false) is replaced by `Uniform[0, 1]` with probability
/// `ratio`.
pub fn add_rvin(
    img: &Image,
    ratio: f64,
    rng: &mut Rng,
    per_channel: bool,
) -> Result<(Image, NoiseMap)> {
    let (out, _) = add_rvin_masked(img, ratio, rng, per_channel)?;
    let level = (ratio / RVIN_SCALE) as f32;
    let map = NoiseMap::uniform(img.width(), img.height(), [0.0; 3], [level; 3]);
    Ok((out, map))
}

/// [`add_rvin`] that also returns which samples were replaced (planar order).
pub fn add_rvin_masked(
    img: &Image,
    ratio: f64,
    rng: &mut Rng,
    per_channel: bool,
) -> Result<(Image, Vec<bool>)> {
    check_ratio(ratio)?;
    let mut out = img.clone();
    let mut mask = vec![false; img.len()];
    if ratio == 0.0 {
        return Ok((out, mask));
    }
    let n = img.pixel_count();
    let ch = img.channels();
    let data = out.data_mut();
    if per_channel {
        for (v, hit) in data.iter_mut().zip(mask.iter_mut()) {
            if rng.uniform() < ratio {
                *v = rng.uniform() as f32;
                *hit = true;
            }
        }
    } else {
        for i in 0..n {
            if rng.uniform() < ratio {
                for c in 0..ch {
                    data[c * n + i] = rng.uniform() as f32;
                    mask[c * n + i] = true;
                }
            }
        }
    }
    Ok((out, mask))
}

/// AWGN followed by per-channel RVIN on the AWGN-corrupted image.
pub fn add_mixed(img: &Image, sigma: f64, ratio: f64, rng: &mut Rng) -> Result<(Image, NoiseMap)> {
    let (noisy, _, _) = add_mixed_masked(img, sigma, ratio, rng)?;
    let map = NoiseMap::uniform(
        img.width(),
        img.height(),
        [(sigma / AWGN_SCALE) as f32; 3],
        [(ratio / RVIN_SCALE) as f32; 3],
    );
    Ok((noisy, map))
}

/// [`add_mixed`] returning the intermediate AWGN image and the impulse mask.
pub fn add_mixed_masked(
    img: &Image,
    sigma: f64,
    ratio: f64,
    rng: &mut Rng,
) -> Result<(Image, Image, Vec<bool>)> {
    check_sigma(sigma)?;
    check_ratio(ratio)?;
    let (gauss, _) = add_awgn(img, sigma, rng)?;
    let (noisy, mask) = add_rvin_masked(&gauss, ratio, rng, true)?;
    Ok((noisy, gauss, mask))
}

/// Noise with per-pixel variance `x·(σ_s/255)² + (σ_c/255)²`. The map's AWGN
/// channels hold the equivalent std `sqrt(x·σ_s² + σ_c²) / 75`.
pub fn add_signal_dependent(
    img: &Image,
    sigma_s: f64,
    sigma_c: f64,
    rng: &mut Rng,
) -> Result<(Image, NoiseMap)> {
    if !(sigma_s >= 0.0 && sigma_c >= 0.0) {
        return Err(invalid(format!(
            "signal-dependent levels must be non-negative, got ({sigma_s}, {sigma_c})"
        )));
    }
    let n = img.pixel_count();
    let mut out = img.clone();
    let mut map = NoiseMap::zeros(img.width(), img.height());
    for c in 0..img.channels() {
        let plane = out.plane_mut(c);
        let mut levels = vec![0.0f32; n];
        for (v, level) in plane.iter_mut().zip(levels.iter_mut()) {
            let x = (*v as f64).max(0.0);
            let std8 = (x * sigma_s * sigma_s + sigma_c * sigma_c).sqrt();
            *level = (std8 / AWGN_SCALE).min(1.0) as f32;
            *v = (*v as f64 + std8 / 255.0 * rng.standard_normal()).clamp(0.0, 1.0) as f32;
        }
        if img.channels() == 1 {
            for mc in 0..3 {
                map.plane_mut(mc).copy_from_slice(&levels);
            }
        } else {
            map.plane_mut(c).copy_from_slice(&levels);
        }
    }
    Ok((out, map))
}

/// Spatially correlated Gaussian noise: an i.i.d. field drawn at
/// `1/upscale` resolution and replicated over `upscale × upscale` cells.
/// Neighbouring pixels inside a cell share their noise; pixels `upscale`
/// apart are independent, so stride-`upscale` pixel shuffling yields
/// pixel-independent sub-images.
pub fn add_correlated_awgn(
    img: &Image,
    sigma: f64,
    upscale: usize,
    rng: &mut Rng,
) -> Result<Image> {
    check_sigma(sigma)?;
    if upscale < 2 {
        return Err(invalid(format!("upscale must be >= 2, got {upscale}")));
    }
    let (w, h) = (img.width(), img.height());
    if w % upscale != 0 || h % upscale != 0 {
        return Err(invalid(format!(
            "{w}x{h} image not divisible by upscale factor {upscale}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let (lw, lh) = (w / upscale, h / upscale);
    let std = sigma / 255.0;
    let mut out = img.clone();
    for c in 0..img.channels() {
        let field: Vec<f64> = (0..lw * lh).map(|_| std * rng.standard_normal()).collect();
        let plane = out.plane_mut(c);
        for y in 0..h {
            let row = &field[(y / upscale) * lw..(y / upscale + 1) * lw];
            for x in 0..w {
                let v = &mut plane[y * w + x];
                *v = (*v as f64 + row[x / upscale]).clamp(0.0, 1.0) as f32;
            }
        }
    }
    Ok(out)
}
