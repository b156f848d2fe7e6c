//! Noise-level estimation and automatic stride selection.
//!
//! For each candidate stride `s` the image is pixel-shuffled, a noise map is
//! estimated on the mosaic and summarized by normalized 10-bin histograms of
//! its three AWGN channels. The changing factor `r_s` is the channel-mean
//! squared distance between the histograms at `s` and `s + 1`; the selected
//! stride is the smallest `s` with `r_s < τ`.

mod classical;

pub use classical::{estimate_map_classical, ClassicalEstimator, DEFAULT_BLOCK, MIN_BLOCK};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::noise_map::NoiseMap;
use crate::shuffle::{pd_down, Mosaic};

pub const HIST_BINS: usize = 10;
/// Default adaptation threshold.
pub const DEFAULT_TAU: f64 = 0.008;
pub const DEFAULT_S_MAX: usize = 5;
/// Smallest sub-image side accepted during stride adaptation.
pub const MIN_SUBIMAGE: usize = 32;

/// Produces a pixel-wise [`NoiseMap`] for an image.
pub trait NoiseEstimator {
    fn estimate(&self, img: &Image) -> Result<NoiseMap>;

    /// Map of a PD mosaic in mosaic layout. Each sub-image is estimated on
    /// its own so no estimate straddles a tile seam.
    fn estimate_mosaic(&self, mosaic: &Mosaic) -> Result<NoiseMap> {
        let img = mosaic.image();
        let mut map = NoiseMap::zeros(img.width(), img.height());
        for (a, b) in mosaic.indices() {
            let tile = mosaic.sub_image(a, b)?;
            let (x0, y0) = tile.origin();
            map.paste(&self.estimate(&tile.to_image())?, x0, y0)?;
        }
        Ok(map)
    }

    fn name(&self) -> &'static str;
}

/// Normalized 10-bin histograms of the three AWGN channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: [[f64; HIST_BINS]; 3],
}

/// Bins are `[i/10, (i+1)/10)` with the top bin closed at 1.0. RVIN
/// channels are ignored.
pub fn histogram_awgn(map: &NoiseMap) -> Histogram {
    let mut bins = [[0.0f64; HIST_BINS]; 3];
    let n = map.pixel_count();
    for (c, hist) in bins.iter_mut().enumerate() {
        let mut counts = [0usize; HIST_BINS];
        for &v in map.awgn(c) {
            let i = ((v.clamp(0.0, 1.0) * HIST_BINS as f32) as usize).min(HIST_BINS - 1);
            counts[i] += 1;
        }
        if n > 0 {
            for (h, &k) in hist.iter_mut().zip(&counts) {
                *h = k as f64 / n as f64;
            }
        }
    }
    Histogram { bins }
}

/// Channel-mean squared Euclidean distance between two histograms.
pub fn changing_factor(a: &Histogram, b: &Histogram) -> f64 {
    let total: f64 = a
        .bins
        .iter()
        .zip(&b.bins)
        .map(|(ha, hb)| ha.iter().zip(hb).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum();
    total / 3.0
}

/// Outcome of stride adaptation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationResult {
    pub chosen_stride: usize,
    /// The threshold `τ` the sequence was tested against.
    pub threshold: f64,
    /// `(s, r_s)` for `s = 1..=s_max`.
    pub r_sequence: Vec<(usize, f64)>,
    /// False when no stride up to `s_max` satisfied `r_s < τ`.
    pub converged: bool,
}

/// Noise map of the largest stride-divisible crop of `img`, pixel-shuffled
/// by `s`.
pub fn mosaic_map(img: &Image, s: usize, estimator: &dyn NoiseEstimator) -> Result<NoiseMap> {
    let (w, h) = (
        img.width() - img.width() % s,
        img.height() - img.height() % s,
    );
    let crop = if (w, h) == (img.width(), img.height()) {
        img.clone()
    } else {
        img.crop(0, 0, w, h)?
    };
    estimator.estimate_mosaic(&pd_down(&crop, s)?)
}

/// Increases the stride until the AWGN-map histogram stops changing.
pub fn adapt_stride(
    img: &Image,
    estimator: &dyn NoiseEstimator,
    tau: f64,
    s_max: usize,
) -> Result<AdaptationResult> {
    if s_max < 2 {
        return Err(invalid(format!("s_max must be >= 2, got {s_max}")));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    let side = img.width().min(img.height());
    if side / (s_max + 1) < MIN_SUBIMAGE {
        return Err(Error::TooSmall(format!(
            "{}x{} image: stride {} sub-images fall below {MIN_SUBIMAGE}px",
            img.width(),
            img.height(),
            s_max + 1
        )));
    }
    let hists = (1..=s_max + 1)
        .map(|s| mosaic_map(img, s, estimator).map(|m| histogram_awgn(&m)))
        .collect::<Result<Vec<_>>>()?;
    let r_sequence: Vec<(usize, f64)> = hists
        .windows(2)
        .enumerate()
        .map(|(i, pair)| (i + 1, changing_factor(&pair[0], &pair[1])))
        .collect();
    let hit = r_sequence.iter().find(|(_, r)| *r < tau).map(|&(s, _)| s);
    Ok(AdaptationResult {
        chosen_stride: hit.unwrap_or(s_max),
        threshold: tau,
        r_sequence,
        converged: hit.is_some(),
    })
}

/// Largest `s_max` the image supports under [`MIN_SUBIMAGE`].
pub fn feasible_s_max(width: usize, height: usize) -> usize {
    (width.min(height) / MIN_SUBIMAGE).saturating_sub(1)
}
