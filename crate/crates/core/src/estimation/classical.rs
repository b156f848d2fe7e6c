//! Block-wise robust noise-level estimator.
//!
//! Per channel, the image is convolved with the 3×3 mask
//! `[1 -2 1; -2 4 -2; 1 -2 1]`, which annihilates locally linear content.
//! For white noise of std σ its response has std 6σ, so each block's level
//! is `1.4826 · MAD / 6`. Block levels are bilinearly interpolated between
//! block centres. Impulse density comes from the fraction of samples that
//! deviate from their 3×3 median by more than [`IMPULSE_THRESHOLD`].

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::noise_map::{NoiseMap, AWGN_SCALE, RVIN_SCALE};

use super::NoiseEstimator;

/// Default block side in pixels.
pub const DEFAULT_BLOCK: usize = 16;
pub const MIN_BLOCK: usize = 8;
pub const IMPULSE_THRESHOLD: f32 = 0.2;

const MAD_TO_SIGMA: f64 = 1.4826;
/// sqrt of the sum of squared mask coefficients.
const MASK_GAIN: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassicalEstimator {
    pub block: usize,
}

impl Default for ClassicalEstimator {
    fn default() -> Self {
        Self {
            block: DEFAULT_BLOCK,
        }
    }
}

impl ClassicalEstimator {
    pub fn new(block: usize) -> Result<Self> {
        if block < MIN_BLOCK {
            return Err(invalid(format!("block {block} < {MIN_BLOCK}")));
        }
        Ok(Self { block })
    }
}

impl NoiseEstimator for ClassicalEstimator {
    fn estimate(&self, img: &Image) -> Result<NoiseMap> {
        estimate_map_classical(img, self.block)
    }

    fn name(&self) -> &'static str {
        "classical"
    }
}

/// Full-resolution noise map of `img` from `block × block` estimates.
pub fn estimate_map_classical(img: &Image, block: usize) -> Result<NoiseMap> {
    if block < MIN_BLOCK {
        return Err(invalid(format!("block {block} < {MIN_BLOCK}")));
    }
    let (w, h) = (img.width(), img.height());
    if w < block || h < block {
        return Err(Error::TooSmall(format!(
            "{w}x{h} image smaller than one {block}x{block} block"
        )));
    }
    let grid = BlockGrid::new(w, h, block);
    let mut map = NoiseMap::zeros(w, h);
    for c in 0..img.channels() {
        let (sigma, impulses) = channel_levels(img.plane(c), w, h, &grid);
        let awgn = grid.interpolate(&sigma);
        let rvin = grid.interpolate(&impulses);
        let targets = if img.channels() == 1 { 0..3 } else { c..c + 1 };
        for t in targets {
            map.plane_mut(t).copy_from_slice(&awgn);
            map.plane_mut(3 + t).copy_from_slice(&rvin);
        }
    }
    Ok(map)
}

/// Normalized AWGN and RVIN levels per block, row-major over the grid.
fn channel_levels(plane: &[f32], w: usize, h: usize, grid: &BlockGrid) -> (Vec<f32>, Vec<f32>) {
    let response = mask_response(plane, w, h);
    let impulse = impulse_flags(plane, w, h);
    let mut sigma = Vec::with_capacity(grid.len());
    let mut ratio = Vec::with_capacity(grid.len());
    let mut buf = Vec::new();
    for by in 0..grid.ys.len() - 1 {
        for bx in 0..grid.xs.len() - 1 {
            let (x0, x1) = (grid.xs[bx], grid.xs[bx + 1]);
            let (y0, y1) = (grid.ys[by], grid.ys[by + 1]);
            buf.clear();
            let mut hits = 0usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    hits += impulse[y * w + x] as usize;
                    // responses exist for interior pixels only
                    if x > 0 && y > 0 && x + 1 < w && y + 1 < h {
                        buf.push(response[y * w + x]);
                    }
                }
            }
            let s = MAD_TO_SIGMA * mad(&mut buf) / MASK_GAIN * 255.0;
            sigma.push((s / AWGN_SCALE).min(1.0) as f32);
            let frac = hits as f64 / ((x1 - x0) * (y1 - y0)) as f64;
            ratio.push((frac / RVIN_SCALE).min(1.0) as f32);
        }
    }
    (sigma, ratio)
}

fn mask_response(p: &[f32], w: usize, h: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; w * h];
    for y in 1..h.saturating_sub(1) {
        let (up, mid, dn) = (
            &p[(y - 1) * w..y * w],
            &p[y * w..(y + 1) * w],
            &p[(y + 1) * w..(y + 2) * w],
        );
        for x in 1..w - 1 {
            let edge = up[x - 1] + up[x + 1] + dn[x - 1] + dn[x + 1];
            let cross = up[x] + dn[x] + mid[x - 1] + mid[x + 1];
            out[y * w + x] = edge - 2.0 * cross + 4.0 * mid[x];
        }
    }
    out
}

fn impulse_flags(p: &[f32], w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    let mut win = [0.0f32; 9];
    for y in 0..h {
        for x in 0..w {
            let mut k = 0;
            for dy in [-1isize, 0, 1] {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in [-1isize, 0, 1] {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    win[k] = p[yy * w + xx];
                    k += 1;
                }
            }
            out[y * w + x] = (p[y * w + x] - median9(win)).abs() > IMPULSE_THRESHOLD;
        }
    }
    out
}

/// Median of nine via a fixed exchange network (Paeth / Devillard).
fn median9(mut p: [f32; 9]) -> f32 {
    #[inline(always)]
    fn sort2(p: &mut [f32; 9], a: usize, b: usize) {
        if p[a] > p[b] {
            p.swap(a, b);
        }
    }
    for (a, b) in [
        (1, 2),
        (4, 5),
        (7, 8),
        (0, 1),
        (3, 4),
        (6, 7),
        (1, 2),
        (4, 5),
        (7, 8),
        (0, 3),
        (5, 8),
        (4, 7),
        (3, 6),
        (1, 4),
        (2, 5),
        (4, 7),
        (4, 2),
        (6, 4),
        (4, 2),
    ] {
        sort2(&mut p, a, b);
    }
    p[4]
}

/// Median absolute deviation about the median. Reorders `v`.
fn mad(v: &mut [f32]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let med = median(v);
    for x in v.iter_mut() {
        *x = (*x - med as f32).abs();
    }
    median(v)
}

fn median(v: &mut [f32]) -> f64 {
    let n = v.len();
    let (_, &mut hi, _) = v.select_nth_unstable_by(n / 2, f32::total_cmp);
    if n % 2 == 1 {
        hi as f64
    } else {
        let lo = v[..n / 2].iter().copied().fold(f32::NEG_INFINITY, f32::max);
        (lo as f64 + hi as f64) / 2.0
    }
}

/// Non-overlapping blocks; the last block in each direction absorbs the
/// remainder.
struct BlockGrid {
    w: usize,
    h: usize,
    xs: Vec<usize>,
    ys: Vec<usize>,
}

impl BlockGrid {
    fn new(w: usize, h: usize, block: usize) -> Self {
        let edges = |n: usize| -> Vec<usize> {
            let nb = (n / block).max(1);
            (0..=nb).map(|i| i * n / nb).collect()
        };
        Self {
            w,
            h,
            xs: edges(w),
            ys: edges(h),
        }
    }

    fn len(&self) -> usize {
        (self.xs.len() - 1) * (self.ys.len() - 1)
    }

    /// Bilinear interpolation of per-block values between block centres,
    /// held constant beyond the outermost centres.
    fn interpolate(&self, values: &[f32]) -> Vec<f32> {
        let nbx = self.xs.len() - 1;
        let weights = |edges: &[usize], n: usize| -> Vec<(usize, usize, f32)> {
            let centres: Vec<f32> = edges
                .windows(2)
                .map(|e| (e[0] + e[1]) as f32 / 2.0 - 0.5)
                .collect();
            (0..n)
                .map(|p| {
                    let p = p as f32;
                    let i = centres.partition_point(|&c| c <= p);
                    if i == 0 {
                        (0, 0, 0.0)
                    } else if i == centres.len() {
                        (i - 1, i - 1, 0.0)
                    } else {
                        let t = (p - centres[i - 1]) / (centres[i] - centres[i - 1]);
                        (i - 1, i, t)
                    }
                })
                .collect()
        };
        let wx = weights(&self.xs, self.w);
        let wy = weights(&self.ys, self.h);
        let mut out = vec![0.0f32; self.w * self.h];
        for (y, &(j0, j1, ty)) in wy.iter().enumerate() {
            for (x, &(i0, i1, tx)) in wx.iter().enumerate() {
                let v00 = values[j0 * nbx + i0];
                let v01 = values[j0 * nbx + i1];
                let v10 = values[j1 * nbx + i0];
                let v11 = values[j1 * nbx + i1];
                let top = v00 + tx * (v01 - v00);
                let bot = v10 + tx * (v11 - v10);
                out[y * self.w + x] = top + ty * (bot - top);
            }
        }
        out
    }
}
