//! Sliding-window 8×8 DCT hard thresholding.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise_map::{NoiseMap, AWGN_SCALE};

pub const DCT_SIZE: usize = 8;
/// Offset between neighbouring patches.
pub const DCT_STEP: usize = 2;
/// Coefficients below `THRESHOLD_FACTOR · σ` are zeroed.
pub const THRESHOLD_FACTOR: f64 = 3.0;

type Block = [[f64; DCT_SIZE]; DCT_SIZE];

/// Orthonormal DCT-II matrix, `C[k][n]`.
fn basis() -> &'static Block {
    static BASIS: OnceLock<Block> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; DCT_SIZE]; DCT_SIZE];
        let n = DCT_SIZE as f64;
        for (k, row) in c.iter_mut().enumerate() {
            let alpha = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for (i, v) in row.iter_mut().enumerate() {
                *v = alpha
                    * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n)).cos();
            }
        }
        c
    })
}

/// `C · X · Cᵀ`.
pub fn dct2(x: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; DCT_SIZE]; DCT_SIZE];
    for k in 0..DCT_SIZE {
        for j in 0..DCT_SIZE {
            tmp[k][j] = (0..DCT_SIZE).map(|i| c[k][i] * x[i][j]).sum();
        }
    }
    let mut out = [[0.0; DCT_SIZE]; DCT_SIZE];
    for k in 0..DCT_SIZE {
        for l in 0..DCT_SIZE {
            out[k][l] = (0..DCT_SIZE).map(|j| tmp[k][j] * c[l][j]).sum();
        }
    }
    out
}

/// `Cᵀ · Y · C`.
pub fn idct2(y: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; DCT_SIZE]; DCT_SIZE];
    for i in 0..DCT_SIZE {
        for l in 0..DCT_SIZE {
            tmp[i][l] = (0..DCT_SIZE).map(|k| c[k][i] * y[k][l]).sum();
        }
    }
    let mut out = [[0.0; DCT_SIZE]; DCT_SIZE];
    for i in 0..DCT_SIZE {
        for j in 0..DCT_SIZE {
            out[i][j] = (0..DCT_SIZE).map(|l| tmp[i][l] * c[l][j]).sum();
        }
    }
    out
}

/// Patch origins `0, step, 2·step, …` plus the last valid origin.
fn origins(n: usize, step: usize) -> Vec<usize> {
    let last = n - DCT_SIZE;
    let mut v: Vec<usize> = (0..=last).step_by(step).collect();
    if v.last() != Some(&last) {
        v.push(last);
    }
    v
}

/// Denoises each channel with hard thresholding at `3·σ_local`, where
/// `σ_local` is the patch mean of the matching AWGN map channel. The DC
/// coefficient is always kept and overlapping patches are averaged
/// uniformly and the result is clamped to `[0, 1]`. RVIN channels are
/// not used.
pub fn dct_denoise(img: &Image, map: &NoiseMap) -> Result<Image> {
    dct_denoise_with_step(img, map, DCT_STEP)
}

pub fn dct_denoise_with_step(img: &Image, map: &NoiseMap, step: usize) -> Result<Image> {
    map.check_matches(img)?;
    let (w, h) = (img.width(), img.height());
    if w < DCT_SIZE || h < DCT_SIZE {
        return Err(Error::TooSmall(format!(
            "DCT denoiser needs at least {DCT_SIZE}x{DCT_SIZE}, got {w}x{h}"
        )));
    }
    let step = step.max(1);
    let xs = origins(w, step);
    let ys = origins(h, step);
    let scale = AWGN_SCALE / 255.0;
    let mut out = img.clone();
    for c in 0..img.channels() {
        let src = img.plane(c);
        let sig = map.awgn(c);
        let mut acc = vec![0.0f64; w * h];
        let mut cnt = vec![0u32; w * h];
        let mut block = [[0.0; DCT_SIZE]; DCT_SIZE];
        for &y0 in &ys {
            for &x0 in &xs {
                let mut sigma_sum = 0.0f64;
                for (i, row) in block.iter_mut().enumerate() {
                    let o = (y0 + i) * w + x0;
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = src[o + j] as f64;
                        sigma_sum += sig[o + j] as f64;
                    }
                }
                let thr = THRESHOLD_FACTOR * scale * sigma_sum / (DCT_SIZE * DCT_SIZE) as f64;
                let mut coef = dct2(&block);
                for (k, row) in coef.iter_mut().enumerate() {
                    for (l, v) in row.iter_mut().enumerate() {
                        if (k, l) != (0, 0) && v.abs() < thr {
                            *v = 0.0;
                        }
                    }
                }
                let rec = idct2(&coef);
                for (i, row) in rec.iter().enumerate() {
                    let o = (y0 + i) * w + x0;
                    for (j, &v) in row.iter().enumerate() {
                        acc[o + j] += v;
                        cnt[o + j] += 1;
                    }
                }
            }
        }
        for ((d, &a), &n) in out.plane_mut(c).iter_mut().zip(&acc).zip(&cnt) {
            *d = ((a / n as f64) as f32).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}
