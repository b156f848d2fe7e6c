//! PSNR and single-scale SSIM with peak value 1.0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

pub fn score(a: &Image, b: &Image) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
    })
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10·log10(1 / MSE)`; infinite when the images are identical.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering of one plane.
fn filter_valid(p: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &p[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k
                .iter()
                .zip(&row[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(i, a)| a * tmp[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all valid 11×11 Gaussian windows (σ = 1.5), averaged
/// over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "ssim")?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let k = gaussian_window();
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let mut total = 0.0;
    for c in 0..a.channels() {
        let x: Vec<f64> = a.plane(c).iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = b.plane(c).iter().map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let exx = filter_valid(&xx, w, h, &k);
        let eyy = filter_valid(&yy, w, h, &k);
        let exy = filter_valid(&xy, w, h, &k);
        let mut sum = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = exx[i] - ux * ux;
            let vy = eyy[i] - uy * uy;
            let cov = exy[i] - ux * uy;
            let num = (2.0 * ux * uy + c1) * (2.0 * cov + c2);
            let den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
            sum += num / den;
        }
        total += sum / mx.len() as f64;
    }
    Ok(total / a.channels() as f64)
}
