//! 2-D cross-correlation with zero padding and its exact gradients.

use crate::error::{Error, Result};

use super::tensor::Tensor;

fn out_dim(n: usize, k: usize, pad: usize) -> Result<usize> {
    (n + 2 * pad)
        .checked_sub(k)
        .map(|d| d + 1)
        .ok_or_else(|| Error::ShapeMismatch(format!("kernel {k} larger than padded input {n}")))
}

fn check_shapes(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<(usize, usize)> {
    let [c_out, c_in, kh, kw] = w.shape();
    if x.c() != c_in {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, kernel expects {c_in}",
            x.c()
        )));
    }
    if kh != kw {
        return Err(Error::ShapeMismatch(format!("non-square kernel {kh}x{kw}")));
    }
    if let Some(b) = b {
        if b.len() != c_out {
            return Err(Error::ShapeMismatch(format!(
                "bias of {} for {c_out} output channels",
                b.len()
            )));
        }
    }
    Ok((c_out, kh))
}

/// Valid `(lo, hi)` range of output coordinates whose input coordinate
/// `o + k - pad` falls inside `[0, n)`.
#[inline]
fn span(k: usize, pad: usize, n: usize, n_out: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (n + pad).saturating_sub(k).min(n_out);
    (lo, hi.max(lo))
}

/// `out[n, co] = b[co] + Σ_ci Σ_ky,kx w[co, ci, ky, kx] · x[n, ci, y+ky-p, x+kx-p]`.
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, pad: usize) -> Result<Tensor> {
    let (c_out, k) = check_shapes(x, w, Some(b))?;
    let (h, wd) = (x.h(), x.w());
    let (ho, wo) = (out_dim(h, k, pad)?, out_dim(wd, k, pad)?);
    let mut out = Tensor::zeros([x.n(), c_out, ho, wo]);
    let wts = w.data();
    for n in 0..x.n() {
        for co in 0..c_out {
            let dst = out.plane_mut(n, co);
            dst.fill(b.data()[co]);
            for ci in 0..x.c() {
                let src = x.plane(n, ci);
                for ky in 0..k {
                    let (y0, y1) = span(ky, pad, h, ho);
                    for kx in 0..k {
                        let wv = wts[((co * x.c() + ci) * k + ky) * k + kx];
                        let (x0, x1) = span(kx, pad, wd, wo);
                        if x0 >= x1 {
                            continue;
                        }
                        let ix0 = x0 + kx - pad;
                        for oy in y0..y1 {
                            let iy = oy + ky - pad;
                            let d = &mut dst[oy * wo + x0..oy * wo + x1];
                            let s = &src[iy * wd + ix0..iy * wd + ix0 + (x1 - x0)];
                            for (o, &i) in d.iter_mut().zip(s) {
                                *o += wv * i;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, weight and bias.
pub fn conv2d_backward(
    grad_out: &Tensor,
    x: &Tensor,
    w: &Tensor,
    pad: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (c_out, k) = check_shapes(x, w, None)?;
    let (h, wd) = (x.h(), x.w());
    let (ho, wo) = (out_dim(h, k, pad)?, out_dim(wd, k, pad)?);
    if grad_out.shape() != [x.n(), c_out, ho, wo] {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?}, expected {:?}",
            grad_out.shape(),
            [x.n(), c_out, ho, wo]
        )));
    }
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros([c_out, 1, 1, 1]);
    let wts = w.data();
    for n in 0..x.n() {
        for co in 0..c_out {
            let g = grad_out.plane(n, co);
            gb.data_mut()[co] += g.iter().sum::<f32>();
            for ci in 0..x.c() {
                let src = x.plane(n, ci);
                for ky in 0..k {
                    let (y0, y1) = span(ky, pad, h, ho);
                    for kx in 0..k {
                        let (x0, x1) = span(kx, pad, wd, wo);
                        if x0 >= x1 {
                            continue;
                        }
                        let widx = ((co * x.c() + ci) * k + ky) * k + kx;
                        let wv = wts[widx];
                        let ix0 = x0 + kx - pad;
                        let mut acc = 0.0f32;
                        let gxp = gx.plane_mut(n, ci);
                        for oy in y0..y1 {
                            let iy = oy + ky - pad;
                            let go = &g[oy * wo + x0..oy * wo + x1];
                            let xs = &src[iy * wd + ix0..iy * wd + ix0 + (x1 - x0)];
                            acc += go.iter().zip(xs).map(|(a, b)| a * b).sum::<f32>();
                            let gi = &mut gxp[iy * wd + ix0..iy * wd + ix0 + (x1 - x0)];
                            for (d, &a) in gi.iter_mut().zip(go) {
                                *d += wv * a;
                            }
                        }
                        gw.data_mut()[widx] += acc;
                    }
                }
            }
        }
    }
    Ok((gx, gw, gb))
}
