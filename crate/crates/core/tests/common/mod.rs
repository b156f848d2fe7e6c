//! Independent `f64` re-implementations used as finite-difference oracles.
#![allow(dead_code)]

use pdlab::neural::{Batch, LossWeights, Model, Tensor};
use pdlab::Rng;

pub const EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn of(t: &Tensor) -> Self {
        let [n, c, h, w] = t.shape();
        Self { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }
}

/// Zero-padded 'same' cross-correlation, written as the textbook loop.
pub fn conv_ref(x: &[f64], s: Shape, w: &[f64], b: &[f64], c_out: usize, k: usize) -> Vec<f64> {
    let p = (k / 2) as isize;
    let mut out = vec![0.0; s.n * c_out * s.h * s.w];
    for n in 0..s.n {
        for co in 0..c_out {
            for y in 0..s.h {
                for xx in 0..s.w {
                    let mut acc = b[co];
                    for ci in 0..s.c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = y as isize + ky as isize - p;
                                let ix = xx as isize + kx as isize - p;
                                if iy < 0 || ix < 0 || iy >= s.h as isize || ix >= s.w as isize {
                                    continue;
                                }
                                let xi = ((n * s.c + ci) * s.h + iy as usize) * s.w + ix as usize;
                                let wi = ((co * s.c + ci) * k + ky) * k + kx;
                                acc += w[wi] * x[xi];
                            }
                        }
                    }
                    out[((n * c_out + co) * s.h + y) * s.w + xx] = acc;
                }
            }
        }
    }
    out
}

/// Parameters of one conv layer in `f64`.
#[derive(Clone, Debug)]
pub struct RefLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub c_out: usize,
    pub k: usize,
}

/// Conv + ReLU stack with a linear last layer. Appends one activation flag
/// per hidden unit to `pattern` so callers can detect kink crossings.
pub fn net_ref(
    x: &[f64],
    s: Shape,
    layers: &[RefLayer],
    pattern: &mut Vec<bool>,
) -> (Vec<f64>, Shape) {
    let mut cur = x.to_vec();
    let mut shape = s;
    for (i, l) in layers.iter().enumerate() {
        cur = conv_ref(&cur, shape, &l.w, &l.b, l.c_out, l.k);
        shape = Shape {
            c: l.c_out,
            ..shape
        };
        if i + 1 < layers.len() {
            for v in cur.iter_mut() {
                pattern.push(*v > 0.0);
                *v = v.max(0.0);
            }
        }
    }
    (cur, shape)
}

pub fn concat_ref(a: &[f64], sa: Shape, b: &[f64], sb: Shape) -> (Vec<f64>, Shape) {
    let hw = sa.h * sa.w;
    let mut out = Vec::with_capacity(a.len() + b.len());
    for n in 0..sa.n {
        out.extend_from_slice(&a[n * sa.c * hw..(n + 1) * sa.c * hw]);
        out.extend_from_slice(&b[n * sb.c * hw..(n + 1) * sb.c * hw]);
    }
    (
        out,
        Shape {
            c: sa.c + sb.c,
            ..sa
        },
    )
}

pub fn half_sq(a: &[f64], b: &[f64], n: usize) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / (2.0 * n as f64)
}

pub fn to_f64(t: &[f32]) -> Vec<f64> {
    t.iter().map(|&v| v as f64).collect()
}

/// Model parameters as `f64` layers: (estimator, denoiser).
pub fn model_layers(params: &[Vec<f64>], model: &Model) -> (Vec<RefLayer>, Vec<RefLayer>) {
    let shapes: Vec<[usize; 4]> = model.params().map(Tensor::shape).collect();
    let mut layers = Vec::new();
    for i in (0..params.len()).step_by(2) {
        let [c_out, _, k, _] = shapes[i];
        layers.push(RefLayer {
            w: params[i].clone(),
            b: params[i + 1].clone(),
            c_out,
            k,
        });
    }
    let est_n = model.estimator().layers().len();
    let den = layers.split_off(est_n);
    (layers, den)
}

/// Composite objective `α·L_e + β·L_b + γ·L_nb` in `f64`, together with
/// the activation pattern (ReLU signs and clamp in-range flags).
pub fn composite_ref(
    params: &[Vec<f64>],
    model: &Model,
    batch: &Batch,
    w: LossWeights,
) -> (f64, Vec<bool>) {
    let (est, den) = model_layers(params, model);
    let ys = Shape::of(&batch.noisy);
    let y = to_f64(batch.noisy.data());
    let e = to_f64(batch.map.data());
    let v = to_f64(batch.residual.data());
    let mut pattern = Vec::new();
    let (raw, es) = net_ref(&y, ys, &est, &mut pattern);
    let e_hat: Vec<f64> = raw
        .iter()
        .map(|&r| {
            pattern.push((0.0..=1.0).contains(&r));
            r.clamp(0.0, 1.0)
        })
        .collect();
    let (blind_in, bs) = concat_ref(&y, ys, &e_hat, es);
    let (v_b, _) = net_ref(&blind_in, bs, &den, &mut pattern);
    let (nb_in, nbs) = concat_ref(&y, ys, &e, es);
    let (v_nb, _) = net_ref(&nb_in, nbs, &den, &mut pattern);
    let n = ys.n;
    let loss = w.alpha * half_sq(&e_hat, &e, n)
        + w.beta * half_sq(&v_b, &v, n)
        + w.gamma * half_sq(&v_nb, &v, n);
    (loss, pattern)
}

/// Largest elementwise relative error; entries smaller than 1e-3 of the
/// tensor's largest gradient are compared against that floor instead.
pub fn rel_err(analytic: &[f32], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let a = a as f64;
            (a - n).abs() / a.abs().max(n.abs()).max(floor)
        })
        .fold(0.0, f64::max)
}

pub fn random_tensor(shape: [usize; 4], lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(
        shape,
        (0..n).map(|_| rng.uniform_in(lo, hi) as f32).collect(),
    )
    .unwrap()
}

/// Result of a finite-difference sweep over one parameter tensor.
#[derive(Debug)]
pub struct FdCheck {
    pub name: String,
    pub err: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares `Model::loss` gradients with central differences of
/// [`composite_ref`] for every parameter tensor. Entries whose
/// perturbation crosses an activation kink are skipped.
pub fn composite_fd(model: &mut Model, batch: &Batch, w: LossWeights) -> Vec<FdCheck> {
    model.zero_grad();
    model.loss(batch, w, true).unwrap();
    let analytic: Vec<Vec<f32>> = model.params().map(|p| p.grad().unwrap().to_vec()).collect();
    let base: Vec<Vec<f64>> = model.params().map(|p| to_f64(p.data())).collect();
    let (_, pattern0) = composite_ref(&base, model, batch, w);
    let est_n = model.estimator().layers().len();
    let mut out = Vec::new();
    for (t, grads) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grads.len());
        let mut kept = Vec::with_capacity(grads.len());
        let mut skipped = 0;
        for j in 0..grads.len() {
            let mut p = base.clone();
            p[t][j] += EPS;
            let (lp, pat_p) = composite_ref(&p, model, batch, w);
            p[t][j] -= 2.0 * EPS;
            let (lm, pat_m) = composite_ref(&p, model, batch, w);
            if pat_p != pattern0 || pat_m != pattern0 {
                skipped += 1;
                continue;
            }
            numeric.push((lp - lm) / (2.0 * EPS));
            kept.push(grads[j]);
        }
        let layer = t / 2;
        let (net, idx) = if layer < est_n {
            ("est", layer)
        } else {
            ("den", layer - est_n)
        };
        let kind = if t % 2 == 0 { "weight" } else { "bias" };
        out.push(FdCheck {
            name: format!("{net}.{idx}.{kind}"),
            err: rel_err(&kept, &numeric),
            checked: kept.len(),
            skipped,
        });
    }
    out
}

/// A small random batch with maps in `[0, 1]` and residuals of noise size.
pub fn random_batch(n: usize, h: usize, w: usize, rng: &mut Rng) -> Batch {
    Batch {
        noisy: random_tensor([n, 3, h, w], 0.0, 1.0, rng),
        residual: random_tensor([n, 3, h, w], -0.2, 0.2, rng),
        map: random_tensor([n, 6, h, w], 0.0, 1.0, rng),
    }
}
