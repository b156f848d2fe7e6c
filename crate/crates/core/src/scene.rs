//! Procedural "natural-looking" clean images for tests, benchmarks and
//! training data: smooth shading, soft-edged shapes and a little oriented
//! texture, kept inside `[0.12, 0.88]` so moderate noise rarely clips.

use std::f32::consts::TAU;

use crate::image::Image;
use crate::rng::Rng;

const LO: f32 = 0.12;
const HI: f32 = 0.88;

struct Wave {
    fx: f32,
    fy: f32,
    phase: f32,
    amp: [f32; 3],
}

enum Outline {
    Ellipse { rx: f32, ry: f32 },
    Rect { hx: f32, hy: f32 },
}

struct Shape {
    cx: f32,
    cy: f32,
    outline: Outline,
    soft: f32,
    delta: [f32; 3],
    texture: Option<Wave>,
}

impl Shape {
    /// Coverage in `[0, 1]` with a smoothstep edge of width `soft`.
    fn coverage(&self, x: f32, y: f32) -> f32 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let dist = match self.outline {
            Outline::Ellipse { rx, ry } => {
                let d = ((dx / rx).powi(2) + (dy / ry).powi(2)).sqrt();
                (d - 1.0) * rx.min(ry)
            }
            Outline::Rect { hx, hy } => (dx.abs() - hx).max(dy.abs() - hy),
        };
        let t = (0.5 - dist / self.soft).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    }
}

/// A random scene of the given size and channel count.
pub fn natural(width: usize, height: usize, channels: usize, rng: &mut Rng) -> Image {
    let side = width.min(height) as f32;
    let base: Vec<f32> = (0..3).map(|_| rng.uniform_in(0.38, 0.62) as f32).collect();

    let waves: Vec<Wave> = (0..3)
        .map(|_| {
            let cycles = rng.uniform_in(0.5, 2.0) as f32;
            let angle = rng.uniform_in(0.0, TAU as f64) as f32;
            let amp = rng.uniform_in(0.03, 0.08) as f32;
            Wave {
                fx: cycles * angle.cos() / width as f32,
                fy: cycles * angle.sin() / height as f32,
                phase: rng.uniform_in(0.0, TAU as f64) as f32,
                amp: [0, 1, 2].map(|_| amp * rng.uniform_in(0.7, 1.3) as f32),
            }
        })
        .collect();

    let n_shapes = 6 + rng.below(6);
    let shapes: Vec<Shape> = (0..n_shapes)
        .map(|i| {
            let r1 = side * rng.uniform_in(0.05, 0.22) as f32;
            let r2 = side * rng.uniform_in(0.05, 0.22) as f32;
            let outline = if rng.uniform() < 0.5 {
                Outline::Ellipse { rx: r1, ry: r2 }
            } else {
                Outline::Rect { hx: r1, hy: r2 }
            };
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            let mag = rng.uniform_in(0.06, 0.18) as f32;
            let delta = [0, 1, 2].map(|_| sign * mag * rng.uniform_in(0.6, 1.4) as f32);
            let texture = (i % 3 == 0).then(|| {
                let period = rng.uniform_in(8.0, 16.0) as f32;
                let angle = rng.uniform_in(0.0, TAU as f64) as f32;
                let amp = rng.uniform_in(0.01, 0.03) as f32;
                Wave {
                    fx: angle.cos() / period,
                    fy: angle.sin() / period,
                    phase: rng.uniform_in(0.0, TAU as f64) as f32,
                    amp: [amp; 3],
                }
            });
            Shape {
                cx: rng.uniform_in(0.0, width as f64) as f32,
                cy: rng.uniform_in(0.0, height as f64) as f32,
                outline,
                soft: rng.uniform_in(2.0, 5.0) as f32,
                delta,
                texture,
            }
        })
        .collect();

    let mut img = Image::new(width, height, channels).expect("scene geometry");
    let mut px = [0.0f32; 3];
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f32, y as f32);
            px.copy_from_slice(&base);
            for wv in &waves {
                let s = (TAU * (wv.fx * xf + wv.fy * yf) + wv.phase).sin();
                for (p, a) in px.iter_mut().zip(&wv.amp) {
                    *p += a * s;
                }
            }
            for sh in &shapes {
                let cov = sh.coverage(xf, yf);
                if cov <= 0.0 {
                    continue;
                }
                let tex = sh.texture.as_ref().map_or(0.0, |t| {
                    t.amp[0] * (TAU * (t.fx * xf + t.fy * yf) + t.phase).sin()
                });
                for (p, dl) in px.iter_mut().zip(&sh.delta) {
                    *p += cov * (dl + tex);
                }
            }
            for c in 0..channels {
                let v = if channels == 1 {
                    (px[0] + px[1] + px[2]) / 3.0
                } else {
                    px[c]
                };
                img.set(x, y, c, v.clamp(LO, HI));
            }
        }
    }
    img
}
