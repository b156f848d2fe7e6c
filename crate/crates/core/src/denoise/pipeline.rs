//! PD refinement: adapt the stride, denoise the pixel-shuffled mosaic, refill
//! each noisy sub-image in turn, re-denoise and average into the texture
//! result `T`, then blend with the over-smoothed flat result `F`.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{
    adapt_stride, feasible_s_max, ClassicalEstimator, NoiseEstimator, DEFAULT_S_MAX, DEFAULT_TAU,
};
use crate::image::Image;
use crate::metrics;
use crate::neural::{LearnedEstimator, Model};
use crate::shuffle::{pd_down, pd_up, refill_subimage, Mosaic};

use super::{blend, denoise_nonblind, flat_region_map, DenoiserKind, DCT_SIZE};

/// Width of the linear transition between the PD core and the directly
/// denoised boundary strip of non-divisible images.
pub const FEATHER: usize = 4;
/// Smallest accepted image side.
pub const MIN_SIDE: usize = 64;

/// How the texture result is formed after the mosaic is denoised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdMode {
    /// Refill every sub-image, re-denoise and average.
    #[default]
    Full,
    /// Inverse-shuffle the denoised mosaic only.
    IOnly,
    /// Inverse-shuffle the denoised mosaic and denoise it once more.
    DiOnly,
}

impl FromStr for PdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(PdMode::Full),
            "i-only" => Ok(PdMode::IOnly),
            "di-only" => Ok(PdMode::DiOnly),
            other => Err(invalid(format!(
                "unknown mode {other:?}; expected full, i-only or di-only"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum EstimatorKind {
    Classical(ClassicalEstimator),
    Learned(Arc<Model>),
}

impl Default for EstimatorKind {
    fn default() -> Self {
        EstimatorKind::Classical(ClassicalEstimator::default())
    }
}

impl EstimatorKind {
    pub fn build(&self) -> Box<dyn NoiseEstimator> {
        match self {
            EstimatorKind::Classical(c) => Box::new(*c),
            EstimatorKind::Learned(m) => Box::new(LearnedEstimator::new(m.clone())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PdConfig {
    pub tau: f64,
    pub s_max: usize,
    /// Fixed stride; skips adaptation when set.
    pub stride_override: Option<usize>,
    /// Weight of the flat result `F`.
    pub k: f64,
    pub denoiser: DenoiserKind,
    pub estimator: EstimatorKind,
    pub mode: PdMode,
}

impl Default for PdConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            s_max: DEFAULT_S_MAX,
            stride_override: None,
            k: 0.0,
            denoiser: DenoiserKind::DctThreshold,
            estimator: EstimatorKind::default(),
            mode: PdMode::Full,
        }
    }
}

impl PdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.k) {
            return Err(invalid(format!("k must be in [0, 1], got {}", self.k)));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if self.s_max < 2 {
            return Err(invalid(format!("s_max must be >= 2, got {}", self.s_max)));
        }
        if self.stride_override == Some(0) {
            return Err(invalid("stride must be >= 1"));
        }
        Ok(())
    }
}

/// Wall-clock time per pipeline stage in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub adapt: f64,
    pub mosaic: f64,
    pub texture: f64,
    pub flat: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdReport {
    pub stride: usize,
    pub converged: bool,
    pub r_sequence: Vec<(usize, f64)>,
    pub k: f64,
    pub denoiser: String,
    pub estimator: String,
    pub mode: PdMode,
    pub timings_ms: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PdReport {
    /// Records the PSNR of `output` against a clean reference.
    pub fn score_against(&mut self, output: &Image, clean: &Image) -> Result<()> {
        self.psnr = Some(metrics::psnr(output, clean)?);
        Ok(())
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn denoise_blind(img: &Image, est: &dyn NoiseEstimator, kind: &DenoiserKind) -> Result<Image> {
    denoise_nonblind(img, &est.estimate(img)?, kind)
}

struct Stride {
    s: usize,
    converged: bool,
    r_sequence: Vec<(usize, f64)>,
    warnings: Vec<String>,
}

fn choose_stride(y: &Image, cfg: &PdConfig, est: &dyn NoiseEstimator) -> Result<Stride> {
    let side = y.width().min(y.height());
    if let Some(s) = cfg.stride_override {
        if side / s < DCT_SIZE {
            return Err(invalid(format!(
                "stride {s} leaves sub-images smaller than {DCT_SIZE}px"
            )));
        }
        return Ok(Stride {
            s,
            converged: true,
            r_sequence: Vec::new(),
            warnings: Vec::new(),
        });
    }
    let mut warnings = Vec::new();
    let s_max = cfg.s_max.min(feasible_s_max(y.width(), y.height()));
    if s_max < 2 {
        warnings.push(format!(
            "{}x{} image is too small for stride adaptation; using stride 2",
            y.width(),
            y.height()
        ));
        return Ok(Stride {
            s: 2,
            converged: false,
            r_sequence: Vec::new(),
            warnings,
        });
    }
    if s_max < cfg.s_max {
        warnings.push(format!(
            "s_max reduced from {} to {s_max} for image size",
            cfg.s_max
        ));
    }
    let r = adapt_stride(y, est, cfg.tau, s_max)?;
    if !r.converged {
        warnings.push(format!(
            "no stride up to {s_max} reached r_s < {}; using {s_max}",
            cfg.tau
        ));
    }
    Ok(Stride {
        s: r.chosen_stride,
        converged: r.converged,
        r_sequence: r.r_sequence,
        warnings,
    })
}

/// Texture result on an image whose sides are multiples of `s`.
fn texture(
    y: &Image,
    s: usize,
    mode: PdMode,
    est: &dyn NoiseEstimator,
    kind: &DenoiserKind,
) -> Result<(Image, f64, f64)> {
    let t0 = Instant::now();
    let noisy = pd_down(y, s)?;
    let mosaic_kind = kind.reframe(|c| Ok(pd_down(c, s)?.into_image()))?;
    let map = est.estimate_mosaic(&noisy)?;
    let denoised = Mosaic::from_image(denoise_nonblind(noisy.image(), &map, &mosaic_kind)?, s)?;
    let mosaic_ms = ms(t0);

    let t1 = Instant::now();
    let out = match mode {
        PdMode::IOnly => pd_up(&denoised, s)?,
        PdMode::DiOnly => denoise_blind(&pd_up(&denoised, s)?, est, kind)?,
        PdMode::Full => {
            let mut acc = vec![0.0f64; y.len()];
            for idx in noisy.indices() {
                let z = pd_up(&refill_subimage(&denoised, &noisy, idx)?, s)?;
                let d = denoise_blind(&z, est, kind)?;
                for (a, &v) in acc.iter_mut().zip(d.data()) {
                    *a += v as f64;
                }
            }
            let n = (s * s) as f64;
            Image::from_vec(
                y.width(),
                y.height(),
                y.channels(),
                acc.into_iter().map(|a| (a / n) as f32).collect(),
            )?
        }
    };
    Ok((out, mosaic_ms, ms(t1)))
}

/// Pastes `core` at the origin of `direct`. Strip pixels at Chebyshev
/// distance `d` from the core take the PD-minus-direct difference of their
/// nearest core pixel with weight `1 − d / (FEATHER + 1)`, clamped to
/// `[0, 1]`.
fn stitch(core: &Image, direct: &Image) -> Result<Image> {
    let (wc, hc) = (core.width(), core.height());
    let mut out = direct.clone();
    out.paste(core, 0, 0)?;
    for c in 0..direct.channels() {
        for y in 0..direct.height() {
            for x in 0..direct.width() {
                if x < wc && y < hc {
                    continue;
                }
                let d = (x + 1).saturating_sub(wc).max((y + 1).saturating_sub(hc));
                if d > FEATHER {
                    continue;
                }
                let (qx, qy) = (x.min(wc - 1), y.min(hc - 1));
                let diff = core.get(qx, qy, c) as f64 - direct.get(qx, qy, c) as f64;
                let w = 1.0 - d as f64 / (FEATHER + 1) as f64;
                let v = direct.get(x, y, c) as f64 + w * diff;
                out.set(x, y, c, v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    Ok(out)
}

/// Runs the full refinement pipeline on `y`.
pub fn pd_refine(y: &Image, cfg: &PdConfig) -> Result<(Image, PdReport)> {
    cfg.validate()?;
    if y.width() < MIN_SIDE || y.height() < MIN_SIDE {
        return Err(Error::TooSmall(format!(
            "PD refinement needs at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
            y.width(),
            y.height()
        )));
    }
    let start = Instant::now();
    let est = cfg.estimator.build();
    let stride = choose_stride(y, cfg, est.as_ref())?;
    let adapt_ms = ms(start);
    let s = stride.s;

    let (wc, hc) = (y.width() - y.width() % s, y.height() - y.height() % s);
    let divisible = (wc, hc) == (y.width(), y.height());
    let crop = |img: &Image| {
        if divisible {
            Ok(img.clone())
        } else {
            img.crop(0, 0, wc, hc)
        }
    };
    let core_kind = cfg.denoiser.reframe(crop)?;
    let (core_t, mosaic_ms, mut texture_ms) =
        texture(&crop(y)?, s, cfg.mode, est.as_ref(), &core_kind)?;
    let t = if divisible {
        core_t
    } else {
        let t0 = Instant::now();
        let direct = denoise_blind(y, est.as_ref(), &cfg.denoiser)?;
        let out = stitch(&core_t, &direct)?;
        texture_ms += ms(t0);
        out
    };

    let t0 = Instant::now();
    let out = if cfg.k > 0.0 {
        let flat_map = flat_region_map(&est.estimate(y)?);
        let f = denoise_nonblind(y, &flat_map, &cfg.denoiser)?;
        blend(&f, &t, cfg.k)?
    } else {
        t
    };
    let flat_ms = ms(t0);

    let report = PdReport {
        stride: s,
        converged: stride.converged,
        r_sequence: stride.r_sequence,
        k: cfg.k,
        denoiser: cfg.denoiser.name().to_string(),
        estimator: est.name().to_string(),
        mode: cfg.mode,
        timings_ms: Timings {
            adapt: adapt_ms,
            mosaic: mosaic_ms,
            texture: texture_ms,
            flat: flat_ms,
            total: ms(start),
        },
        psnr: None,
        warnings: stride.warnings,
    };
    Ok((out, report))
}
