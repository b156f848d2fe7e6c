//! Operations shared by the command line and the HTTP service, so both
//! surfaces run the identical pipeline code for the same parameters.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use clap::ValueEnum;
use pdlab::denoise::EstimatorKind;
use pdlab::estimation::{ClassicalEstimator, DEFAULT_S_MAX, DEFAULT_TAU};
use pdlab::{
    adapt_stride, pd_refine, AdaptationResult, DenoiserKind, Error, Image, Model, NoiseMap,
    PdConfig, PdMode, PdReport,
};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DenoiserChoice {
    #[default]
    Dct,
    Learned,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    #[default]
    Classical,
    Learned,
}

/// `auto` runs stride adaptation; a number fixes the stride.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stride {
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for Stride {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Stride::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Stride::Fixed(n)),
            _ => Err(format!(
                "stride must be \"auto\" or a positive integer, got {s:?}"
            )),
        }
    }
}

impl fmt::Display for Stride {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stride::Auto => f.write_str("auto"),
            Stride::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Stride {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Stride::Auto => ser.serialize_str("auto"),
            Stride::Fixed(n) => ser.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Stride {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(usize),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Number(n) => Stride::from_str(&n.to_string()),
            Raw::Text(s) => Stride::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Parses a blending weight, rejecting values outside `[0, 1]`.
pub fn parse_k(s: &str) -> Result<f64, String> {
    let k: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("k must be in [0,1], got {s:?}"))?;
    if (0.0..=1.0).contains(&k) {
        Ok(k)
    } else {
        Err("k must be in [0,1]".to_string())
    }
}

/// Optional trained model backing the `learned` choices.
#[derive(Clone, Debug, Default)]
pub struct Toolkit {
    model: Option<Arc<Model>>,
}

impl Toolkit {
    pub fn new(model: Option<Arc<Model>>) -> Self {
        Self { model }
    }

    pub fn load(checkpoint: Option<&Path>) -> pdlab::Result<Self> {
        let model = checkpoint.map(Model::load).transpose()?.map(Arc::new);
        Ok(Self { model })
    }

    pub fn model(&self) -> Option<&Arc<Model>> {
        self.model.as_ref()
    }

    fn require_model(&self, role: &str) -> pdlab::Result<Arc<Model>> {
        self.model.clone().ok_or_else(|| {
            Error::InvalidParameter(format!("the learned {role} needs a model checkpoint"))
        })
    }

    pub fn estimator(&self, choice: EstimatorChoice) -> pdlab::Result<EstimatorKind> {
        Ok(match choice {
            EstimatorChoice::Classical => EstimatorKind::Classical(ClassicalEstimator::default()),
            EstimatorChoice::Learned => EstimatorKind::Learned(self.require_model("estimator")?),
        })
    }

    pub fn denoiser(&self, choice: DenoiserChoice) -> pdlab::Result<DenoiserKind> {
        Ok(match choice {
            DenoiserChoice::Dct => DenoiserKind::DctThreshold,
            DenoiserChoice::Learned => DenoiserKind::LearnedToy(self.require_model("denoiser")?),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateParams {
    pub estimator: EstimatorChoice,
}

/// Summary of a noise map in 8-bit σ units and corruption ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapStats {
    pub width: usize,
    pub height: usize,
    pub mean_sigma: f64,
    pub mean_ratio: f64,
}

impl MapStats {
    pub fn of(map: &NoiseMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            mean_sigma: map.mean_sigma(),
            mean_ratio: map.mean_ratio(),
        }
    }
}

pub fn estimate(img: &Image, params: &EstimateParams, kit: &Toolkit) -> pdlab::Result<NoiseMap> {
    kit.estimator(params.estimator)?.build().estimate(img)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptParams {
    pub tau: f64,
    pub s_max: usize,
    pub estimator: EstimatorChoice,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            s_max: DEFAULT_S_MAX,
            estimator: EstimatorChoice::default(),
        }
    }
}

pub fn adapt(img: &Image, params: &AdaptParams, kit: &Toolkit) -> pdlab::Result<AdaptationResult> {
    let est = kit.estimator(params.estimator)?.build();
    adapt_stride(img, est.as_ref(), params.tau, params.s_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseParams {
    pub stride: Stride,
    pub k: f64,
    pub denoiser: DenoiserChoice,
    pub estimator: EstimatorChoice,
    pub mode: PdMode,
    pub tau: f64,
    pub s_max: usize,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            stride: Stride::Auto,
            k: 0.0,
            denoiser: DenoiserChoice::default(),
            estimator: EstimatorChoice::default(),
            mode: PdMode::Full,
            tau: DEFAULT_TAU,
            s_max: DEFAULT_S_MAX,
        }
    }
}

impl DenoiseParams {
    pub fn config(&self, kit: &Toolkit) -> pdlab::Result<PdConfig> {
        let cfg = PdConfig {
            tau: self.tau,
            s_max: self.s_max,
            stride_override: match self.stride {
                Stride::Auto => None,
                Stride::Fixed(n) => Some(n),
            },
            k: self.k,
            denoiser: kit.denoiser(self.denoiser)?,
            estimator: kit.estimator(self.estimator)?,
            mode: self.mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn denoise(
    img: &Image,
    params: &DenoiseParams,
    kit: &Toolkit,
) -> pdlab::Result<(Image, PdReport)> {
    pd_refine(img, &params.config(kit)?)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Deterministic identifier of an operation on an input with parameters.
pub fn job_id(operation: &str, input: &str, params: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(operation.as_bytes());
    h.update([0]);
    h.update(input.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(params).unwrap_or_default());
    hex::encode(&h.finalize()[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_parsing_and_json() {
        assert_eq!("auto".parse::<Stride>().unwrap(), Stride::Auto);
        assert_eq!("3".parse::<Stride>().unwrap(), Stride::Fixed(3));
        assert!("0".parse::<Stride>().is_err());
        assert!("two".parse::<Stride>().is_err());
        let s: Stride = serde_json::from_str("2").unwrap();
        assert_eq!(s, Stride::Fixed(2));
        let s: Stride = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(s, Stride::Auto);
        assert_eq!(serde_json::to_string(&Stride::Fixed(4)).unwrap(), "4");
    }

    #[test]
    fn k_bounds() {
        assert_eq!(parse_k("0.25").unwrap(), 0.25);
        assert_eq!(parse_k("1").unwrap(), 1.0);
        assert_eq!(parse_k("1.5").unwrap_err(), "k must be in [0,1]");
        assert!(parse_k("-0.1").is_err());
        assert!(parse_k("NaN").is_err());
    }

    #[test]
    fn denoise_params_defaults_and_partial_json() {
        let p: DenoiseParams = serde_json::from_str(r#"{"k": 0.5, "stride": 2}"#).unwrap();
        assert_eq!(p.k, 0.5);
        assert_eq!(p.stride, Stride::Fixed(2));
        assert_eq!(p.mode, PdMode::Full);
        assert_eq!(p.tau, DEFAULT_TAU);
        let p: DenoiseParams = serde_json::from_str(r#"{"mode": "i-only"}"#).unwrap();
        assert_eq!(p.mode, PdMode::IOnly);
    }

    #[test]
    fn learned_choices_need_a_model() {
        let kit = Toolkit::default();
        assert!(kit.denoiser(DenoiserChoice::Learned).is_err());
        assert!(kit.estimator(EstimatorChoice::Learned).is_err());
        assert!(kit.denoiser(DenoiserChoice::Dct).is_ok());
    }

    #[test]
    fn job_ids_are_deterministic() {
        let p = DenoiseParams::default();
        let a = job_id("denoise", "abc", &p);
        assert_eq!(a, job_id("denoise", "abc", &p));
        assert_ne!(a, job_id("denoise", "abd", &p));
        assert_ne!(a, job_id("adapt", "abc", &p));
        assert_eq!(a.len(), 16);
        assert_eq!(content_id(b"").len(), 64);
    }
}
