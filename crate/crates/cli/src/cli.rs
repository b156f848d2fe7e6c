//! Argument definitions and subcommand dispatch.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pdlab::io::{load_image, save_image};
use pdlab::metrics::{psnr, ssim};
use pdlab::neural::{train_with, DataMix, ModelConfig, TrainConfig};
use pdlab::noise::{MAX_RATIO, MAX_SIGMA};
use pdlab::{scene, Image, Model, NoiseSpec, PdMode, Rng};
use serde_json::json;

use crate::ops::{
    self, parse_k, AdaptParams, DenoiseParams, DenoiserChoice, EstimateParams, EstimatorChoice,
    MapStats, Stride, Toolkit,
};
use crate::server::{self, ServerConfig};
use crate::store::{Store, DATA_DIR_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "pdlab",
    version,
    about = "Pixel-shuffle down-sampling denoising toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add synthetic noise to an image.
    Synth(SynthArgs),
    /// Estimate a pixel-wise noise map.
    Estimate(EstimateArgs),
    /// Select the pixel-shuffle stride and print the adaptation result.
    Adapt(AdaptArgs),
    /// Run PD refinement on a noisy image.
    Denoise(DenoiseArgs),
    /// Train the toy estimator and denoiser.
    Train(TrainArgs),
    /// Score PD refinement against a clean reference and write a CSV table.
    Eval(EvalArgs),
    /// Serve the HTTP API (and optionally the UI) locally.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Awgn,
    Rvin,
    Mixed,
    SignalDependent,
    Correlated,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "awgn")]
    pub kind: SynthKind,
    /// AWGN standard deviation in 8-bit units.
    #[arg(long, default_value_t = 25.0, value_parser = parse_sigma)]
    pub sigma: f64,
    /// Fraction of samples replaced by impulses.
    #[arg(long, default_value_t = 0.1, value_parser = parse_ratio)]
    pub ratio: f64,
    /// Signal-dependent component in 8-bit units.
    #[arg(long, default_value_t = 20.0)]
    pub sigma_s: f64,
    /// Signal-independent component in 8-bit units.
    #[arg(long, default_value_t = 10.0)]
    pub sigma_c: f64,
    /// Correlation length of correlated noise.
    #[arg(long, default_value_t = 2)]
    pub upscale: usize,
    /// Replace whole pixels with impulses instead of single channels.
    #[arg(long)]
    pub whole_pixels: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the ground-truth noise map.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Clean image, or `scene:WIDTHxHEIGHT` for a generated test scene.
    pub input: String,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model checkpoint for the learned estimator or denoiser.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

impl ModelArgs {
    fn toolkit(&self) -> Result<Toolkit> {
        Toolkit::load(self.checkpoint.as_deref()).context("loading checkpoint")
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value = "classical")]
    pub estimator: EstimatorChoice,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write a false-colour PNG of the AWGN channels.
    #[arg(long)]
    pub png: Option<PathBuf>,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[arg(long, default_value_t = pdlab::estimation::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = pdlab::estimation::DEFAULT_S_MAX)]
    pub smax: usize,
    #[arg(long, value_enum, default_value = "classical")]
    pub estimator: EstimatorChoice,
    #[command(flatten)]
    pub model: ModelArgs,
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_enum, default_value = "dct")]
    pub denoiser: DenoiserChoice,
    #[arg(long, value_enum, default_value = "classical")]
    pub estimator: EstimatorChoice,
    #[arg(long, value_parser = parse_mode, default_value = "full")]
    pub mode: PdMode,
    #[arg(long, default_value_t = pdlab::estimation::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = pdlab::estimation::DEFAULT_S_MAX)]
    pub smax: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

impl PipelineArgs {
    fn params(&self, stride: Stride, k: f64) -> DenoiseParams {
        DenoiseParams {
            stride,
            k,
            denoiser: self.denoiser,
            estimator: self.estimator,
            mode: self.mode,
            tau: self.tau,
            s_max: self.smax,
        }
    }
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Weight of the flat-region result, in [0, 1].
    #[arg(long, default_value = "0", value_parser = parse_k)]
    pub k: f64,
    /// `auto` or a fixed stride.
    #[arg(long, default_value = "auto")]
    pub stride: Stride,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Clean reference; adds PSNR to the report.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Also write the report JSON to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MixArg {
    Awgn,
    Mixed,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 25)]
    pub patch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "awgn")]
    pub mix: MixArg,
    #[arg(long, default_value_t = 3)]
    pub est_layers: usize,
    #[arg(long, default_value_t = 4)]
    pub den_layers: usize,
    #[arg(long, default_value_t = 16)]
    pub channels: usize,
    /// Per-step losses as CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Clean reference shared by all inputs.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Blending weights to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0", value_parser = parse_k)]
    pub k: Vec<f64>,
    /// Strides to sweep; `auto` runs adaptation.
    #[arg(long, value_delimiter = ',', default_value = "auto")]
    pub stride: Vec<Stride>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Noisy images to score.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Image store directory.
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
    /// Static UI files served for unmatched paths.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

fn parse_sigma(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number {s:?}"))?;
    if (0.0..=MAX_SIGMA).contains(&v) {
        Ok(v)
    } else {
        Err(format!("sigma must be in [0,{MAX_SIGMA}]"))
    }
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number {s:?}"))?;
    if (0.0..=MAX_RATIO).contains(&v) {
        Ok(v)
    } else {
        Err(format!("ratio must be in [0,{MAX_RATIO}]"))
    }
}

fn parse_mode(s: &str) -> Result<PdMode, String> {
    s.parse().map_err(|e: pdlab::Error| e.to_string())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Estimate(a) => estimate(a),
        Command::Adapt(a) => adapt(a),
        Command::Denoise(a) => denoise(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}

fn read(path: &Path) -> Result<Image> {
    load_image(path).with_context(|| format!("reading {}", path.display()))
}

fn write(img: &Image, path: &Path) -> Result<()> {
    save_image(img, path).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Loads `input`, or renders a scene for `scene:WIDTHxHEIGHT`.
fn clean_input(input: &str, seed: u64) -> Result<Image> {
    let Some(size) = input.strip_prefix("scene:") else {
        return read(Path::new(input));
    };
    let parsed = size
        .split_once('x')
        .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)));
    match parsed {
        Some((w, h)) if w > 0 && h > 0 => Ok(scene::natural(w, h, 3, &mut Rng::new(seed))),
        _ => bail!("scene size must look like scene:256x256, got {input:?}"),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let clean = clean_input(&a.input, a.seed)?;
    let spec = match a.kind {
        SynthKind::Awgn => NoiseSpec::awgn(a.sigma),
        SynthKind::Rvin => NoiseSpec {
            per_channel: !a.whole_pixels,
            ..NoiseSpec::rvin(a.ratio)
        },
        SynthKind::Mixed => NoiseSpec::mixed(a.sigma, a.ratio),
        SynthKind::SignalDependent => NoiseSpec::signal_dependent(a.sigma_s, a.sigma_c),
        SynthKind::Correlated => NoiseSpec::correlated(a.sigma, a.upscale),
    };
    let mut rng = Rng::new(a.seed).fork();
    let (noisy, map) = spec.apply(&clean, &mut rng)?;
    write(&noisy, &a.output)?;
    if let Some(path) = &a.map {
        map.save(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&json!({
        "noise": spec,
        "seed": a.seed,
        "psnr": psnr(&noisy, &clean)?,
        "output": a.output,
    }))
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let img = read(&a.input)?;
    let kit = a.model.toolkit()?;
    let map = ops::estimate(
        &img,
        &EstimateParams {
            estimator: a.estimator,
        },
        &kit,
    )?;
    map.save(&a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(path) = &a.png {
        write(&map.visualize(), path)?;
    }
    print_json(&MapStats::of(&map))
}

fn adapt(a: AdaptArgs) -> Result<()> {
    let img = read(&a.input)?;
    let kit = a.model.toolkit()?;
    let params = AdaptParams {
        tau: a.tau,
        s_max: a.smax,
        estimator: a.estimator,
    };
    print_json(&ops::adapt(&img, &params, &kit)?)
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let img = read(&a.input)?;
    let kit = a.pipeline.model.toolkit()?;
    let (out, mut report) = ops::denoise(&img, &a.pipeline.params(a.stride, a.k), &kit)?;
    if let Some(path) = &a.reference {
        report.score_against(&out, &read(path)?)?;
    }
    write(&out, &a.output)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_vec_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&report)
}

fn train(a: TrainArgs) -> Result<()> {
    let config = ModelConfig {
        est_layers: a.est_layers,
        den_layers: a.den_layers,
        channels: a.channels,
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        steps: a.steps,
        seed: a.seed,
        batch: a.batch,
        patch: a.patch,
        lr: a.lr,
        lr_final: a.lr / 10.0,
        mix: match a.mix {
            MixArg::Awgn => DataMix::default(),
            MixArg::Mixed => DataMix::Mixed,
        },
        ..TrainConfig::default()
    };
    let mut model = Model::new(config, a.seed)?;
    let every = (a.steps / 20).max(1);
    let log = train_with(&mut model, &cfg, |s| {
        if s.step % every == 0 || s.step + 1 == a.steps {
            eprintln!(
                "step {:>5}  lr {:.0e}  loss {:.4}  (est {:.4}, blind {:.4}, non-blind {:.4})",
                s.step, s.lr, s.loss.total, s.loss.estimation, s.loss.blind, s.loss.nonblind
            );
        }
    })?;
    model
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.log {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["step", "lr", "total", "estimation", "blind", "nonblind"])?;
        for s in &log.steps {
            w.serialize((
                s.step,
                s.lr,
                s.loss.total,
                s.loss.estimation,
                s.loss.blind,
                s.loss.nonblind,
            ))?;
        }
        w.flush()?;
    }
    let window = 20.min(log.steps.len().max(1));
    let smooth = log.smoothed(window);
    print_json(&json!({
        "steps": log.steps.len(),
        "parameters": model.param_count(),
        "smoothed_window": window,
        "first_loss": smooth.first(),
        "last_loss": smooth.last(),
        "checkpoint": a.out,
    }))
}

fn eval(a: EvalArgs) -> Result<()> {
    let clean = read(&a.reference)?;
    let kit = a.pipeline.model.toolkit()?;
    let mut w =
        csv::Writer::from_path(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    w.write_record(["file", "psnr_db", "ssim", "stride", "k"])?;
    for input in &a.inputs {
        let noisy = read(input)?;
        for &stride in &a.stride {
            for &k in &a.k {
                let (out, report) = ops::denoise(&noisy, &a.pipeline.params(stride, k), &kit)
                    .with_context(|| format!("denoising {}", input.display()))?;
                let (p, s) = (psnr(&out, &clean)?, ssim(&out, &clean)?);
                println!(
                    "{}  stride {} ({})  k {k}  psnr {p:.2} dB  ssim {s:.4}",
                    input.display(),
                    report.stride,
                    stride
                );
                w.serialize((input.display().to_string(), p, s, report.stride, k))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let data_dir = a.data_dir.unwrap_or_else(Store::default_root);
    let cfg = ServerConfig {
        ui_dir: a.ui_dir,
        toolkit: a.model.toolkit()?,
        ..ServerConfig::new(data_dir)
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(server::serve(SocketAddr::new(a.host, a.port), cfg))
        .context("serving HTTP")
}
