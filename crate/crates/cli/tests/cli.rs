use std::path::Path;
use std::process::{Command, Output};

use pdlab::io::load_image;
use pdlab::{Model, NoiseMap};
use serde_json::Value;

fn pdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn synth_then_adapt_selects_stride_one_for_white_noise() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = path(dir.path(), "noisy.png");
    let map = path(dir.path(), "truth.nmap");
    let v = ok_json(pdlab(&[
        "synth",
        "--kind",
        "awgn",
        "--sigma",
        "30",
        "--seed",
        "3",
        "--map",
        &map,
        "scene:256x256",
        &noisy,
    ]));
    assert_eq!(v["noise"]["kind"], "awgn");
    assert_eq!(NoiseMap::load(&map).unwrap().width(), 256);

    let v = ok_json(pdlab(&["adapt", "--tau", "0.008", "--smax", "5", &noisy]));
    assert_eq!(v["chosen_stride"], 1);
    assert_eq!(v["threshold"], 0.008);
    assert_eq!(v["r_sequence"].as_array().unwrap().len(), 5);
}

#[test]
fn denoise_with_fixed_stride_reports_it() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noisy, out) = (
        path(dir.path(), "clean.png"),
        path(dir.path(), "noisy.png"),
        path(dir.path(), "out.png"),
    );
    ok_json(pdlab(&["synth", "--sigma", "0", "scene:96x96", &clean]));
    ok_json(pdlab(&[
        "synth",
        "--kind",
        "correlated",
        "--sigma",
        "25",
        &clean,
        &noisy,
    ]));
    let report = path(dir.path(), "report.json");
    let v = ok_json(pdlab(&[
        "denoise", "--stride", "2", "--k", "0", "--ref", &clean, "--report", &report, &noisy, &out,
    ]));
    assert_eq!(v["stride"], 2);
    assert_eq!(v["k"], 0.0);
    assert!(v["psnr"].as_f64().unwrap() > 20.0);
    let saved: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(saved["stride"], 2);
    assert_eq!(load_image(&out).unwrap().width(), 96);
}

#[test]
fn out_of_range_k_is_a_usage_error() {
    let out = pdlab(&["denoise", "--k", "1.5", "in.png", "out.png"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k must be in [0,1]"));
}

#[test]
fn unknown_flags_and_subcommands_exit_two() {
    assert_eq!(
        pdlab(&["denoise", "--bogus", "a", "b"]).status.code(),
        Some(2)
    );
    assert_eq!(pdlab(&["sharpen"]).status.code(), Some(2));
    assert_eq!(
        pdlab(&["denoise", "--stride", "zero", "a", "b"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn processing_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdlab(&[
        "denoise",
        &path(dir.path(), "missing.png"),
        &path(dir.path(), "o.png"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let small = path(dir.path(), "small.png");
    ok_json(pdlab(&["synth", "scene:32x32", &small]));
    let out = pdlab(&["denoise", &small, &path(dir.path(), "o.png")]);
    assert_eq!(out.status.code(), Some(1));

    let out = pdlab(&[
        "denoise",
        "--denoiser",
        "learned",
        &small,
        &path(dir.path(), "o.png"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
}

#[test]
fn estimate_writes_a_loadable_map() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = path(dir.path(), "noisy.png");
    let nmap = path(dir.path(), "est.nmap");
    let vis = path(dir.path(), "est.png");
    ok_json(pdlab(&["synth", "--sigma", "25", "scene:128x96", &noisy]));
    let v = ok_json(pdlab(&[
        "estimate",
        "--estimator",
        "classical",
        "--png",
        &vis,
        &noisy,
        &nmap,
    ]));
    let sigma = v["mean_sigma"].as_f64().unwrap();
    assert!((sigma - 25.0).abs() < 5.0, "{sigma}");
    let map = NoiseMap::load(&nmap).unwrap();
    assert_eq!((map.width(), map.height()), (128, 96));
    assert_eq!(load_image(&vis).unwrap().channels(), 3);
}

#[test]
fn eval_writes_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let clean = path(dir.path(), "clean.png");
    let a = path(dir.path(), "a.png");
    let b = path(dir.path(), "b.png");
    let csv = path(dir.path(), "results.csv");
    ok_json(pdlab(&["synth", "--sigma", "0", "scene:96x96", &clean]));
    ok_json(pdlab(&[
        "synth",
        "--kind",
        "correlated",
        "--seed",
        "1",
        &clean,
        &a,
    ]));
    ok_json(pdlab(&[
        "synth",
        "--kind",
        "correlated",
        "--seed",
        "2",
        &clean,
        &b,
    ]));
    let out = pdlab(&[
        "eval", "--ref", &clean, "--out", &csv, "--k", "0,1", "--stride", "2,3", &a, &b,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("file,psnr_db,ssim,stride,k"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert_eq!(rows[0][3], "2");
    assert_eq!(rows[2][3], "3");
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() > 15.0));
}

#[test]
fn train_then_use_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = path(dir.path(), "toy.ckpt");
    let log = path(dir.path(), "loss.csv");
    let v = ok_json(pdlab(&[
        "train",
        "--steps",
        "4",
        "--batch",
        "2",
        "--patch",
        "12",
        "--channels",
        "4",
        "--seed",
        "5",
        "--log",
        &log,
        "--out",
        &ckpt,
    ]));
    assert_eq!(v["steps"], 4);
    let model = Model::load(&ckpt).unwrap();
    assert_eq!(model.step(), 4);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 5);

    let noisy = path(dir.path(), "noisy.png");
    ok_json(pdlab(&["synth", "scene:64x64", &noisy]));
    let v = ok_json(pdlab(&[
        "denoise",
        "--stride",
        "2",
        "--denoiser",
        "learned",
        "--estimator",
        "learned",
        "--checkpoint",
        &ckpt,
        &noisy,
        &path(dir.path(), "out.png"),
    ]));
    assert_eq!(v["denoiser"], "learned");
    assert_eq!(v["estimator"], "learned");
}
