//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use pdlab::denoise::{blend, denoise_nonblind, flat_region_map, pd_refine, DenoiserKind, PdConfig};
use pdlab::estimation::{adapt_stride, ClassicalEstimator, NoiseEstimator, DEFAULT_TAU};
use pdlab::metrics::{psnr, ssim};
use pdlab::neural::{
    conv2d_backward, quadratic_loss_grad, train, ConvNet, LossWeights, Model, ModelConfig,
    TrainConfig,
};
use pdlab::noise::{add_awgn, add_correlated_awgn};
use pdlab::{pd_down, pd_up, scene, Image, NoiseMap, Rng};

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn check(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = v.pass && in_time;
    let budget = match limit {
        Some(l) => format!("{:.2}s of {:.0}s", elapsed.as_secs_f64(), l.as_secs_f64()),
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    let late = if in_time { "" } else { ", over time limit" };
    println!(
        "{} {name}: {} [{budget}{late}]",
        if pass { "PASS" } else { "FAIL" },
        v.detail
    );
    pass
}

fn random_image(w: usize, h: usize, c: usize, rng: &mut Rng) -> Image {
    Image::from_fn(w, h, c, |_, _, _| rng.uniform() as f32).unwrap()
}

fn pixel_shuffle_exactness() -> Verdict {
    let mut rng = Rng::new(1);
    let (mut ok, mut total) = (0, 0);
    for _ in 0..100 {
        let w = 12 * (1 + rng.below(8));
        let h = 12 * (1 + rng.below(8));
        let c = if rng.uniform() < 0.5 { 1 } else { 3 };
        let img = random_image(w, h, c, &mut rng);
        for s in 1..=4 {
            total += 1;
            let back = pd_up(&pd_down(&img, s).unwrap(), s).unwrap();
            let same = back
                .data()
                .iter()
                .zip(img.data())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ok += usize::from(same);
        }
    }
    verdict(ok == total, format!("{ok}/{total} round trips bit-exact"))
}

fn awgn_stride_invariance() -> Verdict {
    let est = ClassicalEstimator::default();
    let mut meta = Rng::new(2);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for i in 0..50 {
        let clean = scene::natural(512, 512, 3, &mut Rng::new(1000 + i));
        let sigma = meta.uniform_in(5.0, 75.0);
        let (noisy, _) = add_awgn(&clean, sigma, &mut Rng::new(2000 + i)).unwrap();
        let r = adapt_stride(&noisy, &est, DEFAULT_TAU, 4).unwrap();
        let max_r = r.r_sequence.iter().map(|&(_, r)| r).fold(0.0, f64::max);
        worst = worst.max(max_r);
        ok += usize::from(max_r < DEFAULT_TAU);
    }
    verdict(
        ok * 100 >= 95 * 50,
        format!(
            "{ok}/50 images with r_s < {DEFAULT_TAU} for s in 1..=4 (need 48), worst r {worst:.4}"
        ),
    )
}

fn correlation_drop() -> Verdict {
    let est = ClassicalEstimator::default();
    let mut meta = Rng::new(3);
    let mut ok = 0;
    let mut drops = 0;
    for i in 0..50 {
        let clean = scene::natural(512, 512, 3, &mut Rng::new(3000 + i));
        let sigma = meta.uniform_in(15.0, 60.0);
        let noisy = add_correlated_awgn(&clean, sigma, 2, &mut Rng::new(4000 + i)).unwrap();
        let r = adapt_stride(&noisy, &est, DEFAULT_TAU, 5).unwrap();
        ok += usize::from(r.chosen_stride == 2);
        drops += usize::from(r.r_sequence[0].1 > r.r_sequence[1].1);
    }
    verdict(
        ok * 100 >= 90 * 50,
        format!("stride 2 chosen in {ok}/50 trials (need 45); r_1 > r_2 in {drops}/50"),
    )
}

fn gradient_correctness() -> Verdict {
    let mut rng = Rng::new(4);
    let mut lines = Vec::new();
    let mut pass = true;

    // conv2d on a 1x2x6x6 input under the linear functional <g, conv(x)>
    let x = random_tensor([1, 2, 6, 6], -1.0, 1.0, &mut rng);
    let w = random_tensor([3, 2, 3, 3], -0.5, 0.5, &mut rng);
    let b = random_tensor([3, 1, 1, 1], -0.5, 0.5, &mut rng);
    let g = random_tensor([1, 3, 6, 6], -1.0, 1.0, &mut rng);
    let (gx, gw, gb) = conv2d_backward(&g, &x, &w, 1).unwrap();
    let gd = to_f64(g.data());
    let f = |xv: &[f64], wv: &[f64], bv: &[f64]| -> f64 {
        let out = conv_ref(xv, Shape::of(&x), wv, bv, 3, 3);
        out.iter().zip(&gd).map(|(a, b)| a * b).sum()
    };
    let (x0, w0, b0) = (to_f64(x.data()), to_f64(w.data()), to_f64(b.data()));
    let fd = |which: usize| -> Vec<f64> {
        let len = [x0.len(), w0.len(), b0.len()][which];
        (0..len)
            .map(|j| {
                let mut v = [x0.clone(), w0.clone(), b0.clone()];
                v[which][j] += EPS;
                let p = f(&v[0], &v[1], &v[2]);
                v[which][j] -= 2.0 * EPS;
                let m = f(&v[0], &v[1], &v[2]);
                (p - m) / (2.0 * EPS)
            })
            .collect()
    };
    let mut per_layer = vec![
        ("conv.input".to_string(), rel_err(gx.data(), &fd(0))),
        ("conv.weight".to_string(), rel_err(gw.data(), &fd(1))),
        ("conv.bias".to_string(), rel_err(gb.data(), &fd(2))),
    ];

    // three-layer conv/ReLU stack, each layer's parameters and the input
    let mut net = ConvNet::new(2, 4, 3, 3, 3, &mut rng).unwrap();
    let x = random_tensor([2, 2, 5, 5], -1.0, 1.0, &mut rng);
    let (y, trace) = net.forward_traced(&x).unwrap();
    let g = random_tensor(y.shape(), -1.0, 1.0, &mut rng);
    let gx = net.backward(&trace, &g).unwrap();
    let gd = to_f64(g.data());
    let layers = |params: &[Vec<f64>]| -> Vec<RefLayer> {
        net.layers()
            .iter()
            .enumerate()
            .map(|(i, l)| RefLayer {
                w: params[2 * i].clone(),
                b: params[2 * i + 1].clone(),
                c_out: l.out_channels(),
                k: 3,
            })
            .collect()
    };
    let eval = |xv: &[f64], params: &[Vec<f64>]| -> (f64, Vec<bool>) {
        let mut pat = Vec::new();
        let (out, _) = net_ref(xv, Shape::of(&x), &layers(params), &mut pat);
        (out.iter().zip(&gd).map(|(a, b)| a * b).sum(), pat)
    };
    let p0: Vec<Vec<f64>> = net.params().map(|p| to_f64(p.data())).collect();
    let xv0 = to_f64(x.data());
    let (_, pat0) = eval(&xv0, &p0);
    let mut skipped = 0;
    // slot 0 is the input, slots 1.. are parameters
    for slot in 0..=p0.len() {
        let (analytic, len): (Vec<f32>, usize) = if slot == 0 {
            (gx.data().to_vec(), xv0.len())
        } else {
            let t = net.params().nth(slot - 1).unwrap();
            (t.grad().unwrap().to_vec(), t.len())
        };
        let mut kept_a = Vec::new();
        let mut kept_n = Vec::new();
        for j in 0..len {
            let mut xs = xv0.clone();
            let mut ps = p0.clone();
            let mut bump = |d: f64| {
                if slot == 0 {
                    xs[j] += d;
                } else {
                    ps[slot - 1][j] += d;
                }
                eval(&xs, &ps)
            };
            let (lp, pp) = bump(EPS);
            let (lm, pm) = bump(-2.0 * EPS);
            if pp != pat0 || pm != pat0 {
                skipped += 1;
                continue;
            }
            kept_a.push(analytic[j]);
            kept_n.push((lp - lm) / (2.0 * EPS));
        }
        let name = if slot == 0 {
            "stack.input".to_string()
        } else {
            let kind = if slot % 2 == 1 { "weight" } else { "bias" };
            format!("stack.{}.{kind}", (slot - 1) / 2)
        };
        per_layer.push((name, rel_err(&kept_a, &kept_n)));
    }

    // quadratic loss
    let pred = random_tensor([2, 3, 4, 4], -1.0, 1.0, &mut rng);
    let target = random_tensor([2, 3, 4, 4], -1.0, 1.0, &mut rng);
    let ga = quadratic_loss_grad(&pred, &target, 1.0).unwrap();
    let (pv, tv) = (to_f64(pred.data()), to_f64(target.data()));
    let gn: Vec<f64> = (0..pv.len())
        .map(|j| {
            let mut a = pv.clone();
            a[j] += EPS;
            let p = half_sq(&a, &tv, 2);
            a[j] -= 2.0 * EPS;
            (p - half_sq(&a, &tv, 2)) / (2.0 * EPS)
        })
        .collect();
    per_layer.push(("loss".to_string(), rel_err(ga.data(), &gn)));

    let worst_layer = per_layer.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    if worst_layer >= 1e-4 {
        pass = false;
        for (n, e) in &per_layer {
            if *e >= 1e-4 {
                lines.push(format!("{n} {e:.2e}"));
            }
        }
    }

    // end to end: composite objective with equal weights
    let cfg = ModelConfig {
        est_layers: 3,
        den_layers: 3,
        channels: 4,
        kernel: 3,
    };
    let mut model = Model::new(cfg, 11).unwrap();
    let batch = random_batch(2, 6, 6, &mut rng);
    let checks = composite_fd(&mut model, &batch, LossWeights::default());
    let worst_e2e = checks.iter().map(|c| c.err).fold(0.0, f64::max);
    let checked: usize = checks.iter().map(|c| c.checked).sum();
    let skipped_e2e: usize = checks.iter().map(|c| c.skipped).sum();
    if worst_e2e >= 1e-3 {
        pass = false;
        for c in checks.iter().filter(|c| c.err >= 1e-3) {
            lines.push(format!("{} {:.2e}", c.name, c.err));
        }
    }
    let coverage_ok = skipped_e2e * 20 < checked + skipped_e2e;
    pass &= coverage_ok;
    verdict(
        pass,
        format!(
            "per-layer max rel err {worst_layer:.2e} over {} tensors (< 1e-4, {skipped} kink skips); \
             end-to-end max rel err {worst_e2e:.2e} over {checked} parameters (< 1e-3, {skipped_e2e} kink skips){}",
            per_layer.len(),
            if lines.is_empty() { String::new() } else { format!("; failing: {}", lines.join(", ")) }
        ),
    )
}

fn toy_training() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |path: &std::path::Path| {
        let mut model = Model::new(ModelConfig::default(), 7).unwrap();
        let cfg = TrainConfig {
            seed: 7,
            ..TrainConfig::default()
        };
        let log = train(&mut model, &cfg).unwrap();
        model.save(path).unwrap();
        log
    };
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    let log = run(&a);
    run(&b);
    let identical = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
    let smooth = log.smoothed(20);
    let (first, last) = (smooth[0], smooth[smooth.len() - 1]);
    verdict(
        last < 0.5 * first && identical,
        format!(
            "200 steps, smoothed loss {first:.2} -> {last:.2} (ratio {:.3}, need < 0.5); checkpoints bit-identical: {identical}",
            last / first
        ),
    )
}

fn oracle_fixpoint() -> Verdict {
    let sizes = [
        (64, 64),
        (97, 131),
        (128, 96),
        (150, 101),
        (73, 200),
        (256, 256),
        (99, 99),
        (160, 67),
        (192, 130),
        (111, 257),
    ];
    let (mut ok, mut runs, mut ragged) = (0, 0, 0);
    for (i, &(w, h)) in sizes.iter().enumerate() {
        let channels = if i % 2 == 0 { 3 } else { 1 };
        let clean = scene::natural(w, h, channels, &mut Rng::new(50 + i as u64));
        let (noisy, _) = add_awgn(&clean, 30.0, &mut Rng::new(60 + i as u64)).unwrap();
        for stride in [None, Some(2 + i % 3)] {
            let cfg = PdConfig {
                denoiser: DenoiserKind::Oracle(clean.clone()),
                stride_override: stride,
                k: 0.0,
                ..PdConfig::default()
            };
            let (out, report) = pd_refine(&noisy, &cfg).unwrap();
            runs += 1;
            ok += usize::from(out == clean);
            ragged += usize::from(w % report.stride != 0 || h % report.stride != 0);
        }
    }
    verdict(
        ok == runs && ragged > 0,
        format!("{ok}/{runs} runs reproduce the clean image bit-exactly ({ragged} with non-divisible sizes)"),
    )
}

fn pd_benefit() -> Verdict {
    let est = ClassicalEstimator::default();
    let mut meta = Rng::new(5);
    let mut ok = 0;
    let mut gains = Vec::new();
    for i in 0..20 {
        let clean = scene::natural(256, 256, 3, &mut Rng::new(5000 + i));
        let sigma = meta.uniform_in(15.0, 50.0);
        let noisy = add_correlated_awgn(&clean, sigma, 2, &mut Rng::new(6000 + i)).unwrap();
        let direct = denoise_nonblind(
            &noisy,
            &est.estimate(&noisy).unwrap(),
            &DenoiserKind::DctThreshold,
        )
        .unwrap();
        let (pd, _) = pd_refine(&noisy, &PdConfig::default()).unwrap();
        let gain = psnr(&pd, &clean).unwrap() - psnr(&direct, &clean).unwrap();
        ok += usize::from(gain >= 0.5);
        gains.push(gain);
    }
    gains.sort_by(f64::total_cmp);
    verdict(
        ok * 100 >= 80 * 20,
        format!(
            "PD beats direct by >= 0.5 dB in {ok}/20 trials (need 16); gain min {:.2} / median {:.2} dB",
            gains[0], gains[10]
        ),
    )
}

fn estimator_accuracy() -> Verdict {
    let est = ClassicalEstimator::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (j, sigma) in [15.0, 25.0, 50.0].into_iter().enumerate() {
        let mut worst = 0.0f64;
        let mut sum = 0.0;
        for i in 0..10u64 {
            let clean = scene::natural(256, 256, 3, &mut Rng::new(7000 + i));
            let (noisy, _) =
                add_awgn(&clean, sigma, &mut Rng::new(8000 + 10 * j as u64 + i)).unwrap();
            let m = est.estimate(&noisy).unwrap().mean_sigma();
            sum += m;
            worst = worst.max((m / sigma - 1.0).abs());
        }
        pass &= worst <= 0.10;
        parts.push(format!(
            "sigma {sigma}: mean {:.2}, worst {:.1}%",
            sum / 10.0,
            100.0 * worst
        ));
    }
    verdict(
        pass,
        format!("{} (each image within 10%)", parts.join("; ")),
    )
}

fn metric_sanity() -> Verdict {
    let a = Image::filled(32, 32, 3, 0.25).unwrap();
    let b = a.map(|v| v + 25.0 / 255.0);
    let p = psnr(&a, &b).unwrap();
    let closed = (p - 20.1720).abs() <= 1e-3;
    let mut rng = Rng::new(6);
    let mut self_ok = true;
    let mut sym_ok = true;
    for _ in 0..20 {
        let w = 11 + rng.below(30);
        let h = 11 + rng.below(30);
        let c = if rng.uniform() < 0.5 { 1 } else { 3 };
        let x = random_image(w, h, c, &mut rng);
        let y = random_image(w, h, c, &mut rng);
        self_ok &= ssim(&x, &x).unwrap() == 1.0 && psnr(&x, &x).unwrap() == f64::INFINITY;
        sym_ok &= ssim(&x, &y).unwrap() == ssim(&y, &x).unwrap();
        sym_ok &= psnr(&x, &y).unwrap() == psnr(&y, &x).unwrap();
    }
    verdict(
        closed && self_ok && sym_ok,
        format!(
            "psnr uniform 25/255 = {p:.4} dB; ssim(x,x) == 1 and psnr(x,x) == inf: {self_ok}; symmetric on 20 pairs: {sym_ok}"
        ),
    )
}

fn blend_contracts() -> Verdict {
    let mut rng = Rng::new(7);
    let mut idem = true;
    let mut ends = true;
    for _ in 0..20 {
        let w = 1 + rng.below(40);
        let h = 1 + rng.below(40);
        let data = (0..6 * w * h).map(|_| rng.uniform() as f32).collect();
        let m = NoiseMap::from_vec(w, h, data).unwrap();
        let f = flat_region_map(&m);
        idem &= flat_region_map(&f) == f;
        let c = if rng.uniform() < 0.5 { 1 } else { 3 };
        let flat = random_image(w, h, c, &mut rng);
        let tex = random_image(w, h, c, &mut rng);
        ends &= blend(&flat, &tex, 0.0).unwrap() == tex;
        ends &= blend(&flat, &tex, 1.0).unwrap() == flat;
    }
    verdict(
        idem && ends,
        format!("flat map idempotent on 20 maps: {idem}; blend k=0 -> T and k=1 -> F bit-exact on 20 pairs: {ends}"),
    )
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        check(
            "pixel-shuffle exactness",
            Some(secs(1)),
            pixel_shuffle_exactness,
        ),
        check(
            "AWGN stride invariance",
            Some(secs(60)),
            awgn_stride_invariance,
        ),
        check("correlation drop", Some(secs(120)), correlation_drop),
        check("gradient correctness", Some(secs(60)), gradient_correctness),
        check("toy training", None, toy_training),
        check("oracle fixpoint", None, oracle_fixpoint),
        check("PD benefit", Some(secs(300)), pd_benefit),
        check("estimator accuracy", None, estimator_accuracy),
        check("metric sanity", None, metric_sanity),
        check("flat map and blend contracts", None, blend_contracts),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
