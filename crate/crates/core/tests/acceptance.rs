//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use depthuq::geometry::{depth_from_parallax, linear_depth_params, parallax_from_depth, RelativePose};
use depthuq::io::write_poses;
use depthuq::losses::*;
use depthuq::metrics::*;
use depthuq::simulate::{end_to_end_case, EndToEndConfig};
use depthuq::uncertainty::*;
use depthuq::{Exec, Quantity, ScalarMap};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(v: f64) -> RelativeUncertainty {
    RelativeUncertainty::new(v).unwrap()
}

/// Parallax giving a positive depth for these parameters.
fn valid_rho(r: &mut rand_chacha::ChaCha8Rng, p: &depthuq::LinearDepthParams) -> f64 {
    let hi = if p.c < 0.0 { p.a / -p.c } else { p.a };
    r.random_range(1e-3 * hi..0.999 * hi)
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1001);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let (_, _, _, _, p) = random_params(&mut r);
        let rho = valid_rho(&mut r, &p);
        let z = depth_from_parallax(&p, rho).unwrap();
        let back = parallax_from_depth(&p, z).unwrap();
        worst = worst.max(rel_err(back, rho));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-9 && secs < 5.0, format!("max rel err {worst:.2e}, {secs:.2} s"))
}

fn range_identity() -> Outcome {
    let mut r = rng(1002);
    let (mut worst, mut nonpositive): (f64, usize) = (0.0, 0);
    for _ in 0..10_000 {
        let (_, _, _, _, p) = random_params(&mut r);
        let rho = valid_rho(&mut r, &p);
        let z = depth_from_parallax(&p, rho).unwrap();
        let d_rho = r.random_range(1e-4..2.0);
        let dz = delta_depth_from_delta_parallax(&p, z, rel(d_rho)).unwrap().value();
        if dz <= 0.0 {
            nonpositive += 1;
        }
        let far = depth_from_parallax(&p, rho / (1.0 + d_rho)).unwrap();
        worst = worst.max(rel_err((1.0 + dz) * z, far));
    }
    outcome(worst < 1e-12 && nonpositive == 0, format!("max rel err {worst:.2e}, {nonpositive} nonpositive"))
}

fn ordering() -> Outcome {
    let mut r = rng(1003);
    let mut violations = 0;
    for _ in 0..10_000 {
        let (_, _, _, _, p) = random_params(&mut r);
        let rho = valid_rho(&mut r, &p);
        let z = depth_from_parallax(&p, rho).unwrap();
        let s1 = r.random_range(1e-4..1.0) * rho;
        let s2 = s1 * r.random_range(1.000_001..4.0);
        let d = |s| delta_depth_from_delta_parallax(&p, z, relative_uncertainty(s, rho).unwrap()).unwrap();
        if d(s1) >= d(s2) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations in 10000"))
}

fn lateral_collapse() -> Outcome {
    let mut r = rng(1004);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let k = random_intrinsics(&mut r);
        let q = nalgebra::UnitQuaternion::from_axis_angle(&random_axis(&mut r), r.random_range(0.0..0.3));
        let pose = RelativePose::from_rotation(q, [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), 0.0]).unwrap();
        let (i, j) = (r.random_range(0..k.width) as f64, r.random_range(0..k.height) as f64);
        let Ok(p) = linear_depth_params(&k, &pose, i, j) else { continue };
        let rho = r.random_range(0.01..100.0);
        let Ok(z) = depth_from_parallax(&p, rho) else { continue };
        let d_rho = relative_uncertainty(r.random_range(1e-3..10.0), rho).unwrap();
        let dz = delta_depth_from_delta_parallax(&p, z, d_rho).unwrap();
        worst = worst.max((dz.value() - d_rho.value()).abs());
    }
    outcome(worst <= 1e-15, format!("max |dz - drho| {worst:.1e}"))
}

fn random_pyramid(r: &mut rand_chacha::ChaCha8Rng, lo: f32, hi: f32) -> MapPyramid {
    let levels = [(4, 3), (2, 2)]
        .iter()
        .map(|&(w, h)| ScalarMap::new(w, h, (0..w * h).map(|_| r.random_range(lo..hi)).collect(), Quantity::DepthM).unwrap())
        .collect();
    MapPyramid::new(levels).unwrap()
}

fn gradients() -> Outcome {
    let mut r = rng(1005);
    let cfg = LossConfig { levels: 2, ..LossConfig::default() };
    let (mut worst, mut nonzero): (f64, usize) = (0.0, 0);
    for n in 0..1000 {
        let gt = random_pyramid(&mut r, 1.0, 50.0);
        let pred = random_pyramid(&mut r, 1.0, 50.0);
        let s = random_pyramid(&mut r, 0.05, 3.0);
        let prob = if n % 2 == 0 {
            NllProblem::depth(&gt, &pred, &random_pyramid(&mut r, 0.5, 5.0), &s, &cfg).unwrap()
        } else {
            NllProblem::parallax(&gt, &pred, &s, None, &cfg).unwrap()
        };
        let x = prob.flat_variables();
        worst = worst.max(gradient_check(&prob, &x, DEFAULT_FD_STEP).unwrap().max_rel_error);
        nonzero += prob.evaluate().d_pred.iter().flatten().filter(|g| **g != 0.0).count();
    }
    outcome(
        worst < 1e-6 && nonzero == 0,
        format!("max rel err {worst:.2e} over 1000 points, {nonzero} nonzero residual gradients"),
    )
}

/// Scale where the loss gradient of a single-pixel problem changes sign,
/// found by bisection on the gradient the library computes.
fn numeric_minimizer(prob: &NllProblem, lo: f64, hi: f64) -> f64 {
    let mut x = prob.flat_variables();
    let mut slope = |s: f64| {
        x[1] = s;
        prob.gradient_at(&x)[1]
    };
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn stationarity() -> Outcome {
    let mut r = rng(1006);
    let one = |v: f32| MapPyramid::single(ScalarMap::filled(1, 1, v, Quantity::DepthM).unwrap());
    let mut worst: f64 = 0.0;
    for n in 0..1000 {
        let beta = r.random_range(0.01..1.0);
        let cfg = LossConfig { beta, levels: 1, ..LossConfig::default() };
        let (gt, pred): (f32, f32) = (r.random_range(1.0..100.0), r.random_range(1.0..100.0));
        let res = (gt as f64 - pred as f64).abs();
        let (found, closed) = if n % 2 == 0 {
            let a: f32 = r.random_range(0.1..10.0);
            let prob = NllProblem::depth(&one(gt), &one(pred), &one(a), &one(1.0), &cfg).unwrap();
            (numeric_minimizer(&prob, 1e-6, 1e6), optimal_scale(res, a as f64, beta))
        } else {
            let prob = NllProblem::parallax(&one(gt), &one(pred), &one(1.0), None, &cfg).unwrap();
            (numeric_minimizer(&prob, 1e-6, 1e6), optimal_scale(res, 1.0, beta))
        };
        if res > 0.0 {
            worst = worst.max(rel_err(found, closed));
        }
    }
    outcome(worst < 1e-10, format!("bisection vs closed form, max rel diff {worst:.2e}"))
}

fn mle() -> Outcome {
    let mut r = rng(1007);
    let samples: Vec<f64> = (0..10_000)
        .map(|_| {
            let u: f64 = r.random_range(-0.5..0.5);
            3.0 - 0.5 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect();
    let fit = laplace_mle_fit(&samples, 1.0, 5000, 0.1).unwrap();
    let pass = (fit.location - 3.0).abs() <= 0.02 && (fit.scale - 0.5).abs() <= 0.02;
    outcome(pass, format!("location {:.4}, scale {:.4}", fit.location, fit.scale))
}

const NINE: [f64; 9] = [0.9, 0.15, 0.4, 0.05, 0.7, 0.3, 0.55, 0.2, 0.85];

fn ause_oracle() -> Outcome {
    let mut r = rng(1008);
    let e: Vec<f64> = (0..10_000).map(|_| r.random_range(0.0..1.0f64).powi(2)).collect();
    let self_ranked = sparsification_values(&e, &e, Reducer::Mean, DEFAULT_BINS).unwrap().ause;

    // All 9! orderings of a 3x3 error map; none may dip below the oracle.
    let mut ranks: Vec<f64> = (0..9).map(f64::from).collect();
    let mut c = [0usize; 9];
    let mut min_gap = f64::INFINITY;
    let mut visit = |u: &[f64]| {
        let s = sparsification_values_with(Exec::Sequential, &NINE, u, Reducer::Mean, 9).unwrap();
        for (m, o) in s.metric_curve.iter().zip(&s.oracle_curve) {
            min_gap = min_gap.min(m - o);
        }
    };
    visit(&ranks);
    let mut i = 0;
    while i < 9 {
        if c[i] < i {
            ranks.swap(if i % 2 == 0 { 0 } else { c[i] }, i);
            visit(&ranks);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }

    let u: Vec<f64> = e.iter().map(|v| v + r.random_range(0.0..0.5)).collect();
    let cube: Vec<f64> = u.iter().map(|v| v * v * v).collect();
    let a = sparsification_values(&e, &u, Reducer::Mean, DEFAULT_BINS).unwrap().ause;
    let b = sparsification_values(&e, &cube, Reducer::Mean, DEFAULT_BINS).unwrap().ause;
    let pass = self_ranked == 0.0 && min_gap >= -1e-12 && (a - b).abs() <= 1e-12;
    outcome(
        pass,
        format!("oracle ause {self_ranked}, min gap over 9! orderings {min_gap:.1e}, cube diff {:.1e}", (a - b).abs()),
    )
}

fn metrics_sanity() -> Outcome {
    // Depths k * 10/256 are exact in f32 and so are their 1.3 multiples k * 13/256.
    let gt = ScalarMap::from_fn(64, 40, Quantity::DepthM, |i, j| (1 + i + 64 * j) as f32 * 10.0 / 256.0).unwrap();
    let scaled = ScalarMap::from_fn(64, 40, Quantity::DepthM, |i, j| (1 + i + 64 * j) as f32 * 13.0 / 256.0).unwrap();
    let same = depth_metrics(&gt, &gt, DEFAULT_CAP).unwrap();
    let off = depth_metrics(&gt, &scaled, DEFAULT_CAP).unwrap();
    let inside = gt.data().iter().filter(|g| (**g as f64) < 80.0).count();
    let perfect = (same.abs_rel, same.rmse_log, same.delta_125) == (0.0, 0.0, 1.0);
    let pass = perfect && off.delta_125 == 0.0 && (off.abs_rel - 0.3).abs() <= 1e-9 && same.n_valid == inside && inside < 2560;
    outcome(
        pass,
        format!(
            "identity {:?}, 1.3x abs_rel {:.12} delta {}, {} of 2560 pixels under the cap",
            (same.abs_rel, same.rmse_log, same.delta_125),
            off.abs_rel,
            off.delta_125,
            same.n_valid
        ),
    )
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let (mut sum_e, mut sum_p) = (0.0, 0.0);
    for seed in 0..20 {
        let (scene, noise, k, pose) = desk_scenario(seed);
        let run = |mode| {
            let cfg = EndToEndConfig { mode, ..EndToEndConfig::default() };
            end_to_end_case(&scene, &noise, &k, &pose, &cfg).unwrap().ause.abs_rel
        };
        let (e, p) = (run(ConversionMode::Elaborate), run(ConversionMode::Probabilistic));
        sum_e += e;
        sum_p += p;
        if e <= p {
            wins += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        wins >= 16 && secs < 60.0,
        format!(
            "elaborate <= probabilistic in {wins}/20 seeds (mean AuSE {:.4} vs {:.4}), {secs:.1} s",
            sum_e / 20.0,
            sum_p / 20.0
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_depthuq")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Every subcommand's stdout and files, in a fixed order.
fn cli_session(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let cam = ["--intrinsics", "200,200,64,48,128,96", "--pose", "poses.txt", "--seed", "17"];
    let with = |head: &[&'static str], tail: &[&'static str]| -> Vec<&'static str> {
        head.iter().chain(&cam).chain(tail).copied().collect()
    };
    let mut out = vec![
        ("simulate".to_string(), cli(dir, &with(&["simulate"], &["--out-dir", "sim"]))),
        ("convert".to_string(), cli(dir, &with(&["convert"], &["--parallax", "sim/noisy_parallax.pfm", "--out", "z.pfm"]))),
    ];
    for (mode, sigma) in [("elaborate", "sim/sigma_parallax.pfm"), ("probabilistic", "sim/sigma_inv_parallax.pfm")] {
        let args = with(
            &["uncert-convert", "--mode", mode],
            &["--parallax", "sim/noisy_parallax.pfm", "--sigma", sigma, "--out-depth", "zu.pfm", "--out-uncertainty", "u.pfm"],
        );
        out.push((format!("uncert-convert {mode}"), cli(dir, &args)));
        out.push((format!("u.pfm {mode}"), std::fs::read(dir.join("u.pfm")).unwrap()));
        let eval = ["eval", "--gt", "sim/gt_depth.pfm", "--pred", "zu.pfm", "--uncertainty", "u.pfm", "--out", "report.json"];
        out.push((format!("eval {mode}"), cli(dir, &eval)));
        out.push((format!("report {mode}"), std::fs::read(dir.join("report.json")).unwrap()));
    }
    out.push(("sparsify".into(), cli(dir, &["sparsify", "--errors", "u.pfm", "--uncertainty", "zu.pfm", "--out-dir", "curves"])));
    out.push(("fit".into(), cli(dir, &["fit", "--samples", "samples.txt", "--iters", "2000"])));
    for f in [
        "sim/gt_depth.pfm",
        "sim/gt_parallax.pfm",
        "sim/noisy_parallax.pfm",
        "sim/sigma_parallax.pfm",
        "sim/sigma_inv_parallax.pfm",
        "z.pfm",
        "zu.pfm",
        "curves/sparsification.csv",
        "curves/oracle.csv",
        "curves/sparsification_error.csv",
    ] {
        out.push((f.to_string(), std::fs::read(dir.join(f)).unwrap()));
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, _, pose) = desk_scenario(0);
    write_poses(&[pose], dir.path().join("poses.txt")).unwrap();
    let mut r = rng(1011);
    let samples: Vec<String> = (0..1000).map(|_| r.random_range(-2.0..4.0f64).to_string()).collect();
    std::fs::write(dir.path().join("samples.txt"), samples.join("\n")).unwrap();
    let first = cli_session(dir.path());
    let second = cli_session(dir.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    outcome(
        differing.is_empty() && first.len() == second.len(),
        format!("{} outputs compared, differing: {differing:?}", first.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("parallax/depth round trip", round_trip),
        ("depth range identity", range_identity),
        ("uncertainty ordering", ordering),
        ("lateral-motion collapse", lateral_collapse),
        ("loss gradient checks", gradients),
        ("per-pixel NLL stationarity", stationarity),
        ("Laplace MLE recovery", mle),
        ("AuSE oracle", ause_oracle),
        ("metrics sanity", metrics_sanity),
        ("end-to-end ranking comparison", end_to_end),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {}", n + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
