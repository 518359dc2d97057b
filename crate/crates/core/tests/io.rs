mod common;

use common::*;
use depthuq::io::*;
use depthuq::metrics::{AuseSet, DepthMetrics};
use depthuq::{Error, Quantity, ScalarMap, INVALID};
use proptest::prelude::*;

fn map_strategy() -> impl Strategy<Value = ScalarMap> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        let value = prop_oneof![
            8 => any::<f32>().prop_filter("finite", |v| v.is_finite()),
            1 => Just(INVALID),
        ];
        prop::collection::vec(value, w * h).prop_map(move |d| ScalarMap::new(w, h, d, Quantity::DepthM).unwrap())
    })
}

proptest! {
    #[test]
    fn pfm_round_trip_is_bit_exact(m in map_strategy()) {
        let bytes = encode_pfm(&m);
        let back = decode_pfm(&bytes, Quantity::DepthM).unwrap();
        let bits = |m: &ScalarMap| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&m));
        prop_assert_eq!(encode_pfm(&back), bytes);
    }
}

#[test]
fn pfm_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pfm");
    let m = ScalarMap::from_fn(7, 3, Quantity::ParallaxPx, |i, j| (i as f32 + 0.5) * (j as f32 - 1.25)).unwrap();
    write_map(&m, &path).unwrap();
    let back = read_map(&path, Quantity::ParallaxPx).unwrap();
    assert_eq!(back, m);
    let first = std::fs::read(&path).unwrap();
    write_map(&back, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    assert!(matches!(read_map(dir.path().join("missing.pfm"), Quantity::DepthM), Err(Error::Io { .. })));
}

#[test]
fn hand_built_pfm() {
    let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
    // Bottom row first: (0,1)=3 (1,1)=4, then (0,0)=1 (1,0)=2.
    for v in [3.0f32, 4.0, 1.0, 2.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let m = decode_pfm(&bytes, Quantity::DepthM).unwrap();
    assert_eq!(m.data(), &[1.0, 2.0, 3.0, 4.0]);

    let mut big = b"Pf\n2 2\n1.0\n".to_vec();
    for v in [3.0f32, 4.0, 1.0, 2.0] {
        big.extend_from_slice(&v.to_be_bytes());
    }
    assert_eq!(decode_pfm(&big, Quantity::DepthM).unwrap(), m);

    assert!(matches!(decode_pfm(&bytes[..bytes.len() - 1], Quantity::DepthM), Err(Error::Format(_))));
    assert!(matches!(decode_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0", Quantity::DepthM), Err(Error::Format(_))));
    let mut nan = b"Pf\n1 1\n-1.0\n".to_vec();
    nan.extend_from_slice(&f32::NAN.to_le_bytes());
    match decode_pfm(&nan, Quantity::DepthM) {
        Err(Error::Format(msg)) => assert!(msg.contains("NaN")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn pose_files_round_trip() {
    let mut r = rng(61);
    let poses: Vec<_> = (0..20).map(|_| random_pose(&mut r, 1.0)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poses.txt");
    write_poses(&poses, &path).unwrap();
    let back = read_poses(&path).unwrap();
    assert_eq!(back.len(), 20);
    for (a, b) in poses.iter().zip(&back) {
        assert_eq!(a.translation(), b.translation());
        for (x, y) in a.quaternion().iter().zip(b.quaternion()) {
            assert!((x - y).abs() < 1e-15);
        }
    }
    assert_eq!(read_pose(&path, 3).unwrap().translation(), poses[3].translation());
    assert!(read_pose(&path, 20).is_err());
    assert!(parse_poses("# comment\n\n1 0 0 1 0 0 0\n").unwrap().len() == 1);
    assert!(parse_poses("1 0 0 1 0 0").is_err());
    assert!(parse_poses("1 0 0 2 0 0 0").is_err());
}

fn sample_report(cfg: RunConfig) -> MetricReport {
    let metrics = DepthMetrics {
        abs_rel: 0.1234567890123,
        rmse_log: 0.2 / 3.0,
        delta_125: 0.987654321,
        n_valid: 12_000,
    };
    let ause = AuseSet {
        abs_rel: 1e-17,
        rmse_log: 0.3,
        delta_125: std::f64::consts::PI,
    };
    MetricReport::new(&metrics, Some(&ause), 288, cfg)
}

#[test]
fn report_round_trip_is_lossless() {
    let mut cfg = RunConfig {
        intrinsics: Some(parse_intrinsics("200,201.5,64,48,128,96").unwrap()),
        ..RunConfig::default()
    };
    cfg.inputs.gt = Some("gt.pfm".into());
    cfg.noise.seed = Some(u64::MAX);
    let report = sample_report(cfg);
    assert_eq!(MetricReport::from_json(&report.to_json()).unwrap(), report);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    report.write(&path).unwrap();
    assert_eq!(MetricReport::read(&path).unwrap(), report);
    let without = MetricReport::new(&DepthMetrics { abs_rel: 0.0, rmse_log: 0.0, delta_125: 1.0, n_valid: 4 }, None, 0, RunConfig::default());
    assert_eq!(MetricReport::from_json(&without.to_json()).unwrap(), without);
    assert!(matches!(MetricReport::from_json("{"), Err(Error::Format(_))));
}

#[test]
fn curve_text() {
    let s = format_curve(&[0.0, 0.5], &[1.0, 0.25]);
    assert_eq!(s, "fraction,value\n0.0,1.0\n0.5,0.25\n");
}

#[test]
fn config_file_and_defaults() {
    let c = RunConfig::default();
    assert_eq!((c.cap, c.mask, c.beta, c.bins), (80.0, 400.0, 0.02, 100));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ini");
    std::fs::write(
        &path,
        "seed = 9\n[camera]\nfx = 200\nfy = 200\ncx = 64\ncy = 48\nwidth = 128\nheight = 96\n\
         [run]\nmode = probabilistic\nbins = 50\n[scene]\ndepth_model = constant\n[noise]\nscale_param = 0.1\n",
    )
    .unwrap();
    let c = RunConfig::from_file(&path).unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.bins, 50);
    assert_eq!(c.require_intrinsics().unwrap().width, 128);
    assert_eq!(c.noise_spec().unwrap().seed, 9);
    assert_eq!(c.scene_spec().unwrap().height, 96);

    let mut bad = RunConfig::default();
    assert!(matches!(bad.apply_ini("[run]\nbogus = 1\n"), Err(Error::Config(_))));
    assert!(matches!(bad.apply_ini("[camera]\nfx = 1\n"), Err(Error::Config(_))));
    assert!(matches!(bad.apply_ini("[run]\nbins = many\n"), Err(Error::Config(_))));
    assert!(RunConfig::default().require_intrinsics().is_err());
}
