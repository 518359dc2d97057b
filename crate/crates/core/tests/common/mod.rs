#![allow(dead_code)]

use depthuq::geometry::{linear_depth_params, CameraIntrinsics, LinearDepthParams, RelativePose};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_intrinsics(r: &mut ChaCha8Rng) -> CameraIntrinsics {
    let w = r.random_range(16..1024);
    let h = r.random_range(16..1024);
    CameraIntrinsics::new(
        r.random_range(50.0..1000.0),
        r.random_range(50.0..1000.0),
        r.random_range(0.0..w as f64),
        r.random_range(0.0..h as f64),
        w,
        h,
    )
    .unwrap()
}

pub fn random_axis(r: &mut ChaCha8Rng) -> nalgebra::Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return nalgebra::Unit::new_normalize(v);
        }
    }
}

pub fn random_pose(r: &mut ChaCha8Rng, max_angle: f64) -> RelativePose {
    let q = UnitQuaternion::from_axis_angle(&random_axis(r), r.random_range(0.0..max_angle));
    let t = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
    RelativePose::from_rotation(q, t).unwrap()
}

/// Random camera, motion and pixel with usable depth parameters.
pub fn random_params(r: &mut ChaCha8Rng) -> (CameraIntrinsics, RelativePose, f64, f64, LinearDepthParams) {
    loop {
        let k = random_intrinsics(r);
        let pose = random_pose(r, 0.3);
        let i = r.random_range(0..k.width) as f64;
        let j = r.random_range(0..k.height) as f64;
        if let Ok(p) = linear_depth_params(&k, &pose, i, j) {
            if p.a > 1e-6 {
                return (k, pose, i, j, p);
            }
        }
    }
}

/// Independent rotation: explicit matrix of the quaternion, transposed.
pub fn oracle_virtual(k: &CameraIntrinsics, pose: &RelativePose, i: f64, j: f64) -> (f64, f64, f64) {
    let [w, x, y, z] = pose.quaternion();
    let m = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let h = [(i - k.cx) / k.fx, (j - k.cy) / k.fy, 1.0];
    let hp: Vec<f64> = (0..3).map(|c| (0..3).map(|r| m[r][c] * h[r]).sum()).collect();
    (k.fx * hp[0] / hp[2], k.fy * hp[1] / hp[2], hp[2])
}

/// `a` and `c` straight from the definitions, via the oracle rotation.
pub fn oracle_params(k: &CameraIntrinsics, pose: &RelativePose, i: f64, j: f64) -> (f64, f64) {
    let (iv, jv, zv) = oracle_virtual(k, pose, i, j);
    let [tx, ty, tz] = pose.translation();
    let a = ((k.fx * tx - tz * iv).powi(2) + (k.fy * ty - tz * jv).powi(2)).sqrt() / zv;
    (a, -tz / zv)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Desk-scale scenario: forward-and-sideways motion with a slight yaw,
/// random-smooth depth in [2, 60] m and parallax-proportional noise.
pub fn desk_scenario(
    seed: u64,
) -> (
    depthuq::simulate::SceneSpec,
    depthuq::simulate::NoiseSpec,
    CameraIntrinsics,
    RelativePose,
) {
    use depthuq::simulate::*;
    let k = CameraIntrinsics::new(200.0, 200.0, 64.0, 48.0, 128, 96).unwrap();
    let q = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 0.03);
    let pose = RelativePose::from_rotation(q, [0.8, 0.1, 0.5]).unwrap();
    let scene = SceneSpec {
        width: 128,
        height: 96,
        depth_model: DepthModel::RandomSmooth,
        z_min: 2.0,
        z_max: 60.0,
        seed,
    };
    let noise = NoiseSpec {
        family: NoiseFamily::Laplace,
        scale_model: ScaleModel::ProportionalToParallax,
        scale_param: 0.05,
        seed: seed.wrapping_add(1000),
    };
    (scene, noise, k, pose)
}
