//! Rotation-compensated projection and the parallax/depth relation under a
//! known camera motion.
//!
//! For a pixel `(i, j)` the ray `h = [(i - cx)/fx, (j - cy)/fy, 1]` is
//! rotated by the inverse of the relative rotation, which gives the
//! coordinates seen by a virtual camera placed at the previous position with
//! the current orientation. Depth and parallax are then linked by
//! `z = a / rho + c` where `a` and `c` depend only on the pixel and the motion.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{is_valid, Quantity, ScalarMap, INVALID};
use crate::parallel::{self, Exec};

/// Relative tolerance applied to `max(fx, fy) * |t|` below which `a` is
/// considered to carry no parallax information.
pub const NO_PARALLAX_REL_FLOOR: f64 = 1e-12;

/// `z_V` at or below this fraction of the ray length counts as a ray lying
/// in the image plane.
pub const DEGENERATE_ZV_REL: f64 = 1e-12;

/// Allowed deviation of the quaternion norm from one.
pub const QUATERNION_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Config(format!(
                "focal lengths must be positive and finite: fx={}, fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be at least 1x1".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::Config(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    fn contains(&self, i: f64, j: f64) -> bool {
        (0.0..self.width as f64).contains(&i) && (0.0..self.height as f64).contains(&j)
    }
}

/// Camera motion between two consecutive poses.
///
/// `rotation` maps directions of frame t-1 into frame t. `translation` is
/// expressed in the camera frame at time t (x right, y down, z forward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl RelativePose {
    /// Quaternion given as `(w, x, y, z)`; its norm must be one within
    /// [`QUATERNION_NORM_TOL`].
    pub fn new(quaternion: [f64; 4], translation: [f64; 3]) -> Result<Self> {
        if !quaternion.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::Config("pose components must be finite".into()));
        }
        let [w, x, y, z] = quaternion;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(Error::Config(format!("rotation quaternion has norm {norm}, expected 1")));
        }
        Ok(Self {
            rotation: UnitQuaternion::new_unchecked(q),
            translation: Vector3::from(translation),
        })
    }

    pub fn from_translation(translation: [f64; 3]) -> Result<Self> {
        Self::new([1.0, 0.0, 0.0, 0.0], translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>, translation: [f64; 3]) -> Result<Self> {
        let q = rotation.quaternion();
        Self::new([q.w, q.i, q.j, q.k], translation)
    }

    /// `(w, x, y, z)`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualCoords {
    pub i_v: f64,
    pub j_v: f64,
    pub z_v: f64,
}

/// Coefficients of `z = a / rho + c` for one pixel and one motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDepthParams {
    pub a: f64,
    pub c: f64,
    /// Values of `a` at or below this floor carry no parallax information.
    pub a_floor: f64,
}

impl LinearDepthParams {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if !a.is_finite() || !c.is_finite() || a < 0.0 {
            return Err(Error::Domain(format!("invalid depth parameters a={a}, c={c}")));
        }
        Ok(Self { a, c, a_floor: 0.0 })
    }

    fn require_information(&self) -> Result<()> {
        if self.a <= self.a_floor {
            Err(Error::NoParallaxInformation {
                a: self.a,
                floor: self.a_floor,
            })
        } else {
            Ok(())
        }
    }
}

pub fn virtual_coords(k: &CameraIntrinsics, pose: &RelativePose, i: f64, j: f64) -> Result<VirtualCoords> {
    if !k.contains(i, j) {
        return Err(Error::Domain(format!(
            "pixel ({i}, {j}) outside the {}x{} image",
            k.width, k.height
        )));
    }
    let (di, dj) = (i - k.cx, j - k.cy);
    if pose.rotation == UnitQuaternion::identity() {
        return Ok(VirtualCoords {
            i_v: di,
            j_v: dj,
            z_v: 1.0,
        });
    }
    let h = Vector3::new(di / k.fx, dj / k.fy, 1.0);
    let r = pose.rotation.inverse_transform_vector(&h);
    Ok(VirtualCoords {
        i_v: k.fx * r.x / r.z,
        j_v: k.fy * r.y / r.z,
        z_v: r.z,
    })
}

pub fn linear_depth_params(k: &CameraIntrinsics, pose: &RelativePose, i: f64, j: f64) -> Result<LinearDepthParams> {
    let v = virtual_coords(k, pose, i, j)?;
    let ray_norm = ((i - k.cx) / k.fx).hypot((j - k.cy) / k.fy).hypot(1.0);
    if !(v.z_v > DEGENERATE_ZV_REL * ray_norm) || !v.i_v.is_finite() || !v.j_v.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "pixel ({i}, {j}) is rotated onto or behind the image plane (z_V = {})",
            v.z_v
        )));
    }
    let t = &pose.translation;
    let du = k.fx * t.x - t.z * v.i_v;
    let dv = k.fy * t.y - t.z * v.j_v;
    Ok(LinearDepthParams {
        a: du.hypot(dv) / v.z_v,
        c: -t.z / v.z_v,
        a_floor: NO_PARALLAX_REL_FLOOR * k.fx.max(k.fy) * t.norm(),
    })
}

pub fn depth_from_parallax(p: &LinearDepthParams, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("parallax must be positive, got {rho}")));
    }
    p.require_information()?;
    let z = p.a / rho + p.c;
    if !(z > 0.0) {
        return Err(Error::BehindCamera { depth: z });
    }
    Ok(z)
}

pub fn parallax_from_depth(p: &LinearDepthParams, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("depth must be positive, got {z}")));
    }
    p.require_information()?;
    if !(z > p.c) {
        return Err(Error::Existence { depth: z, c: p.c });
    }
    Ok(p.a / (z - p.c))
}

/// Pixel-wise conversion result; failing pixels hold [`INVALID`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapConversion {
    pub map: ScalarMap,
    pub invalid: usize,
}

pub fn depth_map_from_parallax_map(
    k: &CameraIntrinsics,
    pose: &RelativePose,
    rho: &ScalarMap,
) -> Result<MapConversion> {
    depth_map_from_parallax_map_with(Exec::default(), k, pose, rho)
}

pub fn depth_map_from_parallax_map_with(
    exec: Exec,
    k: &CameraIntrinsics,
    pose: &RelativePose,
    rho: &ScalarMap,
) -> Result<MapConversion> {
    check_map_matches(k, rho)?;
    rho.check_quantity(Quantity::ParallaxPx)?;
    let w = rho.width();
    let data = rho.data();
    let out = parallel::map_indexed(exec, data.len(), |idx| {
        let r = data[idx];
        if !is_valid(r) {
            return INVALID;
        }
        linear_depth_params(k, pose, (idx % w) as f64, (idx / w) as f64)
            .and_then(|p| depth_from_parallax(&p, r as f64))
            .map_or(INVALID, |z| z as f32)
    });
    finish(rho, out, Quantity::DepthM)
}

pub(crate) fn check_map_matches(k: &CameraIntrinsics, m: &ScalarMap) -> Result<()> {
    if m.width() != k.width || m.height() != k.height {
        return Err(Error::ShapeMismatch(format!(
            "map is {}x{} but the camera is {}x{}",
            m.width(),
            m.height(),
            k.width,
            k.height
        )));
    }
    Ok(())
}

pub(crate) fn finish(like: &ScalarMap, data: Vec<f32>, quantity: Quantity) -> Result<MapConversion> {
    // f32 overflow of a finite f64 lands on +inf; treat as invalid too.
    let data: Vec<f32> = data
        .into_iter()
        .map(|v| if v.is_finite() { v } else { INVALID })
        .collect();
    let invalid = data.iter().filter(|v| !is_valid(**v)).count();
    Ok(MapConversion {
        map: ScalarMap::new(like.width(), like.height(), data, quantity)?,
        invalid,
    })
}
