//! Conversion of parallax-domain uncertainty into depth-domain uncertainty.
//!
//! Two routes are provided and deliberately kept apart because their outputs
//! have different units:
//!
//! * probabilistic: a Laplace scale on the inverse parallax `zeta = 1/rho`
//!   maps linearly to an absolute depth scale in meters, `sigma_z = a * sigma_zeta`;
//! * relative: `delta_rho = sigma_rho / rho_hat` defines the parallax range
//!   `[rho_hat / (1 + delta_rho), rho_hat]`, whose image in depth is
//!   `[z_hat, (1 + delta_z) z_hat]`. The ratio `delta_z` is dimensionless.

use crate::error::{Error, Result};
use crate::geometry::{
    check_map_matches, depth_from_parallax, finish, linear_depth_params, CameraIntrinsics, LinearDepthParams,
    RelativePose,
};
use crate::map::{is_valid, Quantity, ScalarMap, INVALID};
use crate::parallel::{self, Exec};

/// Dimensionless one-sided range width, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RelativeUncertainty(f64);

impl RelativeUncertainty {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta.is_finite() {
            Ok(Self(delta))
        } else {
            Err(Error::Domain(format!("relative uncertainty must be positive, got {delta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A depth estimate together with its relative uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertainDepth {
    pub z_hat: f64,
    pub delta_z: RelativeUncertainty,
}

impl UncertainDepth {
    /// `[z_hat, (1 + delta_z) z_hat]`.
    pub fn range(&self) -> (f64, f64) {
        (self.z_hat, (1.0 + self.delta_z.0) * self.z_hat)
    }
}

pub fn sigma_depth_from_sigma_inv_parallax(p: &LinearDepthParams, sigma_zeta: f64) -> Result<f64> {
    if !(sigma_zeta >= 0.0) || !sigma_zeta.is_finite() {
        return Err(Error::Domain(format!("inverse-parallax scale must be >= 0, got {sigma_zeta}")));
    }
    Ok(p.a * sigma_zeta)
}

/// First-order propagation of a parallax scale to the inverse parallax,
/// `sigma_zeta = sigma_rho / rho_hat^2`.
pub fn sigma_inv_parallax_from_sigma_parallax(sigma_rho: f64, rho_hat: f64) -> Result<f64> {
    if !(sigma_rho >= 0.0) || !(rho_hat > 0.0) || !sigma_rho.is_finite() || !rho_hat.is_finite() {
        return Err(Error::Domain(format!(
            "need sigma >= 0 and rho > 0, got sigma={sigma_rho}, rho={rho_hat}"
        )));
    }
    Ok(sigma_rho / (rho_hat * rho_hat))
}

pub fn relative_uncertainty(sigma_rho: f64, rho_hat: f64) -> Result<RelativeUncertainty> {
    if !(sigma_rho > 0.0) || !(rho_hat > 0.0) {
        return Err(Error::Domain(format!(
            "need sigma > 0 and rho > 0, got sigma={sigma_rho}, rho={rho_hat}"
        )));
    }
    RelativeUncertainty::new(sigma_rho / rho_hat)
}

/// `delta_z = c/z + (1 + delta_rho)(1 - c/z) - 1`, evaluated in the
/// equivalent form `delta_rho * (1 - c/z)` which is exact when `c = 0`.
/// Requires the condition of existence `z_hat > c`.
pub fn delta_depth_from_delta_parallax(
    p: &LinearDepthParams,
    z_hat: f64,
    delta_rho: RelativeUncertainty,
) -> Result<RelativeUncertainty> {
    if !(z_hat > 0.0) || !z_hat.is_finite() {
        return Err(Error::Domain(format!("depth must be positive, got {z_hat}")));
    }
    if !(z_hat > p.c) {
        return Err(Error::Existence { depth: z_hat, c: p.c });
    }
    RelativeUncertainty::new(delta_rho.0 * (1.0 - p.c / z_hat))
}

/// Depth plus a per-pixel uncertainty map, with the number of failing pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthWithUncertainty {
    pub depth: ScalarMap,
    pub uncertainty: ScalarMap,
    pub invalid: usize,
}

fn check_inputs(k: &CameraIntrinsics, rho: &ScalarMap, sigma: &ScalarMap) -> Result<()> {
    check_map_matches(k, rho)?;
    rho.check_shape(sigma, "parallax vs uncertainty")?;
    rho.check_quantity(Quantity::ParallaxPx)
}

/// Per-pixel outcome: the depth, and the uncertainty when it exists.
type PixelResult = Result<(f64, Option<f64>)>;

fn pixel_delta(k: &CameraIntrinsics, pose: &RelativePose, i: usize, j: usize, rho: f64, sigma: f64) -> PixelResult {
    let p = linear_depth_params(k, pose, i as f64, j as f64)?;
    let z = depth_from_parallax(&p, rho)?;
    let d = relative_uncertainty(sigma, rho).and_then(|d| delta_depth_from_delta_parallax(&p, z, d));
    Ok((z, d.ok().map(|d| d.0)))
}

fn pixel_sigma(k: &CameraIntrinsics, pose: &RelativePose, i: usize, j: usize, rho: f64, sigma_zeta: f64) -> PixelResult {
    let p = linear_depth_params(k, pose, i as f64, j as f64)?;
    let z = depth_from_parallax(&p, rho)?;
    Ok((z, sigma_depth_from_sigma_inv_parallax(&p, sigma_zeta).ok()))
}

/// Pixels whose depth converts but whose uncertainty does not (for example
/// a zero scale in the relative route) keep their depth.
fn convert_maps<F>(exec: Exec, rho: &ScalarMap, sigma: &ScalarMap, out_tag: Quantity, f: F) -> Result<DepthWithUncertainty>
where
    F: Fn(usize, usize, f64, f64) -> PixelResult + Sync + Send,
{
    let w = rho.width();
    let (r, s) = (rho.data(), sigma.data());
    let pairs = parallel::map_indexed(exec, r.len(), |idx| {
        if !is_valid(r[idx]) {
            return (INVALID, INVALID);
        }
        let s = if is_valid(s[idx]) { s[idx] as f64 } else { f64::NAN };
        match f(idx % w, idx / w, r[idx] as f64, s) {
            Ok((z, u)) if (z as f32).is_finite() => {
                let u = u.map(|u| u as f32).filter(|u| u.is_finite()).unwrap_or(INVALID);
                (z as f32, u)
            }
            _ => (INVALID, INVALID),
        }
    });
    let (z, u): (Vec<f32>, Vec<f32>) = pairs.into_iter().unzip();
    let depth = finish(rho, z, Quantity::DepthM)?;
    let uncertainty = finish(rho, u, out_tag)?;
    Ok(DepthWithUncertainty {
        invalid: depth.invalid,
        depth: depth.map,
        uncertainty: uncertainty.map,
    })
}

/// Depth and relative depth uncertainty from parallax and its scale.
pub fn delta_depth_map(
    k: &CameraIntrinsics,
    pose: &RelativePose,
    rho: &ScalarMap,
    sigma_rho: &ScalarMap,
) -> Result<DepthWithUncertainty> {
    delta_depth_map_with(Exec::default(), k, pose, rho, sigma_rho)
}

pub fn delta_depth_map_with(
    exec: Exec,
    k: &CameraIntrinsics,
    pose: &RelativePose,
    rho: &ScalarMap,
    sigma_rho: &ScalarMap,
) -> Result<DepthWithUncertainty> {
    check_inputs(k, rho, sigma_rho)?;
    convert_maps(exec, rho, sigma_rho, Quantity::Delta, |i, j, r, s| pixel_delta(k, pose, i, j, r, s))
}

/// Depth and absolute depth scale (meters) from parallax and the
/// inverse-parallax scale.
pub fn sigma_depth_map(
    k: &CameraIntrinsics,
    pose: &RelativePose,
    rho: &ScalarMap,
    sigma_zeta: &ScalarMap,
) -> Result<DepthWithUncertainty> {
    sigma_depth_map_with(Exec::default(), k, pose, rho, sigma_zeta)
}

pub fn sigma_depth_map_with(
    exec: Exec,
    k: &CameraIntrinsics,
    pose: &RelativePose,
    rho: &ScalarMap,
    sigma_zeta: &ScalarMap,
) -> Result<DepthWithUncertainty> {
    check_inputs(k, rho, sigma_zeta)?;
    convert_maps(exec, rho, sigma_zeta, Quantity::Sigma, |i, j, r, s| pixel_sigma(k, pose, i, j, r, s))
}

/// Which parallax-to-depth uncertainty conversion to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionMode {
    /// Absolute depth scale `a * sigma_zeta` (meters).
    Probabilistic,
    /// Relative depth uncertainty `delta_z` (dimensionless).
    Elaborate,
}

impl std::str::FromStr for ConversionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probabilistic" => Ok(Self::Probabilistic),
            "elaborate" => Ok(Self::Elaborate),
            other => Err(Error::Config(format!("unknown conversion mode '{other}'"))),
        }
    }
}

/// Converts a parallax estimate and its parallax-domain scale with the
/// chosen route. The probabilistic route first propagates `sigma_rho` to the
/// inverse parallax with [`sigma_inv_parallax_map`].
pub fn convert_with(
    exec: Exec,
    mode: ConversionMode,
    k: &CameraIntrinsics,
    pose: &RelativePose,
    rho: &ScalarMap,
    sigma_rho: &ScalarMap,
) -> Result<DepthWithUncertainty> {
    match mode {
        ConversionMode::Elaborate => delta_depth_map_with(exec, k, pose, rho, sigma_rho),
        ConversionMode::Probabilistic => {
            let sigma_zeta = sigma_inv_parallax_map(rho, sigma_rho)?;
            sigma_depth_map_with(exec, k, pose, rho, &sigma_zeta)
        }
    }
}

/// Pixel-wise `sigma_rho / rho_hat^2`, tagged as an inverse-parallax scale.
pub fn sigma_inv_parallax_map(rho: &ScalarMap, sigma_rho: &ScalarMap) -> Result<ScalarMap> {
    rho.check_shape(sigma_rho, "parallax vs uncertainty")?;
    let data = rho
        .data()
        .iter()
        .zip(sigma_rho.data())
        .map(|(&r, &s)| {
            if !is_valid(r) || !is_valid(s) {
                return INVALID;
            }
            sigma_inv_parallax_from_sigma_parallax(s as f64, r as f64)
                .map(|v| v as f32)
                .ok()
                .filter(|v| v.is_finite())
                .unwrap_or(INVALID)
        })
        .collect();
    ScalarMap::new(rho.width(), rho.height(), data, Quantity::InvParallax)
}
