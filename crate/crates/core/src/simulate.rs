//! Seeded synthetic scenes, Laplace parallax noise and the end-to-end check.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). A generator is keyed with
//! `ChaCha8Rng::seed_from_u64(seed)`; scene parameters are drawn from stream
//! 0 and the noise of pixel `idx` (row-major) from stream `idx + 1` of the
//! noise seed. Each pixel therefore has its own stream and the outputs do
//! not depend on the execution order.

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{linear_depth_params, parallax_from_depth, CameraIntrinsics, RelativePose};
use crate::map::{is_valid, Quantity, ScalarMap, INVALID};
use crate::metrics::{ause_all_with, depth_metrics, AuseSet, DepthMetrics, DEFAULT_BINS, DEFAULT_CAP};
use crate::parallel::{self, Exec};
use crate::uncertainty::{convert_with, ConversionMode, DepthWithUncertainty};

/// Parallax floor applied after adding noise.
pub const RHO_MIN: f64 = 1e-4;
/// Largest tolerated fraction of scene pixels without valid parallax.
pub const MAX_INVALID_FRACTION: f64 = 0.01;
/// Largest tolerated fraction of clamped pixels in the end-to-end case.
pub const MAX_CLAMPED_FRACTION: f64 = 0.001;
const BUMPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthModel {
    /// Every pixel at `z_min`.
    Constant,
    /// Linear in the row index, `z_min` on the top row to `z_max` on the bottom row.
    FrontoPlaneRamp,
    /// Sum of 8 random low-frequency cosines rescaled to `[z_min, z_max]`.
    RandomSmooth,
}

impl std::str::FromStr for DepthModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "fronto-plane-ramp" => Ok(Self::FrontoPlaneRamp),
            "random-smooth" => Ok(Self::RandomSmooth),
            other => Err(Error::Config(format!("unknown depth model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub depth_model: DepthModel,
    pub z_min: f64,
    pub z_max: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_min > 0.0 && self.z_min < self.z_max && self.z_max.is_finite()) {
            return Err(Error::Config(format!(
                "depth range must satisfy 0 < z_min < z_max, got [{}, {}]",
                self.z_min, self.z_max
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("scene must be at least 1x1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleModel {
    Constant,
    ProportionalToParallax,
}

impl std::str::FromStr for ScaleModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "proportional-to-parallax" => Ok(Self::ProportionalToParallax),
            other => Err(Error::Config(format!("unknown scale model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub scale_model: ScaleModel,
    /// Laplace scale (constant model) or its ratio to the parallax
    /// (proportional model). Zero yields noise-free output.
    pub scale_param: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_param >= 0.0) || !self.scale_param.is_finite() {
            return Err(Error::Config(format!("noise scale must be >= 0, got {}", self.scale_param)));
        }
        Ok(())
    }

    fn scale_at(&self, rho: f64) -> f64 {
        match self.scale_model {
            ScaleModel::Constant => self.scale_param,
            ScaleModel::ProportionalToParallax => self.scale_param * rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub depth: ScalarMap,
    pub parallax: ScalarMap,
    pub invalid: usize,
}

fn depth_field(exec: Exec, spec: &SceneSpec) -> Vec<f64> {
    let (w, h) = (spec.width, spec.height);
    let span = spec.z_max - spec.z_min;
    match spec.depth_model {
        DepthModel::Constant => vec![spec.z_min; w * h],
        DepthModel::FrontoPlaneRamp => parallel::map_indexed(exec, w * h, |idx| {
            let j = idx / w;
            let t = if h > 1 { j as f64 / (h - 1) as f64 } else { 0.0 };
            spec.z_min + span * t
        }),
        DepthModel::RandomSmooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let bumps: Vec<[f64; 4]> = (0..BUMPS)
                .map(|_| {
                    let fx = 2.0 * rng.random::<f64>();
                    let fy = 2.0 * rng.random::<f64>();
                    let phase = std::f64::consts::TAU * rng.random::<f64>();
                    let amp = 0.5 + 0.5 * rng.random::<f64>();
                    [fx, fy, phase, amp]
                })
                .collect();
            let raw = parallel::map_indexed(exec, w * h, |idx| {
                let (x, y) = ((idx % w) as f64 / w as f64, (idx / w) as f64 / h as f64);
                bumps
                    .iter()
                    .map(|[fx, fy, ph, amp]| amp * (std::f64::consts::TAU * (fx * x + fy * y) + ph).cos())
                    .sum::<f64>()
            });
            let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= 0.0 {
                return vec![spec.z_min + 0.5 * span; w * h];
            }
            raw.iter().map(|v| spec.z_min + span * (v - lo) / (hi - lo)).collect()
        }
    }
}

/// Ground-truth depth and the parallax it induces under `pose`.
pub fn generate_scene(spec: &SceneSpec, k: &CameraIntrinsics, pose: &RelativePose) -> Result<Scene> {
    generate_scene_with(Exec::default(), spec, k, pose)
}

pub fn generate_scene_with(exec: Exec, spec: &SceneSpec, k: &CameraIntrinsics, pose: &RelativePose) -> Result<Scene> {
    spec.validate()?;
    if (spec.width, spec.height) != (k.width, k.height) {
        return Err(Error::Config(format!(
            "scene is {}x{} but the camera is {}x{}",
            spec.width, spec.height, k.width, k.height
        )));
    }
    let w = spec.width;
    let depth: Vec<f32> = depth_field(exec, spec).into_iter().map(|z| z as f32).collect();
    let parallax = parallel::map_indexed(exec, depth.len(), |idx| {
        linear_depth_params(k, pose, (idx % w) as f64, (idx / w) as f64)
            .and_then(|p| parallax_from_depth(&p, depth[idx] as f64))
            .map(|r| r as f32)
            .ok()
            .filter(|r| r.is_finite() && *r > 0.0)
            .unwrap_or(INVALID)
    });
    let invalid = parallax.iter().filter(|v| !is_valid(**v)).count();
    if invalid as f64 > MAX_INVALID_FRACTION * parallax.len() as f64 {
        return Err(Error::DegenerateSetup(format!(
            "{invalid} of {} pixels have no valid parallax under this pose",
            parallax.len()
        )));
    }
    let depth: Vec<f32> = depth
        .iter()
        .zip(&parallax)
        .map(|(&z, &r)| if is_valid(r) { z } else { INVALID })
        .collect();
    Ok(Scene {
        depth: ScalarMap::new(w, spec.height, depth, Quantity::DepthM)?,
        parallax: ScalarMap::new(w, spec.height, parallax, Quantity::ParallaxPx)?,
        invalid,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedParallax {
    pub noisy: ScalarMap,
    /// Laplace scale used at each pixel.
    pub sigma: ScalarMap,
    /// Pixels raised to [`RHO_MIN`] after the noise was added.
    pub clamped: usize,
}

/// Inverse-CDF Laplace draw from `u` in (0, 1).
fn laplace(u: f64, scale: f64) -> f64 {
    let v = u - 0.5;
    -scale * v.signum() * (1.0 - 2.0 * v.abs()).ln()
}

fn pixel_rng(base: &ChaCha8Rng, idx: usize) -> ChaCha8Rng {
    let mut r = base.clone();
    r.set_stream(idx as u64 + 1);
    r
}

/// Adds independent Laplace noise to every valid pixel.
pub fn corrupt(parallax: &ScalarMap, noise: &NoiseSpec) -> Result<CorruptedParallax> {
    corrupt_with(Exec::default(), parallax, noise)
}

pub fn corrupt_with(exec: Exec, parallax: &ScalarMap, noise: &NoiseSpec) -> Result<CorruptedParallax> {
    noise.validate()?;
    parallax.check_quantity(Quantity::ParallaxPx)?;
    let data = parallax.data();
    let scales = parallel::map_indexed(exec, data.len(), |idx| {
        if is_valid(data[idx]) {
            noise.scale_at(data[idx] as f64) as f32
        } else {
            INVALID
        }
    });
    let scales = ScalarMap::new(parallax.width(), parallax.height(), scales, Quantity::Sigma)?;
    corrupt_with_scales(exec, parallax, &scales, noise.seed)
}

/// Adds Laplace noise with an explicit per-pixel scale. Pixels where either
/// map is invalid stay invalid.
pub fn corrupt_with_scales(exec: Exec, parallax: &ScalarMap, scales: &ScalarMap, seed: u64) -> Result<CorruptedParallax> {
    parallax.check_quantity(Quantity::ParallaxPx)?;
    parallax.check_shape(scales, "parallax vs noise scale")?;
    if let Some(b) = scales.data().iter().find(|b| is_valid(**b) && **b < 0.0) {
        return Err(Error::Config(format!("noise scale must be >= 0, got {b}")));
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let (data, b) = (parallax.data(), scales.data());
    let out = parallel::map_indexed(exec, data.len(), |idx| {
        if !is_valid(data[idx]) || !is_valid(b[idx]) {
            return (INVALID, INVALID, false);
        }
        let u: f64 = pixel_rng(&base, idx).sample(Open01);
        let noisy = data[idx] as f64 + laplace(u, b[idx] as f64);
        let clamped = noisy < RHO_MIN;
        ((if clamped { RHO_MIN } else { noisy }) as f32, b[idx], clamped)
    });
    let clamped = out.iter().filter(|p| p.2).count();
    let (w, h) = (parallax.width(), parallax.height());
    Ok(CorruptedParallax {
        noisy: ScalarMap::new(w, h, out.iter().map(|p| p.0).collect(), Quantity::ParallaxPx)?,
        sigma: ScalarMap::new(w, h, out.iter().map(|p| p.1).collect(), Quantity::Sigma)?,
        clamped,
    })
}

/// Permutes the valid values of `map` among its valid pixels.
pub fn shuffle_valid(map: &ScalarMap, seed: u64) -> Result<ScalarMap> {
    let mut values: Vec<f32> = map.data().iter().copied().filter(|v| is_valid(*v)).collect();
    values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut it = values.into_iter();
    let data = map
        .data()
        .iter()
        .map(|&v| if is_valid(v) { it.next().unwrap_or(INVALID) } else { INVALID })
        .collect();
    ScalarMap::new(map.width(), map.height(), data, map.quantity())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndToEndConfig {
    pub mode: ConversionMode,
    pub cap: f64,
    pub n_bins: usize,
}

impl Default for EndToEndConfig {
    fn default() -> Self {
        Self {
            mode: ConversionMode::Elaborate,
            cap: DEFAULT_CAP,
            n_bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndToEndResult {
    pub metrics: DepthMetrics,
    pub ause: AuseSet,
    /// Pixels lost in the scene or in the conversion.
    pub invalid: usize,
    pub clamped: usize,
}

/// Intermediate maps of a synthetic run.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRun {
    pub scene: Scene,
    pub noisy: CorruptedParallax,
}

pub fn synthesize(
    exec: Exec,
    scene: &SceneSpec,
    noise: &NoiseSpec,
    k: &CameraIntrinsics,
    pose: &RelativePose,
) -> Result<SyntheticRun> {
    let scene = generate_scene_with(exec, scene, k, pose)?;
    let noisy = corrupt_with(exec, &scene.parallax, noise)?;
    if noisy.clamped as f64 > MAX_CLAMPED_FRACTION * scene.parallax.len() as f64 {
        return Err(Error::DegenerateSetup(format!(
            "noise clamping hit {} of {} pixels",
            noisy.clamped,
            scene.parallax.len()
        )));
    }
    Ok(SyntheticRun { scene, noisy })
}

/// Metrics and AuSE of an estimate against ground-truth depth.
pub fn evaluate_estimate(
    exec: Exec,
    gt_depth: &ScalarMap,
    estimate: &DepthWithUncertainty,
    cap: f64,
    n_bins: usize,
) -> Result<(DepthMetrics, AuseSet)> {
    let metrics = depth_metrics(gt_depth, &estimate.depth, cap)?;
    let ause = ause_all_with(exec, gt_depth, &estimate.depth, &estimate.uncertainty, n_bins, cap)?;
    Ok((metrics, ause))
}

/// Treats the noisy parallax as the estimate and the true noise scale as its
/// uncertainty, converts both to depth with `cfg.mode`, and evaluates
/// against the ground truth.
pub fn end_to_end_case(
    scene: &SceneSpec,
    noise: &NoiseSpec,
    k: &CameraIntrinsics,
    pose: &RelativePose,
    cfg: &EndToEndConfig,
) -> Result<EndToEndResult> {
    end_to_end_case_with(Exec::default(), scene, noise, k, pose, cfg)
}

pub fn end_to_end_case_with(
    exec: Exec,
    scene: &SceneSpec,
    noise: &NoiseSpec,
    k: &CameraIntrinsics,
    pose: &RelativePose,
    cfg: &EndToEndConfig,
) -> Result<EndToEndResult> {
    let run = synthesize(exec, scene, noise, k, pose)?;
    let est = convert_with(exec, cfg.mode, k, pose, &run.noisy.noisy, &run.noisy.sigma)?;
    let (metrics, ause) = evaluate_estimate(exec, &run.scene.depth, &est, cfg.cap, cfg.n_bins)?;
    Ok(EndToEndResult {
        metrics,
        ause,
        invalid: est.invalid,
        clamped: run.noisy.clamped,
    })
}
