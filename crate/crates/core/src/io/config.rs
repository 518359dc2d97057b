//! Flat INI-style run configuration.
//!
//! ```text
//! [camera]
//! fx = 200
//! fy = 200
//! cx = 64
//! cy = 48
//! width = 128
//! height = 96
//!
//! [run]
//! pose = poses.txt
//! cap = 80
//! bins = 100
//! seed = 1
//! mode = elaborate
//! ```
//!
//! Keys before the first section header belong to `[run]`. `#` and `;`
//! start comment lines. Command-line flags override file values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::losses::{DEFAULT_BETA, DEFAULT_DEPTH_MASK_MAX};
use crate::metrics::{DEFAULT_BINS, DEFAULT_CAP};
use crate::simulate::{DepthModel, NoiseFamily, NoiseSpec, ScaleModel, SceneSpec};
use crate::uncertainty::ConversionMode;

/// Parses `key = value` lines into `section.key -> value`.
pub fn parse_ini(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::from("run");
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", n + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        out.insert(format!("{section}.{}", k.trim()), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub parallax: Option<PathBuf>,
    pub sigma: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub uncertainty: Option<PathBuf>,
    pub errors: Option<PathBuf>,
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSettings {
    pub depth_model: DepthModel,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub scale_model: ScaleModel,
    pub scale_param: f64,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub intrinsics: Option<CameraIntrinsics>,
    pub pose: Option<PathBuf>,
    pub pose_index: usize,
    pub inputs: InputPaths,
    pub output: Option<PathBuf>,
    pub cap: f64,
    pub mask: f64,
    pub beta: f64,
    pub bins: usize,
    pub seed: u64,
    pub mode: ConversionMode,
    pub scene: SceneSettings,
    pub noise: NoiseSettings,
    pub fit_iters: usize,
    pub fit_learning_rate: f64,
    /// Weight of the log-scale term in `fit`; 1 gives the plain Laplace MLE.
    pub fit_beta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            intrinsics: None,
            pose: None,
            pose_index: 0,
            inputs: InputPaths::default(),
            output: None,
            cap: DEFAULT_CAP,
            mask: DEFAULT_DEPTH_MASK_MAX,
            beta: DEFAULT_BETA,
            bins: DEFAULT_BINS,
            seed: 0,
            mode: ConversionMode::Elaborate,
            scene: SceneSettings {
                depth_model: DepthModel::RandomSmooth,
                z_min: 2.0,
                z_max: 60.0,
            },
            noise: NoiseSettings {
                scale_model: ScaleModel::ProportionalToParallax,
                scale_param: 0.05,
                seed: None,
            },
            fit_iters: 5000,
            fit_learning_rate: 0.1,
            fit_beta: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key} = '{v}': {e}")))
}

/// `fx,fy,cx,cy,width,height`.
pub fn parse_intrinsics(s: &str) -> Result<CameraIntrinsics> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(Error::Config(format!(
            "intrinsics '{s}': expected fx,fy,cx,cy,width,height"
        )));
    }
    CameraIntrinsics::new(
        parse("fx", parts[0])?,
        parse("fy", parts[1])?,
        parse("cx", parts[2])?,
        parse("cy", parts[3])?,
        parse("width", parts[4])?,
        parse("height", parts[5])?,
    )
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_ini(&text)?;
        Ok(cfg)
    }

    /// Overwrites fields present in `text`; unknown keys are an error.
    pub fn apply_ini(&mut self, text: &str) -> Result<()> {
        let kv = parse_ini(text)?;
        let mut camera: [Option<&str>; 6] = [None; 6];
        for (key, v) in &kv {
            let v = v.as_str();
            let path = || Some(PathBuf::from(v));
            match key.as_str() {
                "camera.fx" => camera[0] = Some(v),
                "camera.fy" => camera[1] = Some(v),
                "camera.cx" => camera[2] = Some(v),
                "camera.cy" => camera[3] = Some(v),
                "camera.width" => camera[4] = Some(v),
                "camera.height" => camera[5] = Some(v),
                "camera.intrinsics" | "run.intrinsics" => self.intrinsics = Some(parse_intrinsics(v)?),
                "run.pose" => self.pose = path(),
                "run.pose_index" => self.pose_index = parse(key, v)?,
                "run.output" => self.output = path(),
                "run.cap" => self.cap = parse(key, v)?,
                "run.mask" => self.mask = parse(key, v)?,
                "run.beta" => self.beta = parse(key, v)?,
                "run.bins" => self.bins = parse(key, v)?,
                "run.seed" => self.seed = parse(key, v)?,
                "run.mode" => self.mode = parse(key, v)?,
                "inputs.parallax" => self.inputs.parallax = path(),
                "inputs.sigma" => self.inputs.sigma = path(),
                "inputs.gt" => self.inputs.gt = path(),
                "inputs.pred" => self.inputs.pred = path(),
                "inputs.uncertainty" => self.inputs.uncertainty = path(),
                "inputs.errors" => self.inputs.errors = path(),
                "inputs.samples" => self.inputs.samples = path(),
                "scene.depth_model" => self.scene.depth_model = parse(key, v)?,
                "scene.z_min" => self.scene.z_min = parse(key, v)?,
                "scene.z_max" => self.scene.z_max = parse(key, v)?,
                "noise.scale_model" => self.noise.scale_model = parse(key, v)?,
                "noise.scale_param" => self.noise.scale_param = parse(key, v)?,
                "noise.seed" => self.noise.seed = Some(parse(key, v)?),
                "fit.iters" => self.fit_iters = parse(key, v)?,
                "fit.learning_rate" => self.fit_learning_rate = parse(key, v)?,
                "fit.beta" => self.fit_beta = parse(key, v)?,
                other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
            }
        }
        match camera {
            [None, None, None, None, None, None] => {}
            [Some(fx), Some(fy), Some(cx), Some(cy), Some(w), Some(h)] => {
                self.intrinsics = Some(parse_intrinsics(&format!("{fx},{fy},{cx},{cy},{w},{h}"))?);
            }
            _ => return Err(Error::Config("[camera] needs all of fx, fy, cx, cy, width, height".into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cap > 0.0) || !(self.mask > 0.0) || !(self.beta > 0.0) || self.bins == 0 {
            return Err(Error::Config(format!(
                "cap, mask and beta must be positive and bins at least 1 (cap={}, mask={}, beta={}, bins={})",
                self.cap, self.mask, self.beta, self.bins
            )));
        }
        Ok(())
    }

    pub fn require_intrinsics(&self) -> Result<CameraIntrinsics> {
        self.intrinsics
            .ok_or_else(|| Error::Config("camera intrinsics are required (--intrinsics or [camera])".into()))
    }

    pub fn scene_spec(&self) -> Result<SceneSpec> {
        let k = self.require_intrinsics()?;
        let s = SceneSpec {
            width: k.width,
            height: k.height,
            depth_model: self.scene.depth_model,
            z_min: self.scene.z_min,
            z_max: self.scene.z_max,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let n = NoiseSpec {
            family: NoiseFamily::Laplace,
            scale_model: self.noise.scale_model,
            scale_param: self.noise.scale_param,
            seed: self.noise.seed.unwrap_or(self.seed),
        };
        n.validate()?;
        Ok(n)
    }
}
