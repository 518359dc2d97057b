//! Command-line surface. Every subcommand reads its settings from an
//! optional INI file (`--config`) overridden by flags, and returns the text
//! to print on stdout.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::{depth_map_from_parallax_map, RelativePose};
use crate::io::config::parse_intrinsics;
use crate::io::pose::read_pose;
use crate::io::report::{write_curve, MetricReport};
use crate::io::{read_map, write_map, RunConfig};
use crate::losses::laplace_mle_fit;
use crate::map::Quantity;
use crate::metrics::{ause_all, depth_metrics, sparsification, Reducer};
use crate::simulate::{synthesize, DepthModel, ScaleModel};
use crate::uncertainty::{delta_depth_map, sigma_depth_map, sigma_inv_parallax_map, ConversionMode};
use crate::Exec;

#[derive(Debug, Parser)]
#[command(name = "depthuq", version, about = "Parallax/depth conversion with uncertainty, losses and AuSE evaluation")]
pub struct Cli {
    /// INI configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Camera as fx,fy,cx,cy,width,height.
    #[arg(long, global = true)]
    pub intrinsics: Option<String>,
    /// Pose file with `tx ty tz qw qx qy qz` lines.
    #[arg(long, global = true)]
    pub pose: Option<PathBuf>,
    /// Line of the pose file to use (0-based, comments excluded).
    #[arg(long, global = true)]
    pub pose_index: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Ground-truth depth cap for evaluation, meters.
    #[arg(long, global = true)]
    pub cap: Option<f64>,
    /// Depth mask of the NLL losses, meters.
    #[arg(long, global = true)]
    pub mask: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Probabilistic,
    Elaborate,
}

impl From<ModeArg> for ConversionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Probabilistic => ConversionMode::Probabilistic,
            ModeArg::Elaborate => ConversionMode::Elaborate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReducerArg {
    Mean,
    RootMean,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parallax map to depth map.
    Convert {
        #[arg(long)]
        parallax: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parallax and its uncertainty to depth and depth uncertainty.
    ///
    /// elaborate: --sigma is the parallax scale, output is delta_z.
    /// probabilistic: --sigma is the inverse-parallax scale, output is sigma_z in meters.
    UncertConvert {
        #[arg(long)]
        parallax: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<PathBuf>,
        #[arg(long)]
        out_depth: PathBuf,
        #[arg(long)]
        out_uncertainty: PathBuf,
    },
    /// Depth metrics, plus AuSE per metric when an uncertainty map is given.
    Eval {
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sparsification curves of an error map ranked by an uncertainty map.
    Sparsify {
        #[arg(long)]
        errors: Option<PathBuf>,
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "mean")]
        reducer: ReducerArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Synthetic ground truth, noisy parallax and noise scales.
    Simulate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        depth_model: Option<String>,
        #[arg(long)]
        z_min: Option<f64>,
        #[arg(long)]
        z_max: Option<f64>,
        #[arg(long)]
        noise_model: Option<String>,
        #[arg(long)]
        noise_scale: Option<f64>,
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Laplace location and scale of a sample file.
    Fit {
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Log-scale weight of the fitted likelihood (default 1).
        #[arg(long)]
        fit_beta: Option<f64>,
    },
}

/// Configuration after applying the file and then the flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &cli.intrinsics {
        cfg.intrinsics = Some(parse_intrinsics(s)?);
    }
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = cli.$flag.clone() { $field = v.into(); })*
        };
    }
    set!(pose_index => cfg.pose_index, mode => cfg.mode, cap => cfg.cap, mask => cfg.mask,
         beta => cfg.beta, bins => cfg.bins, seed => cfg.seed);
    if let Some(p) = &cli.pose {
        cfg.pose = Some(p.clone());
    }
    let set_path = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if let Some(p) = v {
            *slot = Some(p.clone());
        }
    };
    match &cli.command {
        Command::Convert { parallax, .. } => set_path(&mut cfg.inputs.parallax, parallax),
        Command::UncertConvert { parallax, sigma, .. } => {
            set_path(&mut cfg.inputs.parallax, parallax);
            set_path(&mut cfg.inputs.sigma, sigma);
        }
        Command::Eval { gt, pred, uncertainty, .. } => {
            set_path(&mut cfg.inputs.gt, gt);
            set_path(&mut cfg.inputs.pred, pred);
            set_path(&mut cfg.inputs.uncertainty, uncertainty);
        }
        Command::Sparsify { errors, uncertainty, .. } => {
            set_path(&mut cfg.inputs.errors, errors);
            set_path(&mut cfg.inputs.uncertainty, uncertainty);
        }
        Command::Simulate {
            depth_model,
            z_min,
            z_max,
            noise_model,
            noise_scale,
            noise_seed,
            ..
        } => {
            if let Some(m) = depth_model {
                cfg.scene.depth_model = m.parse::<DepthModel>()?;
            }
            if let Some(m) = noise_model {
                cfg.noise.scale_model = m.parse::<ScaleModel>()?;
            }
            cfg.scene.z_min = z_min.unwrap_or(cfg.scene.z_min);
            cfg.scene.z_max = z_max.unwrap_or(cfg.scene.z_max);
            cfg.noise.scale_param = noise_scale.unwrap_or(cfg.noise.scale_param);
            if noise_seed.is_some() {
                cfg.noise.seed = *noise_seed;
            }
        }
        Command::Fit {
            samples,
            iters,
            learning_rate,
            fit_beta,
        } => {
            set_path(&mut cfg.inputs.samples, samples);
            cfg.fit_beta = fit_beta.unwrap_or(cfg.fit_beta);
            cfg.fit_iters = iters.unwrap_or(cfg.fit_iters);
            cfg.fit_learning_rate = learning_rate.unwrap_or(cfg.fit_learning_rate);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing input: {what}")))
}

fn load_pose(cfg: &RunConfig) -> Result<RelativePose> {
    read_pose(required(&cfg.pose, "--pose")?, cfg.pose_index)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Convert { out, .. } => {
            let k = cfg.require_intrinsics()?;
            let pose = load_pose(&cfg)?;
            let rho = read_map(required(&cfg.inputs.parallax, "--parallax")?, Quantity::ParallaxPx)?;
            let conv = depth_map_from_parallax_map(&k, &pose, &rho)?;
            write_map(&conv.map, out)?;
            Ok(json!({ "invalid": conv.invalid }).to_string())
        }
        Command::UncertConvert {
            out_depth,
            out_uncertainty,
            ..
        } => {
            let k = cfg.require_intrinsics()?;
            let pose = load_pose(&cfg)?;
            let rho = read_map(required(&cfg.inputs.parallax, "--parallax")?, Quantity::ParallaxPx)?;
            let sigma_path = required(&cfg.inputs.sigma, "--sigma")?;
            let out = match cfg.mode {
                ConversionMode::Elaborate => delta_depth_map(&k, &pose, &rho, &read_map(sigma_path, Quantity::Sigma)?)?,
                ConversionMode::Probabilistic => {
                    sigma_depth_map(&k, &pose, &rho, &read_map(sigma_path, Quantity::InvParallax)?)?
                }
            };
            write_map(&out.depth, out_depth)?;
            write_map(&out.uncertainty, out_uncertainty)?;
            Ok(json!({ "invalid": out.invalid }).to_string())
        }
        Command::Eval { out, .. } => {
            let gt = read_map(required(&cfg.inputs.gt, "--gt")?, Quantity::DepthM)?;
            let pred = read_map(required(&cfg.inputs.pred, "--pred")?, Quantity::DepthM)?;
            let metrics = depth_metrics(&gt, &pred, cfg.cap)?;
            let ause = match &cfg.inputs.uncertainty {
                Some(p) => {
                    let u = read_map(p, Quantity::Delta)?;
                    Some(ause_all(&gt, &pred, &u, cfg.bins, cfg.cap)?)
                }
                None => None,
            };
            let report = MetricReport::new(&metrics, ause.as_ref(), pred.count_invalid(), cfg.clone());
            match out {
                Some(p) => {
                    report.write(p)?;
                    Ok(String::new())
                }
                None => Ok(report.to_json()),
            }
        }
        Command::Sparsify { reducer, out_dir, .. } => {
            let e = read_map(required(&cfg.inputs.errors, "--errors")?, Quantity::Error)?;
            let u = read_map(required(&cfg.inputs.uncertainty, "--uncertainty")?, Quantity::Delta)?;
            let reducer = match reducer {
                ReducerArg::Mean => Reducer::Mean,
                ReducerArg::RootMean => Reducer::RootMean,
            };
            let r = sparsification(&e, &u, reducer, cfg.bins)?;
            create_dir(out_dir)?;
            write_curve(out_dir.join("sparsification.csv"), &r.fractions, &r.metric_curve)?;
            write_curve(out_dir.join("oracle.csv"), &r.fractions, &r.oracle_curve)?;
            write_curve(out_dir.join("sparsification_error.csv"), &r.fractions, &r.error_curve)?;
            Ok(json!({ "ause": r.ause }).to_string())
        }
        Command::Simulate { out_dir, .. } => {
            let k = cfg.require_intrinsics()?;
            let pose = load_pose(&cfg)?;
            let run = synthesize(Exec::default(), &cfg.scene_spec()?, &cfg.noise_spec()?, &k, &pose)?;
            create_dir(out_dir)?;
            let sigma_zeta = sigma_inv_parallax_map(&run.noisy.noisy, &run.noisy.sigma)?;
            write_map(&run.scene.depth, out_dir.join("gt_depth.pfm"))?;
            write_map(&run.scene.parallax, out_dir.join("gt_parallax.pfm"))?;
            write_map(&run.noisy.noisy, out_dir.join("noisy_parallax.pfm"))?;
            write_map(&run.noisy.sigma, out_dir.join("sigma_parallax.pfm"))?;
            write_map(&sigma_zeta, out_dir.join("sigma_inv_parallax.pfm"))?;
            Ok(json!({ "invalid": run.scene.invalid, "clamped": run.noisy.clamped }).to_string())
        }
        Command::Fit { .. } => {
            let path = required(&cfg.inputs.samples, "--samples")?;
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let samples: Vec<f64> = text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("sample '{t}': {e}"))))
                .collect::<Result<_>>()?;
            let fit = laplace_mle_fit(&samples, cfg.fit_beta, cfg.fit_iters, cfg.fit_learning_rate)?;
            Ok(json!({ "location": fit.location, "scale": fit.scale }).to_string())
        }
    }
}
