//! Depth quality metrics and sparsification curves.
//!
//! A sparsification curve removes a growing fraction of pixels in order of
//! decreasing uncertainty and reports the metric on what remains. The oracle
//! curve removes pixels by decreasing true error instead. AuSE is the
//! trapezoidal area between the two after normalizing both by the metric on
//! the full set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{is_valid, ScalarMap};
use crate::parallel::{self, Exec};

pub const DEFAULT_CAP: f64 = 80.0;
pub const DEFAULT_BINS: usize = 100;
pub const DELTA_THRESHOLD: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub rmse_log: f64,
    pub delta_125: f64,
    pub n_valid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AbsRel,
    RmseLog,
    Delta125,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::AbsRel, Metric::RmseLog, Metric::Delta125];

    /// Per-pixel error consistent with the metric's reducer: relative error,
    /// squared log error, or the indicator of a threshold failure.
    pub fn pixel_error(self, gt: f64, pred: f64) -> f64 {
        match self {
            Metric::AbsRel => (pred - gt).abs() / gt,
            Metric::RmseLog => {
                let d = pred.ln() - gt.ln();
                d * d
            }
            Metric::Delta125 => {
                if (pred / gt).max(gt / pred) < DELTA_THRESHOLD {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn reducer(self) -> Reducer {
        match self {
            Metric::RmseLog => Reducer::RootMean,
            _ => Reducer::Mean,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::AbsRel => "abs_rel",
            Metric::RmseLog => "rmse_log",
            Metric::Delta125 => "delta_125",
        }
    }
}

/// How per-pixel errors of the retained set are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reducer {
    Mean,
    RootMean,
}

impl Reducer {
    fn apply(self, sum: f64, count: usize) -> f64 {
        let m = sum / count as f64;
        match self {
            Reducer::Mean => m,
            Reducer::RootMean => m.sqrt(),
        }
    }
}

fn usable(gt: f32, pred: f32, cap: f64) -> bool {
    is_valid(gt) && is_valid(pred) && gt > 0.0 && pred > 0.0 && (gt as f64) < cap
}

/// Eigen-style metrics over pixels with `0 < gt < cap` and a valid positive
/// prediction.
pub fn depth_metrics(gt: &ScalarMap, pred: &ScalarMap, cap: f64) -> Result<DepthMetrics> {
    gt.check_shape(pred, "ground truth vs prediction")?;
    let (mut abs_rel, mut sq_log, mut good, mut n) = (0.0, 0.0, 0usize, 0usize);
    for (&g, &p) in gt.data().iter().zip(pred.data()) {
        if !usable(g, p, cap) {
            continue;
        }
        let (g, p) = (g as f64, p as f64);
        abs_rel += Metric::AbsRel.pixel_error(g, p);
        sq_log += Metric::RmseLog.pixel_error(g, p);
        if Metric::Delta125.pixel_error(g, p) == 0.0 {
            good += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let nf = n as f64;
    Ok(DepthMetrics {
        abs_rel: abs_rel / nf,
        rmse_log: (sq_log / nf).sqrt(),
        delta_125: good as f64 / nf,
        n_valid: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsificationResult {
    pub fractions: Vec<f64>,
    pub metric_curve: Vec<f64>,
    pub oracle_curve: Vec<f64>,
    pub error_curve: Vec<f64>,
    pub ause: f64,
}

/// Indices sorted by decreasing key, ties broken by increasing index.
fn rank_descending(exec: Exec, keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    parallel::sort_by(exec, &mut idx, |&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    idx
}

/// Metric of the retained set after removing the first `floor(k n / bins)`
/// ranked pixels, for `k = 0..bins`.
fn curve(errors: &[f64], order: &[usize], reducer: Reducer, bins: usize) -> Vec<f64> {
    let n = order.len();
    // suffix[m] = sum of errors of order[m..], accumulated from the tail.
    let mut suffix = vec![0.0; n + 1];
    for m in (0..n).rev() {
        suffix[m] = suffix[m + 1] + errors[order[m]];
    }
    (0..bins)
        .map(|k| {
            let removed = k * n / bins;
            reducer.apply(suffix[removed], n - removed)
        })
        .collect()
}

/// Sparsification of per-pixel errors ranked by `uncertainties`.
pub fn sparsification_values(
    errors: &[f64],
    uncertainties: &[f64],
    reducer: Reducer,
    n_bins: usize,
) -> Result<SparsificationResult> {
    sparsification_values_with(Exec::default(), errors, uncertainties, reducer, n_bins)
}

pub fn sparsification_values_with(
    exec: Exec,
    errors: &[f64],
    uncertainties: &[f64],
    reducer: Reducer,
    n_bins: usize,
) -> Result<SparsificationResult> {
    if errors.len() != uncertainties.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} errors vs {} uncertainties",
            errors.len(),
            uncertainties.len()
        )));
    }
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be at least 1".into()));
    }
    if errors.len() < n_bins {
        return Err(Error::Domain(format!(
            "{} valid pixels is fewer than {n_bins} bins",
            errors.len()
        )));
    }
    if let Some(e) = errors.iter().chain(uncertainties).find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite value {e} in sparsification input")));
    }
    let metric = curve(errors, &rank_descending(exec, uncertainties), reducer, n_bins);
    let oracle = curve(errors, &rank_descending(exec, errors), reducer, n_bins);
    let base = metric[0];
    if !(base > 0.0) {
        return Err(Error::Normalization(base));
    }
    let metric_curve: Vec<f64> = metric.iter().map(|v| v / base).collect();
    let oracle_curve: Vec<f64> = oracle.iter().map(|v| v / base).collect();
    let error_curve: Vec<f64> = metric_curve.iter().zip(&oracle_curve).map(|(m, o)| m - o).collect();
    let fractions: Vec<f64> = (0..n_bins).map(|k| k as f64 / n_bins as f64).collect();
    let ause = trapezoid(&fractions, &error_curve);
    Ok(SparsificationResult {
        fractions,
        metric_curve,
        oracle_curve,
        error_curve,
        ause,
    })
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Map form: pixels where either input is the invalid marker are skipped.
pub fn sparsification(
    errors: &ScalarMap,
    uncertainties: &ScalarMap,
    reducer: Reducer,
    n_bins: usize,
) -> Result<SparsificationResult> {
    errors.check_shape(uncertainties, "errors vs uncertainties")?;
    let (e, u): (Vec<f64>, Vec<f64>) = errors
        .data()
        .iter()
        .zip(uncertainties.data())
        .filter(|(e, u)| is_valid(**e) && is_valid(**u))
        .map(|(&e, &u)| (e as f64, u as f64))
        .unzip();
    sparsification_values(&e, &u, reducer, n_bins)
}

/// Per-pixel errors and uncertainties of the pixels used by `depth_metrics`
/// that also carry a valid uncertainty.
fn collect_pixels(
    exec: Exec,
    gt: &ScalarMap,
    pred: &ScalarMap,
    uncertainty: &ScalarMap,
    which: Metric,
    cap: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    gt.check_shape(pred, "ground truth vs prediction")?;
    gt.check_shape(uncertainty, "ground truth vs uncertainty")?;
    let (g, p, u) = (gt.data(), pred.data(), uncertainty.data());
    let per_pixel = parallel::map_indexed(exec, g.len(), |i| {
        (usable(g[i], p[i], cap) && is_valid(u[i])).then(|| (which.pixel_error(g[i] as f64, p[i] as f64), u[i] as f64))
    });
    let pairs: (Vec<f64>, Vec<f64>) = per_pixel.into_iter().flatten().unzip();
    if pairs.0.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    Ok(pairs)
}

pub fn sparsification_for_metric(
    gt: &ScalarMap,
    pred: &ScalarMap,
    uncertainty: &ScalarMap,
    which: Metric,
    n_bins: usize,
    cap: f64,
) -> Result<SparsificationResult> {
    sparsification_for_metric_with(Exec::default(), gt, pred, uncertainty, which, n_bins, cap)
}

pub fn sparsification_for_metric_with(
    exec: Exec,
    gt: &ScalarMap,
    pred: &ScalarMap,
    uncertainty: &ScalarMap,
    which: Metric,
    n_bins: usize,
    cap: f64,
) -> Result<SparsificationResult> {
    let (e, u) = collect_pixels(exec, gt, pred, uncertainty, which, cap)?;
    sparsification_values_with(exec, &e, &u, which.reducer(), n_bins)
}

/// AuSE of one metric. For `delta_125` the curve tracks the failure rate
/// `1 - delta`, so that all three curves decrease under good ranking.
///
/// When every retained pixel has zero error the metric and oracle curves
/// coincide and the AuSE is 0, although the curves themselves cannot be
/// normalized.
pub fn ause_for_metric(
    gt: &ScalarMap,
    pred: &ScalarMap,
    uncertainty: &ScalarMap,
    which: Metric,
    n_bins: usize,
    cap: f64,
) -> Result<f64> {
    ause_for_metric_with(Exec::default(), gt, pred, uncertainty, which, n_bins, cap)
}

pub fn ause_for_metric_with(
    exec: Exec,
    gt: &ScalarMap,
    pred: &ScalarMap,
    uncertainty: &ScalarMap,
    which: Metric,
    n_bins: usize,
    cap: f64,
) -> Result<f64> {
    let (e, u) = collect_pixels(exec, gt, pred, uncertainty, which, cap)?;
    if e.len() >= n_bins && e.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    Ok(sparsification_values_with(exec, &e, &u, which.reducer(), n_bins)?.ause)
}

/// AuSE of every metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuseSet {
    pub abs_rel: f64,
    pub rmse_log: f64,
    pub delta_125: f64,
}

impl AuseSet {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::AbsRel => self.abs_rel,
            Metric::RmseLog => self.rmse_log,
            Metric::Delta125 => self.delta_125,
        }
    }
}

pub fn ause_all(
    gt: &ScalarMap,
    pred: &ScalarMap,
    uncertainty: &ScalarMap,
    n_bins: usize,
    cap: f64,
) -> Result<AuseSet> {
    ause_all_with(Exec::default(), gt, pred, uncertainty, n_bins, cap)
}

pub fn ause_all_with(
    exec: Exec,
    gt: &ScalarMap,
    pred: &ScalarMap,
    uncertainty: &ScalarMap,
    n_bins: usize,
    cap: f64,
) -> Result<AuseSet> {
    let one = |m| ause_for_metric_with(exec, gt, pred, uncertainty, m, n_bins, cap);
    Ok(AuseSet {
        abs_rel: one(Metric::AbsRel)?,
        rmse_log: one(Metric::RmseLog)?,
        delta_125: one(Metric::Delta125)?,
    })
}
