//! Training-loss terms with hand-derived gradients.
//!
//! All three terms share the pyramid weighting `2^-l` for level `l = 1..M`
//! and the normalizer `1 / (H W)` taken from the finest level, which is the
//! full resolution. The negative log-likelihood terms stop gradients through
//! the residual `|target - pred|`: their derivative with respect to the
//! prediction is zero by construction.

use crate::error::{Error, Result};
use crate::map::{is_valid, ScalarMap};

pub const DEFAULT_BETA: f64 = 0.02;
pub const DEFAULT_DEPTH_MASK_MAX: f64 = 400.0;
pub const DEFAULT_LEVELS: usize = 6;
/// Default relative step of the central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Lower bound on the scale returned by [`laplace_mle_fit`].
pub const SIGMA_MIN: f64 = 1e-6;

/// Maps at dyadic resolutions; level 1 is full resolution and level `l`
/// is `ceil(H / 2^(l-1)) x ceil(W / 2^(l-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPyramid {
    levels: Vec<ScalarMap>,
}

fn ceil_shift(v: usize, k: usize) -> usize {
    if k >= usize::BITS as usize {
        return 1;
    }
    (v + (1 << k) - 1) >> k
}

impl MapPyramid {
    pub fn new(levels: Vec<ScalarMap>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::ShapeMismatch("a pyramid needs at least one level".into()))?;
        let (w, h) = (first.width(), first.height());
        for (k, m) in levels.iter().enumerate() {
            let expect = (ceil_shift(w, k), ceil_shift(h, k));
            if (m.width(), m.height()) != expect {
                return Err(Error::ShapeMismatch(format!(
                    "level {} is {}x{}, expected {}x{}",
                    k + 1,
                    m.width(),
                    m.height(),
                    expect.0,
                    expect.1
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn single(map: ScalarMap) -> Self {
        Self { levels: vec![map] }
    }

    pub fn levels(&self) -> &[ScalarMap] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Full-resolution `(width, height)`.
    pub fn full_size(&self) -> (usize, usize) {
        (self.levels[0].width(), self.levels[0].height())
    }

    fn check_same(&self, other: &MapPyramid, what: &str) -> Result<()> {
        if self.depth() != other.depth() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {} vs {} levels",
                self.depth(),
                other.depth()
            )));
        }
        for (a, b) in self.levels.iter().zip(&other.levels) {
            a.check_shape(b, what)?;
        }
        Ok(())
    }
}

/// Weight of level `l` (1-based).
pub fn level_weight(l: usize) -> f64 {
    0.5f64.powi(l as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub beta: f64,
    pub depth_mask_max: f64,
    pub levels: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            depth_mask_max: DEFAULT_DEPTH_MASK_MAX,
            levels: DEFAULT_LEVELS,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.depth_mask_max > 0.0) || self.levels == 0 {
            return Err(Error::Config(format!("invalid loss configuration {self:?}")));
        }
        Ok(())
    }

    fn check_pyramid(&self, p: &MapPyramid) -> Result<()> {
        if p.depth() != self.levels {
            return Err(Error::ShapeMismatch(format!(
                "configured for {} levels, pyramid has {}",
                self.levels,
                p.depth()
            )));
        }
        Ok(())
    }
}

fn to_f64(m: &ScalarMap) -> Vec<f64> {
    m.data().iter().map(|&v| v as f64).collect()
}

// ---------------------------------------------------------------------------
// L1 distance of log depth
// ---------------------------------------------------------------------------

/// One level of the log-depth L1 loss in 64-bit form.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Level {
    pub target: Vec<f64>,
    pub pred: Vec<f64>,
    pub active: Vec<bool>,
}

/// `(1/HW) sum_l 2^-l sum |log z - log z_hat|` over active pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct L1LogProblem {
    pub full_pixels: usize,
    pub levels: Vec<L1Level>,
}

impl L1LogProblem {
    pub fn from_pyramids(gt: &MapPyramid, pred: &MapPyramid) -> Result<Self> {
        gt.check_same(pred, "ground truth vs prediction")?;
        let (w, h) = gt.full_size();
        let mut levels = Vec::with_capacity(gt.depth());
        for (g, p) in gt.levels().iter().zip(pred.levels()) {
            let active: Vec<bool> = g.data().iter().zip(p.data()).map(|(a, b)| is_valid(*a) && is_valid(*b)).collect();
            let level = L1Level {
                target: to_f64(g),
                pred: to_f64(p),
                active,
            };
            for (i, &on) in level.active.iter().enumerate() {
                if on && !(level.target[i] > 0.0 && level.pred[i] > 0.0) {
                    return Err(Error::Domain(format!("nonpositive depth at pixel {i}")));
                }
            }
            levels.push(level);
        }
        Ok(Self { full_pixels: w * h, levels })
    }

    fn value_at(&self, pred: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut off = 0;
        for (k, lv) in self.levels.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..lv.target.len() {
                if lv.active[i] {
                    s += (lv.target[i].ln() - pred[off + i].ln()).abs();
                }
            }
            total += level_weight(k + 1) * s;
            off += lv.target.len();
        }
        total / self.full_pixels as f64
    }

    fn grad_at(&self, pred: &[f64]) -> Vec<f64> {
        let norm = self.full_pixels as f64;
        let mut g = Vec::with_capacity(pred.len());
        let mut off = 0;
        for (k, lv) in self.levels.iter().enumerate() {
            let w = level_weight(k + 1) / norm;
            for i in 0..lv.target.len() {
                let p = pred[off + i];
                let d = p.ln() - lv.target[i].ln();
                g.push(if lv.active[i] && d != 0.0 { w * d.signum() / p } else { 0.0 });
            }
            off += lv.target.len();
        }
        g
    }

    fn flat_pred(&self) -> Vec<f64> {
        self.levels.iter().flat_map(|l| l.pred.iter().copied()).collect()
    }

    pub fn evaluate(&self) -> LossEvaluation {
        let x = self.flat_pred();
        LossEvaluation {
            value: self.value_at(&x),
            d_pred: self.split(self.grad_at(&x)),
            d_sigma: Vec::new(),
        }
    }

    fn split(&self, flat: Vec<f64>) -> Vec<Vec<f64>> {
        split_levels(flat, self.levels.iter().map(|l| l.target.len()))
    }
}

fn split_levels(flat: Vec<f64>, sizes: impl Iterator<Item = usize>) -> Vec<Vec<f64>> {
    let mut it = flat.into_iter();
    sizes.map(|n| it.by_ref().take(n).collect()).collect()
}

/// Loss value with per-level gradients (row-major, one vector per level).
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub value: f64,
    pub d_pred: Vec<Vec<f64>>,
    /// Empty for losses without an uncertainty input.
    pub d_sigma: Vec<Vec<f64>>,
}

pub fn l1_log_depth_loss(gt: &MapPyramid, pred: &MapPyramid) -> Result<f64> {
    Ok(L1LogProblem::from_pyramids(gt, pred)?.evaluate().value)
}

pub fn l1_log_depth_loss_grad(gt: &MapPyramid, pred: &MapPyramid) -> Result<LossEvaluation> {
    Ok(L1LogProblem::from_pyramids(gt, pred)?.evaluate())
}

// ---------------------------------------------------------------------------
// Laplace negative log-likelihood with a stopped residual
// ---------------------------------------------------------------------------

/// One level of a Laplace NLL term. The effective scale of a pixel is
/// `a * sigma`; `a` is 1 for the parallax form.
#[derive(Debug, Clone, PartialEq)]
pub struct NllLevel {
    pub target: Vec<f64>,
    pub pred: Vec<f64>,
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub active: Vec<bool>,
}

/// `(1/HW) sum_l 2^-l sum [stop(|t - p|) / (a sigma) + beta log(a sigma)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NllProblem {
    pub full_pixels: usize,
    pub beta: f64,
    pub levels: Vec<NllLevel>,
}

impl NllProblem {
    /// Depth form: residual on depth, scale `a * sigma_zeta`. Pixels whose
    /// ground-truth depth reaches `cfg.depth_mask_max` are excluded.
    pub fn depth(
        gt: &MapPyramid,
        pred: &MapPyramid,
        a: &MapPyramid,
        sigma_zeta: &MapPyramid,
        cfg: &LossConfig,
    ) -> Result<Self> {
        gt.check_same(a, "ground truth vs a")?;
        Self::build(gt, pred, Some(a), sigma_zeta, Some(gt), cfg)
    }

    /// Parallax form: residual on parallax, scale `sigma_rho`. When
    /// `gt_depth` is given, pixels at or beyond the depth mask are excluded.
    pub fn parallax(
        gt: &MapPyramid,
        pred: &MapPyramid,
        sigma_rho: &MapPyramid,
        gt_depth: Option<&MapPyramid>,
        cfg: &LossConfig,
    ) -> Result<Self> {
        if let Some(d) = gt_depth {
            gt.check_same(d, "ground truth vs mask depth")?;
        }
        Self::build(gt, pred, None, sigma_rho, gt_depth, cfg)
    }

    fn build(
        gt: &MapPyramid,
        pred: &MapPyramid,
        a: Option<&MapPyramid>,
        sigma: &MapPyramid,
        mask_depth: Option<&MapPyramid>,
        cfg: &LossConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        cfg.check_pyramid(gt)?;
        gt.check_same(pred, "ground truth vs prediction")?;
        gt.check_same(sigma, "ground truth vs uncertainty")?;
        let (w, h) = gt.full_size();
        let mut levels = Vec::with_capacity(gt.depth());
        for k in 0..gt.depth() {
            let g = &gt.levels()[k];
            let p = &pred.levels()[k];
            let s = &sigma.levels()[k];
            let a_map = a.map(|a| &a.levels()[k]);
            let n = g.len();
            let mut level = NllLevel {
                target: to_f64(g),
                pred: to_f64(p),
                a: a_map.map_or_else(|| vec![1.0; n], to_f64),
                sigma: to_f64(s),
                active: vec![false; n],
            };
            for i in 0..n {
                let masked = mask_depth.is_some_and(|d| {
                    let z = d.levels()[k].data()[i];
                    is_valid(z) && z as f64 >= cfg.depth_mask_max
                });
                let on = is_valid(g.data()[i]) && is_valid(p.data()[i]) && !masked;
                if on && !(level.sigma[i] > 0.0 && level.a[i] > 0.0) {
                    return Err(Error::Domain(format!(
                        "level {} pixel {i}: scale must be positive (a={}, sigma={})",
                        k + 1,
                        level.a[i],
                        level.sigma[i]
                    )));
                }
                level.active[i] = on;
            }
            levels.push(level);
        }
        Ok(Self {
            full_pixels: w * h,
            beta: cfg.beta,
            levels,
        })
    }

    fn pixel_count(&self) -> usize {
        self.levels.iter().map(|l| l.target.len()).sum()
    }

    /// Variables are laid out as `[pred (all levels), sigma (all levels)]`.
    pub fn flat_variables(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.levels.iter().flat_map(|l| l.pred.iter().copied()).collect();
        x.extend(self.levels.iter().flat_map(|l| l.sigma.iter().copied()));
        x
    }

    /// Loss value with the predictions and scales taken from `x`, and the
    /// stopped residuals taken from the predictions in `anchor`.
    pub fn value_frozen(&self, x: &[f64], anchor: &[f64]) -> f64 {
        let n = self.pixel_count();
        let (_, sigma) = x.split_at(n);
        let (anchor_pred, _) = anchor.split_at(n);
        let mut total = 0.0;
        let mut off = 0;
        for (k, lv) in self.levels.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..lv.target.len() {
                if lv.active[i] {
                    let r = (lv.target[i] - anchor_pred[off + i]).abs();
                    let scale = lv.a[i] * sigma[off + i];
                    s += r / scale + self.beta * scale.ln();
                }
            }
            total += level_weight(k + 1) * s;
            off += lv.target.len();
        }
        total / self.full_pixels as f64
    }

    /// Gradient with respect to `x`; the prediction half is identically zero.
    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let n = self.pixel_count();
        let (pred, sigma) = x.split_at(n);
        let norm = self.full_pixels as f64;
        let mut g = vec![0.0; 2 * n];
        let mut off = 0;
        for (k, lv) in self.levels.iter().enumerate() {
            let w = level_weight(k + 1) / norm;
            for i in 0..lv.target.len() {
                if lv.active[i] {
                    let r = (lv.target[i] - pred[off + i]).abs();
                    let s = sigma[off + i];
                    g[n + off + i] = w * (-r / (lv.a[i] * s * s) + self.beta / s);
                }
            }
            off += lv.target.len();
        }
        g
    }

    pub fn evaluate(&self) -> LossEvaluation {
        let x = self.flat_variables();
        let mut g = self.gradient_at(&x);
        let d_sigma = g.split_off(self.pixel_count());
        let sizes = || self.levels.iter().map(|l| l.target.len());
        LossEvaluation {
            value: self.value_frozen(&x, &x),
            d_pred: split_levels(g, sizes()),
            d_sigma: split_levels(d_sigma, sizes()),
        }
    }
}

pub fn nll_depth_loss(
    gt: &MapPyramid,
    pred: &MapPyramid,
    a: &MapPyramid,
    sigma_zeta: &MapPyramid,
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(NllProblem::depth(gt, pred, a, sigma_zeta, cfg)?.evaluate().value)
}

pub fn nll_depth_loss_grad(
    gt: &MapPyramid,
    pred: &MapPyramid,
    a: &MapPyramid,
    sigma_zeta: &MapPyramid,
    cfg: &LossConfig,
) -> Result<LossEvaluation> {
    Ok(NllProblem::depth(gt, pred, a, sigma_zeta, cfg)?.evaluate())
}

pub fn nll_parallax_loss(
    gt: &MapPyramid,
    pred: &MapPyramid,
    sigma_rho: &MapPyramid,
    gt_depth: Option<&MapPyramid>,
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(NllProblem::parallax(gt, pred, sigma_rho, gt_depth, cfg)?.evaluate().value)
}

pub fn nll_parallax_loss_grad(
    gt: &MapPyramid,
    pred: &MapPyramid,
    sigma_rho: &MapPyramid,
    gt_depth: Option<&MapPyramid>,
    cfg: &LossConfig,
) -> Result<LossEvaluation> {
    Ok(NllProblem::parallax(gt, pred, sigma_rho, gt_depth, cfg)?.evaluate())
}

/// Scale minimizing `r / (a s) + beta log(a s)` for a fixed residual.
pub fn optimal_scale(residual: f64, a: f64, beta: f64) -> f64 {
    residual / (beta * a)
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

/// A differentiable objective whose stopped sub-expressions are evaluated at
/// an anchor point.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64], anchor: &[f64]) -> f64;

    /// Analytic gradient with gradient stops applied.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// The part of `value` that depends on coordinate `i`. Separable
    /// objectives override this so that differencing cancels every other
    /// term exactly rather than up to summation roundoff.
    fn coordinate_value(&self, x: &[f64], anchor: &[f64], _i: usize) -> f64 {
        self.value(x, anchor)
    }

    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }

    /// Whether the objective is smooth on the segment `[lo, hi]`.
    fn smooth_between(&self, _lo: &[f64], _hi: &[f64]) -> bool {
        true
    }
}

impl Objective for NllProblem {
    fn dim(&self) -> usize {
        2 * self.pixel_count()
    }

    fn value(&self, x: &[f64], anchor: &[f64]) -> f64 {
        self.value_frozen(x, anchor)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_at(x)
    }

    fn coordinate_value(&self, x: &[f64], anchor: &[f64], i: usize) -> f64 {
        let n = self.pixel_count();
        if i < n {
            // Predictions enter only through stopped residuals.
            return 0.0;
        }
        let (k, lv, p) = locate(self.levels.iter().map(|l| (l, l.target.len())), i - n);
        if !lv.active[p] {
            return 0.0;
        }
        let r = (lv.target[p] - anchor[i - n]).abs();
        let scale = lv.a[p] * x[i];
        level_weight(k + 1) * (r / scale + self.beta * scale.ln()) / self.full_pixels as f64
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        let n = self.pixel_count();
        x[n..].iter().all(|&s| s > 0.0 && s.is_finite())
    }
}

impl Objective for L1LogProblem {
    fn dim(&self) -> usize {
        self.levels.iter().map(|l| l.target.len()).sum()
    }

    fn value(&self, x: &[f64], _anchor: &[f64]) -> f64 {
        self.value_at(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad_at(x)
    }

    fn coordinate_value(&self, x: &[f64], _anchor: &[f64], i: usize) -> f64 {
        let (k, lv, p) = locate(self.levels.iter().map(|l| (l, l.target.len())), i);
        if !lv.active[p] {
            return 0.0;
        }
        level_weight(k + 1) * (lv.target[p].ln() - x[i].ln()).abs() / self.full_pixels as f64
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|&p| p > 0.0 && p.is_finite())
    }

    fn smooth_between(&self, lo: &[f64], hi: &[f64]) -> bool {
        let targets = self.levels.iter().flat_map(|l| l.target.iter().zip(&l.active));
        targets.zip(lo.iter().zip(hi)).all(|((&t, &on), (&a, &b))| {
            !on || (a.ln() - t.ln()).signum() * (b.ln() - t.ln()).signum() > 0.0
        })
    }
}

/// Maps a flat index onto `(level, item, index within level)`.
fn locate<'a, T: 'a>(items: impl Iterator<Item = (&'a T, usize)>, mut flat: usize) -> (usize, &'a T, usize) {
    for (k, (item, len)) in items.enumerate() {
        if flat < len {
            return (k, item, flat);
        }
        flat -= len;
    }
    panic!("flat index out of range")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Compares analytic gradients with central differences
/// `(f(x + h e_i) - f(x - h e_i)) / 2h`, `h = step * max(1, |x_i|)`, the
/// stopped sub-expressions being frozen at `point`. The discrepancy is
/// `|g - fd| / max(|g|, |fd|)` (zero when both vanish).
pub fn gradient_check<O: Objective + ?Sized>(obj: &O, point: &[f64], step: f64) -> Result<GradientCheck> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    if point.len() != obj.dim() {
        return Err(Error::ShapeMismatch(format!(
            "point has {} coordinates, objective expects {}",
            point.len(),
            obj.dim()
        )));
    }
    if !obj.in_domain(point) {
        return Err(Error::Domain("point lies outside the loss domain".into()));
    }
    let g = obj.gradient(point);
    let mut worst = GradientCheck {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    let mut plus = point.to_vec();
    let mut minus = point.to_vec();
    for i in 0..point.len() {
        let h = step * point[i].abs().max(1.0);
        plus[i] = point[i] + h;
        minus[i] = point[i] - h;
        if !obj.in_domain(&plus) || !obj.in_domain(&minus) || !obj.smooth_between(&minus, &plus) {
            return Err(Error::Domain(format!(
                "coordinate {i} is within one step of the domain boundary"
            )));
        }
        let fd = (obj.coordinate_value(&plus, point, i) - obj.coordinate_value(&minus, point, i)) / (2.0 * h);
        plus[i] = point[i];
        minus[i] = point[i];
        let denom = g[i].abs().max(fd.abs());
        let err = if denom == 0.0 { 0.0 } else { (g[i] - fd).abs() / denom };
        if err > worst.max_rel_error {
            worst = GradientCheck {
                max_rel_error: err,
                worst_index: i,
            };
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Laplace maximum likelihood by gradient descent
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceFit {
    pub location: f64,
    pub scale: f64,
}

/// Minimizes `mean_i |x_i - mu| / sigma + beta log sigma` by gradient
/// descent on `(mu, log sigma)`.
///
/// The location step is preconditioned by the current scale so the update
/// is invariant to the units of the samples, and the step size decays as
/// `lr / sqrt(1 + k)` so the subgradient iterates settle on the median.
/// The scale never drops below [`SIGMA_MIN`].
pub fn laplace_mle_fit(samples: &[f64], beta: f64, iters: usize, learning_rate: f64) -> Result<LaplaceFit> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {}", samples.len())));
    }
    if !(beta > 0.0) || !(learning_rate > 0.0) {
        return Err(Error::Domain(format!(
            "beta and learning rate must be positive (beta={beta}, lr={learning_rate})"
        )));
    }
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite sample {v}")));
    }
    let n = samples.len() as f64;
    let log_min = SIGMA_MIN.ln();
    let mut mu = samples.iter().sum::<f64>() / n;
    let mad = samples.iter().map(|x| (x - mu).abs()).sum::<f64>() / n;
    let mut log_sigma = (mad / beta).max(SIGMA_MIN).ln();

    for k in 0..iters {
        let sigma = log_sigma.exp();
        let mut sign_sum = 0.0;
        let mut abs_sum = 0.0;
        for &x in samples {
            let r = x - mu;
            abs_sum += r.abs();
            if r > 0.0 {
                sign_sum += 1.0;
            } else if r < 0.0 {
                sign_sum -= 1.0;
            }
        }
        // d/dmu = -mean(sign)/sigma, d/dlog(sigma) = beta - mean|r|/sigma
        let g_mu = -sign_sum / n / sigma;
        let g_log_sigma = beta - abs_sum / n / sigma;
        let lr = learning_rate / (1.0 + k as f64).sqrt();
        mu -= lr * sigma * g_mu;
        log_sigma = (log_sigma - lr * g_log_sigma).max(log_min);
    }
    Ok(LaplaceFit {
        location: mu,
        scale: log_sigma.exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{Quantity, INVALID};

    fn one(v: f32, q: Quantity) -> MapPyramid {
        MapPyramid::single(ScalarMap::filled(1, 1, v, q).unwrap())
    }

    fn cfg1() -> LossConfig {
        LossConfig {
            levels: 1,
            ..LossConfig::default()
        }
    }

    #[test]
    fn pyramid_shapes() {
        let l = |w, h| ScalarMap::filled(w, h, 1.0, Quantity::DepthM).unwrap();
        assert!(MapPyramid::new(vec![l(5, 3), l(3, 2), l(2, 1), l(1, 1)]).is_ok());
        assert!(MapPyramid::new(vec![l(4, 4), l(3, 2)]).is_err());
        assert!(MapPyramid::new(vec![]).is_err());
    }

    #[test]
    fn l1_log_hand_value() {
        let gt = one(std::f32::consts::E, Quantity::DepthM);
        let pred = one(1.0, Quantity::DepthM);
        let v = l1_log_depth_loss(&gt, &pred).unwrap();
        assert!((v - 0.5).abs() < 1e-7);
        assert_eq!(l1_log_depth_loss(&gt, &gt).unwrap(), 0.0);
    }

    #[test]
    fn l1_log_rejects_nonpositive_depth() {
        let gt = one(1.0, Quantity::DepthM);
        let pred = one(0.0, Quantity::DepthM);
        assert!(matches!(l1_log_depth_loss(&gt, &pred), Err(Error::Domain(_))));
        let pred = one(INVALID, Quantity::DepthM);
        assert_eq!(l1_log_depth_loss(&gt, &pred).unwrap(), 0.0);
    }

    #[test]
    fn nll_hand_values() {
        let d = |v| one(v, Quantity::DepthM);
        let v = nll_depth_loss(&d(3.0), &d(2.0), &d(1.0), &d(1.0), &cfg1()).unwrap();
        assert!((v - 0.5).abs() < 1e-15);

        let p = |v| one(v, Quantity::ParallaxPx);
        let v = nll_parallax_loss(&p(1.0), &p(1.0), &p(1.0), None, &cfg1()).unwrap();
        assert_eq!(v, 0.0);

        let v = nll_parallax_loss(&p(1.2), &p(1.0), &p(0.1), None, &cfg1()).unwrap();
        let r = (1.2f32 as f64 - 1.0).abs();
        let s = 0.1f32 as f64;
        let expect = 0.5 * (r / s + 0.02 * s.ln());
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.5 * (2.0 + 0.02 * 0.1f64.ln())).abs() < 1e-5);
    }

    #[test]
    fn nll_sigma_gradient_hand_value() {
        let d = |v| one(v, Quantity::DepthM);
        let e = nll_depth_loss_grad(&d(3.0), &d(2.0), &d(1.0), &d(2.0), &cfg1()).unwrap();
        // 0.5 * (-r/(a s^2) + beta/s) with r=1, a=1, s=2
        assert!((e.d_sigma[0][0] - 0.5 * (-0.25 + 0.01)).abs() < 1e-15);
        assert_eq!(e.d_pred[0][0], 0.0);
    }

    #[test]
    fn nll_mask_excludes_far_pixels() {
        let gt = MapPyramid::single(ScalarMap::new(2, 1, vec![10.0, 400.0], Quantity::DepthM).unwrap());
        let pred = MapPyramid::single(ScalarMap::new(2, 1, vec![11.0, 300.0], Quantity::DepthM).unwrap());
        let ones = MapPyramid::single(ScalarMap::filled(2, 1, 1.0, Quantity::Sigma).unwrap());
        let e = nll_depth_loss_grad(&gt, &pred, &ones, &ones, &cfg1()).unwrap();
        assert_eq!(e.value, 0.5 * 1.0 / 2.0);
        assert_eq!(e.d_sigma[0][1], 0.0);
    }

    #[test]
    fn nll_rejects_nonpositive_scale() {
        let d = |v| one(v, Quantity::DepthM);
        assert!(nll_depth_loss(&d(3.0), &d(2.0), &d(0.0), &d(1.0), &cfg1()).is_err());
        assert!(nll_depth_loss(&d(3.0), &d(2.0), &d(1.0), &d(-1.0), &cfg1()).is_err());
        // Masked pixels are not checked.
        assert!(nll_depth_loss(&d(500.0), &d(2.0), &d(1.0), &d(-1.0), &cfg1()).is_ok());
    }

    #[test]
    fn optimal_scale_example() {
        assert_eq!(optimal_scale(0.5, 1.0, 0.02), 25.0);
    }

    #[test]
    fn gradient_check_rejects_boundary() {
        let d = |v| one(v, Quantity::DepthM);
        let prob = NllProblem::depth(&d(3.0), &d(2.0), &d(1.0), &d(1e-9), &cfg1()).unwrap();
        let x = prob.flat_variables();
        assert!(gradient_check(&prob, &x, 1e-6).is_err());
        assert!(gradient_check(&prob, &x, 0.0).is_err());
    }

    #[test]
    fn fit_three_points() {
        let f = laplace_mle_fit(&[-1.0, 0.0, 1.0], 1.0, 20_000, 0.1).unwrap();
        assert!(f.location.abs() < 1e-3, "{f:?}");
        assert!((f.scale - 2.0 / 3.0).abs() < 1e-3, "{f:?}");
        let f = laplace_mle_fit(&[-1.0, 0.0, 1.0], 0.5, 20_000, 0.1).unwrap();
        assert!(f.location.abs() < 1e-3, "{f:?}");
        assert!((f.scale - 4.0 / 3.0).abs() < 2e-3, "{f:?}");
    }

    #[test]
    fn fit_degenerate_samples_clamp_scale() {
        let f = laplace_mle_fit(&[2.0; 5], 1.0, 1000, 0.1).unwrap();
        assert_eq!(f.location, 2.0);
        assert!((f.scale - SIGMA_MIN).abs() < 1e-18);
        assert!(laplace_mle_fit(&[1.0], 1.0, 10, 0.1).is_err());
    }
}
