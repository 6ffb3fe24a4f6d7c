//! Gaussian-process regression on encoded design vectors, plus the
//! evaluability classifier built on it.
//!
//! Models use a constant trend and a stationary correlation kernel with
//! one length-scale per coordinate group; the trend and process variance
//! are profiled out of the likelihood analytically, so hyperparameter
//! fitting only searches the length-scale box. Fitting is a multistart
//! derivative-free coordinate search over log10 length-scales, restarts
//! drawn by Latin hypercube.
//!
//! Hidden-constraint handling ("does this design evaluate at all")
//! reuses the same machinery: a regression model on 0/1 evaluability
//! labels whose predicted mean, clamped to `[0, 1]`, acts as the
//! evaluability probability.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lhs;
use crate::linalg::{self, Matrix};
use crate::search::{coordinate_search, SearchOptions};

/// Training inputs closer than this in encoded space count as one point.
pub const MERGE_DISTANCE: f64 = 1e-9;

/// Relative floor applied to the profiled variance so degenerate data
/// keeps the likelihood finite.
const SIGMA2_FLOOR: f64 = 1e-30;

/// Stationary correlation kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    SquaredExponential,
    Matern52,
}

/// How length-scales attach to encoded coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anisotropy {
    /// One length-scale per encoded coordinate.
    PerDimension,
    /// Coordinates sharing a group id share a length-scale; built from
    /// [`crate::design_space::DesignSpace::encoding_groups`] this ties a
    /// categorical variable's one-hot block to a single scale.
    Grouped { groups: Vec<usize> },
}

/// Gaussian-process configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub kernel: KernelKind,
    pub anisotropy: Anisotropy,
    /// Relative diagonal jitter; escalates by two factors of ten when a
    /// factorization fails before fitting reports ill-conditioning.
    pub nugget: f64,
    /// Multistart count for the length-scale search.
    pub n_restarts: usize,
    /// Search box for log10 length-scales.
    pub lengthscale_log10_bounds: (f64, f64),
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            kernel: KernelKind::SquaredExponential,
            anisotropy: Anisotropy::PerDimension,
            nugget: 1e-8,
            n_restarts: 10,
            lengthscale_log10_bounds: (-3.0, 2.0),
        }
    }
}

/// Typed surrogate failure.
#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateError {
    /// Input/target shapes disagree or a config value is unusable.
    BadInput(&'static str),
    /// Fewer than two distinct training points after merging duplicates.
    InsufficientData { distinct: usize },
    /// Every jitter escalation still failed to factorize.
    IllConditioned,
    /// Query vector length does not match the training dimension.
    DimensionMismatch { expected: usize, found: usize },
    /// An evaluability label was not exactly 0 or 1.
    InvalidLabel { index: usize },
}

impl fmt::Display for SurrogateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurrogateError::BadInput(msg) => write!(f, "bad surrogate input: {msg}"),
            SurrogateError::InsufficientData { distinct } => {
                write!(f, "need at least 2 distinct training points, have {distinct}")
            }
            SurrogateError::IllConditioned => {
                write!(f, "correlation matrix stayed ill-conditioned through jitter escalation")
            }
            SurrogateError::DimensionMismatch { expected, found } => {
                write!(f, "query dimension {found} does not match training dimension {expected}")
            }
            SurrogateError::InvalidLabel { index } => {
                write!(f, "evaluability label at index {index} is not 0 or 1")
            }
        }
    }
}

impl core::error::Error for SurrogateError {}

/// A fitted Gaussian process.
///
/// `chol` is the lower Cholesky factor of `sigma2 * C + nugget * I` where
/// `C` is the unit-diagonal correlation matrix of the merged training
/// inputs at `theta`, and `alpha` solves that system against the centered
/// targets; predictions never refactorize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    /// Merged training inputs, one encoded point per row.
    pub x: Matrix,
    /// Merged training targets.
    pub y: Vec<f64>,
    /// Fitted log10 length-scales, one per coordinate group.
    pub theta: Vec<f64>,
    /// Process variance.
    pub sigma2: f64,
    /// Constant trend.
    pub mu0: f64,
    /// Lower Cholesky factor of `sigma2 * C + nugget * I`.
    pub chol: Matrix,
    /// `(sigma2 * C + nugget * I)^{-1} (y - mu0)`.
    pub alpha: Vec<f64>,
    /// Absolute diagonal jitter inside the factorized matrix.
    pub nugget: f64,
    pub kernel: KernelKind,
    /// Encoded coordinate -> length-scale group.
    pub groups: Vec<usize>,
    /// Per-coordinate inverse squared length-scales, derived from `theta`.
    pub inv_len2: Vec<f64>,
}

impl GpModel {
    /// Posterior mean and standard deviation at one encoded point. The
    /// standard deviation is clipped at zero and can never exceed
    /// `sqrt(sigma2)`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64), SurrogateError> {
        let dim = self.x.cols();
        if x.len() != dim {
            return Err(SurrogateError::DimensionMismatch { expected: dim, found: x.len() });
        }
        let n = self.x.rows();
        if n == 0 || self.sigma2 <= 0.0 {
            return Ok((self.mu0, libm::sqrt(self.sigma2.max(0.0))));
        }
        let mut k = vec![0.0; n];
        for (i, ki) in k.iter_mut().enumerate() {
            let row = self.x.row(i);
            let mut r2 = 0.0;
            for d in 0..dim {
                let diff = x[d] - row[d];
                r2 += diff * diff * self.inv_len2[d];
            }
            *ki = self.sigma2 * correlation(self.kernel, r2);
        }
        let mean = self.mu0 + linalg::dot(&k, &self.alpha);
        let v = linalg::solve_lower(&self.chol, &k);
        let std2 = self.sigma2 - linalg::dot(&v, &v);
        Ok((mean, libm::sqrt(std2.max(0.0))))
    }
}

/// Evaluability classifier: a regression model on 0/1 labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityModel {
    pub inner: GpModel,
}

impl FeasibilityModel {
    /// Probability that a point evaluates successfully: the regression
    /// mean clamped to `[0, 1]`.
    pub fn predict_feasible_prob(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        let (mean, _) = self.inner.predict(x)?;
        Ok(mean.clamp(0.0, 1.0))
    }
}

/// Correlation between two encoded points under per-coordinate inverse
/// squared length-scales: the unit-diagonal kernel the models build their
/// Gram matrices from. Slices must share one length.
pub fn kernel_correlation(kernel: KernelKind, inv_len2: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for ((&ai, &bi), &w) in a.iter().zip(b).zip(inv_len2) {
        let diff = ai - bi;
        r2 += diff * diff * w;
    }
    correlation(kernel, r2)
}

/// Correlation value for a squared scaled distance.
#[inline]
fn correlation(kernel: KernelKind, r2: f64) -> f64 {
    match kernel {
        KernelKind::SquaredExponential => libm::exp(-0.5 * r2),
        KernelKind::Matern52 => {
            let r = libm::sqrt(r2);
            let sqrt5_r = libm::sqrt(5.0) * r;
            (1.0 + sqrt5_r + 5.0 * r2 / 3.0) * libm::exp(-sqrt5_r)
        }
    }
}

fn resolve_groups(anisotropy: &Anisotropy, dim: usize) -> Result<(Vec<usize>, usize), SurrogateError> {
    match anisotropy {
        Anisotropy::PerDimension => Ok(((0..dim).collect(), dim)),
        Anisotropy::Grouped { groups } => {
            if groups.len() != dim {
                return Err(SurrogateError::BadInput("anisotropy groups must cover every coordinate"));
            }
            let n_groups = groups.iter().map(|g| g + 1).max().unwrap_or(0);
            if groups.iter().any(|&g| g >= n_groups) || n_groups == 0 {
                return Err(SurrogateError::BadInput("anisotropy group ids must be dense"));
            }
            Ok((groups.clone(), n_groups))
        }
    }
}

/// Merges rows closer than [`MERGE_DISTANCE`], averaging their targets;
/// first occurrence decides the kept coordinates and the row order.
fn merge_duplicates(x: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>) {
    let n = x.rows();
    let dim = x.cols();
    let mut kept_rows: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..n {
        let row = x.row(i);
        let mut merged = false;
        for (k, kept) in kept_rows.iter().enumerate() {
            let mut d2 = 0.0;
            for d in 0..dim {
                let diff = row[d] - kept[d];
                d2 += diff * diff;
            }
            if d2 < MERGE_DISTANCE * MERGE_DISTANCE {
                sums[k] += y[i];
                counts[k] += 1;
                merged = true;
                break;
            }
        }
        if !merged {
            kept_rows.push(row.to_vec());
            sums.push(y[i]);
            counts.push(1);
        }
    }
    let merged_y: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
    (Matrix::from_rows(&kept_rows), merged_y)
}

/// Grouped squared coordinate distances for every unordered row pair,
/// flattened as `pair p = i * (i - 1) / 2 + j` for `i > j`.
fn pair_distances(x: &Matrix, groups: &[usize], n_groups: usize) -> Vec<Vec<f64>> {
    let n = x.rows();
    let dim = x.cols();
    let pairs = n * (n - 1) / 2;
    let mut out = vec![vec![0.0; pairs]; n_groups];
    let mut p = 0usize;
    for i in 1..n {
        let ri = x.row(i);
        for j in 0..i {
            let rj = x.row(j);
            for d in 0..dim {
                let diff = ri[d] - rj[d];
                out[groups[d]][p] += diff * diff;
            }
            p += 1;
        }
    }
    out
}

/// Shared state for repeated likelihood evaluations on one data set.
struct LikelihoodWorkspace<'a> {
    dists: Vec<Vec<f64>>,
    y: &'a [f64],
    n: usize,
    kernel: KernelKind,
    nugget: f64,
    scaled: Vec<f64>,
    r: Matrix,
}

struct LikelihoodValue {
    lml: f64,
    mu0: f64,
    sigma2: f64,
    jitter: f64,
}

impl<'a> LikelihoodWorkspace<'a> {
    fn new(x: &Matrix, y: &'a [f64], groups: &[usize], n_groups: usize, kernel: KernelKind, nugget: f64) -> Self {
        let n = x.rows();
        LikelihoodWorkspace {
            dists: pair_distances(x, groups, n_groups),
            y,
            n,
            kernel,
            nugget,
            scaled: vec![0.0; n * (n - 1) / 2],
            r: Matrix::zeros(n, n),
        }
    }

    /// Correlation Cholesky factor at `theta` with jitter escalation.
    /// Leaves the factor in `self.r`; returns the jitter that worked.
    fn factorize(&mut self, theta: &[f64]) -> Option<f64> {
        let weights: Vec<f64> = theta.iter().map(|t| libm::pow(10.0, -2.0 * t)).collect();
        for (g, dist) in self.dists.iter().enumerate() {
            let w = weights[g];
            if g == 0 {
                for (s, d) in self.scaled.iter_mut().zip(dist) {
                    *s = w * d;
                }
            } else {
                for (s, d) in self.scaled.iter_mut().zip(dist) {
                    *s += w * d;
                }
            }
        }
        if self.dists.is_empty() {
            for s in self.scaled.iter_mut() {
                *s = 0.0;
            }
        }

        for level in 0..3 {
            let jitter = self.nugget * libm::pow(10.0, level as f64);
            let mut p = 0usize;
            for i in 0..self.n {
                for j in 0..i {
                    let c = correlation(self.kernel, self.scaled[p]);
                    self.r.set(i, j, c);
                    p += 1;
                }
                self.r.set(i, i, 1.0 + jitter);
            }
            if linalg::cholesky_in_place(&mut self.r) {
                return Some(jitter);
            }
        }
        None
    }

    /// Concentrated log marginal likelihood at `theta`, with the profiled
    /// trend and variance that achieve it.
    fn evaluate(&mut self, theta: &[f64]) -> Option<LikelihoodValue> {
        let jitter = self.factorize(theta)?;
        let n = self.n;
        let a = linalg::cholesky_solve(&self.r, self.y);
        let ones = vec![1.0; n];
        let b = linalg::cholesky_solve(&self.r, &ones);
        let denom = b.iter().sum::<f64>();
        let mu0 = if denom.abs() > 0.0 { a.iter().sum::<f64>() / denom } else { 0.0 };
        let mut quad = 0.0;
        for i in 0..n {
            quad += (self.y[i] - mu0) * (a[i] - mu0 * b[i]);
        }
        let sigma2 = (quad / n as f64).max(SIGMA2_FLOOR);
        let mut log_det = 0.0;
        for i in 0..n {
            log_det += libm::log(self.r.get(i, i));
        }
        log_det *= 2.0;
        let lml = -0.5 * (n as f64 * libm::log(2.0 * core::f64::consts::PI * sigma2) + log_det + n as f64);
        if !lml.is_finite() {
            return None;
        }
        Some(LikelihoodValue { lml, mu0, sigma2, jitter })
    }
}

/// Concentrated log marginal likelihood of `(x, y)` at log10 length-scales
/// `theta`: the constant trend and process variance are profiled out
/// analytically. With a single training point the value is independent of
/// `theta`. Jitter escalation applies; exhausting it is the only error
/// beyond shape mismatches.
pub fn log_marginal_likelihood(
    x: &Matrix,
    y: &[f64],
    theta: &[f64],
    config: &GpConfig,
) -> Result<f64, SurrogateError> {
    if x.rows() != y.len() || y.is_empty() {
        return Err(SurrogateError::BadInput("row count must match target count and be nonzero"));
    }
    let (groups, n_groups) = resolve_groups(&config.anisotropy, x.cols())?;
    if theta.len() != n_groups {
        return Err(SurrogateError::BadInput("theta length must match the group count"));
    }
    let mut ws = LikelihoodWorkspace::new(x, y, &groups, n_groups, config.kernel, config.nugget);
    ws.evaluate(theta).map(|v| v.lml).ok_or(SurrogateError::IllConditioned)
}

/// Internal budget for one restart of the length-scale search.
fn restart_eval_budget(n_groups: usize) -> usize {
    12 + 6 * n_groups
}

/// Fits a Gaussian process: merges near-duplicate inputs (targets
/// averaged), standardizes targets internally, then maximizes the
/// concentrated likelihood over log10 length-scales with `n_restarts`
/// LHS-seeded coordinate searches. Ties prefer the earlier restart, so a
/// fixed seed gives a bitwise-identical model.
pub fn fit_gp<R: Rng>(
    x: &Matrix,
    y: &[f64],
    config: &GpConfig,
    rng: &mut R,
) -> Result<GpModel, SurrogateError> {
    if x.rows() != y.len() {
        return Err(SurrogateError::BadInput("row count must match target count"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SurrogateError::BadInput("targets must be finite"));
    }
    if config.n_restarts == 0 {
        return Err(SurrogateError::BadInput("n_restarts must be at least 1"));
    }
    let (lo, hi) = config.lengthscale_log10_bounds;
    if !(lo < hi) {
        return Err(SurrogateError::BadInput("length-scale bounds must satisfy lo < hi"));
    }
    let (groups, n_groups) = resolve_groups(&config.anisotropy, x.cols())?;

    let (xm, ym) = merge_duplicates(x, y);
    let n = xm.rows();
    if n < 2 {
        return Err(SurrogateError::InsufficientData { distinct: n });
    }

    let mean = ym.iter().sum::<f64>() / n as f64;
    let var = ym.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let scale = libm::sqrt(var);
    if scale <= 0.0 {
        return Ok(constant_model(xm, ym, mean, config, groups, n_groups));
    }
    let ys: Vec<f64> = ym.iter().map(|v| (v - mean) / scale).collect();

    let mut ws = LikelihoodWorkspace::new(&xm, &ys, &groups, n_groups, config.kernel, config.nugget);

    // The restart starts are the first draws taken from `rng`, which is
    // what lets callers reproduce them for likelihood comparisons.
    let starts = lhs::sample(config.n_restarts, n_groups, rng);
    let lower = vec![lo; n_groups];
    let upper = vec![hi; n_groups];
    let opts = SearchOptions {
        initial_step: 0.25,
        min_step: 1e-3,
        max_evals: restart_eval_budget(n_groups),
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let scaled_start: Vec<f64> = start.iter().map(|u| lo + u * (hi - lo)).collect();
        let (theta, neg) = coordinate_search(&scaled_start, &lower, &upper, &opts, |t| {
            ws.evaluate(t).map(|v| -v.lml).unwrap_or(f64::INFINITY)
        });
        if neg.is_finite() && best.as_ref().map_or(true, |(b, _)| -neg > *b) {
            best = Some((-neg, theta));
        }
    }
    let (_, theta) = best.ok_or(SurrogateError::IllConditioned)?;

    // Re-evaluating at the winner leaves its correlation factor in the
    // workspace for the exact rescaling below.
    let value = ws.evaluate(&theta).ok_or(SurrogateError::IllConditioned)?;

    // Undo the target standardization: sigma2 and the factor scale by the
    // squared and plain target scale, alpha by its inverse.
    let sigma2 = value.sigma2 * scale * scale;
    let mu0 = mean + scale * value.mu0;
    let factor_scale = scale * libm::sqrt(value.sigma2);
    let nugget_abs = sigma2 * value.jitter;
    let mut chol = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            chol.set(i, j, factor_scale * ws.r.get(i, j));
        }
    }
    let centered: Vec<f64> = ym.iter().map(|v| v - mu0).collect();
    let alpha = linalg::cholesky_solve(&chol, &centered);

    let inv_len2: Vec<f64> = groups.iter().map(|&g| libm::pow(10.0, -2.0 * theta[g])).collect();
    Ok(GpModel {
        x: xm,
        y: ym,
        theta,
        sigma2,
        mu0,
        chol,
        alpha,
        nugget: nugget_abs,
        kernel: config.kernel,
        groups,
        inv_len2,
    })
}

/// Degenerate model for constant targets: zero variance, the constant as
/// trend, a pure-jitter factorization. Predicts the constant with zero
/// standard deviation everywhere.
fn constant_model(
    x: Matrix,
    y: Vec<f64>,
    mean: f64,
    config: &GpConfig,
    groups: Vec<usize>,
    n_groups: usize,
) -> GpModel {
    let n = x.rows();
    let dim = x.cols();
    let mut chol = Matrix::zeros(n, n);
    let root = libm::sqrt(config.nugget);
    for i in 0..n {
        chol.set(i, i, root);
    }
    GpModel {
        x,
        y,
        theta: vec![0.0; n_groups],
        sigma2: 0.0,
        mu0: mean,
        chol,
        alpha: vec![0.0; n],
        nugget: config.nugget,
        kernel: config.kernel,
        groups,
        inv_len2: vec![1.0; dim],
    }
}

/// Fits the evaluability classifier on 0/1 labels. Labels must be exactly
/// 0 or 1; identical labels everywhere yield a constant model whose
/// probability is that label.
pub fn fit_feasibility<R: Rng>(
    x: &Matrix,
    labels: &[f64],
    config: &GpConfig,
    rng: &mut R,
) -> Result<FeasibilityModel, SurrogateError> {
    for (i, l) in labels.iter().enumerate() {
        if *l != 0.0 && *l != 1.0 {
            return Err(SurrogateError::InvalidLabel { index: i });
        }
    }
    let inner = fit_gp(x, labels, config, rng)?;
    Ok(FeasibilityModel { inner })
}
