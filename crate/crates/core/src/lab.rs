//! Monte-Carlo ground truth for linear Gaussian problems: data generation,
//! min-norm / restricted least squares, pruning operators, the full
//! train -> prune -> retrain pipeline, and reproducible risk sweeps.
//!
//! All solvers are pseudoinverse-based with a relative singular-value cutoff
//! of 1e-12 so rank handling near the interpolation threshold is
//! deterministic. Trials are embarrassingly parallel; every trial draws from
//! its own counter-derived stream (see [`crate::rng`]), so reordering grid
//! points or changing the thread count never changes a number.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linalg::{pinv_solve, sym_sqrt, SV_CUTOFF};
use crate::rng::{stream_id, stream_rng};
use crate::stats::mean_stderr;
use crate::{Error, Result};

/// Covariance of the feature vector, with a diagonal fast path.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal(d) => d.len(),
            Covariance::Dense(m) => m.nrows(),
        }
    }

    /// The diagonal vector when the fast path applies.
    pub fn diagonal(&self) -> Option<&DVector<f64>> {
        match self {
            Covariance::Diagonal(d) => Some(d),
            Covariance::Dense(_) => None,
        }
    }

    /// Diagonal entries `Sigma_ii` (saliency denominators) for either layout.
    pub fn diag_entries(&self) -> DVector<f64> {
        match self {
            Covariance::Diagonal(d) => d.clone(),
            Covariance::Dense(m) => m.diagonal(),
        }
    }

    /// `v^T Sigma v`, exact diagonal fast path.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        match self {
            Covariance::Diagonal(d) => {
                let mut acc = crate::mu::Accumulator::default();
                for i in 0..d.len() {
                    acc.add(d[i] * v[i] * v[i]);
                }
                acc.value()
            }
            Covariance::Dense(m) => (v.transpose() * m * v)[(0, 0)],
        }
    }

    /// Principal submatrix on a sorted index set.
    pub fn restrict(&self, support: &[usize]) -> Covariance {
        match self {
            Covariance::Diagonal(d) => {
                Covariance::Diagonal(DVector::from_iterator(
                    support.len(),
                    support.iter().map(|&i| d[i]),
                ))
            }
            Covariance::Dense(m) => {
                let s = support.len();
                Covariance::Dense(DMatrix::from_fn(s, s, |i, j| m[(support[i], support[j])]))
            }
        }
    }
}

/// A linear Gaussian problem instance: `y = x^T beta* + sigma z` with
/// `x ~ N(0, Sigma)`.
#[derive(Debug, Clone)]
pub struct LgpModel {
    pub cov: Covariance,
    pub beta_star: DVector<f64>,
    pub sigma: f64,
    pub n: usize,
    pub p: usize,
    sqrt_cache: OnceLock<DMatrix<f64>>,
}

impl LgpModel {
    pub fn new(cov: Covariance, beta_star: DVector<f64>, sigma: f64, n: usize) -> Result<Self> {
        let p = cov.dim();
        if beta_star.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {p}-dimensional but beta_star has {}",
                beta_star.len()
            )));
        }
        if n == 0 || p == 0 {
            return Err(Error::InvalidArgument("need n >= 1 and p >= 1".into()));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma = {sigma} must be >= 0")));
        }
        match &cov {
            Covariance::Diagonal(d) => {
                if d.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err(Error::NotPositiveDefinite(
                        d.iter().cloned().fold(f64::INFINITY, f64::min),
                    ));
                }
            }
            Covariance::Dense(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::DimensionMismatch("covariance is not square".into()));
                }
                let asym = (m - m.transpose()).amax();
                let scale = m.amax().max(1e-300);
                if asym > 1e-10 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "covariance asymmetry {asym:.3e} exceeds tolerance"
                    )));
                }
            }
        }
        Ok(Self { cov, beta_star, sigma, n, p, sqrt_cache: OnceLock::new() })
    }

    /// Convenience constructor for identity covariance.
    pub fn identity(beta_star: DVector<f64>, sigma: f64, n: usize) -> Result<Self> {
        let p = beta_star.len();
        Self::new(Covariance::Diagonal(DVector::from_element(p, 1.0)), beta_star, sigma, n)
    }

    pub fn kappa(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Exact population risk `sigma^2 + (beta - beta*)^T Sigma (beta - beta*)`.
    pub fn population_risk(&self, beta: &DVector<f64>) -> f64 {
        let diff = beta - &self.beta_star;
        self.sigma * self.sigma + self.cov.quad_form(&diff)
    }

    /// Symmetric square root of a dense covariance, computed once and cached.
    /// Eigenvalues below `-1e-10 * lambda_max` are rejected; small negatives
    /// are clipped to zero.
    fn cov_sqrt(&self) -> Result<&DMatrix<f64>> {
        match &self.cov {
            Covariance::Dense(m) => {
                if let Some(s) = self.sqrt_cache.get() {
                    return Ok(s);
                }
                let s = sym_sqrt(m, 1e-10)?;
                Ok(self.sqrt_cache.get_or_init(|| s))
            }
            Covariance::Diagonal(_) => unreachable!("diagonal models scale columns directly"),
        }
    }

    /// Draws `(X, y)`: rows `x_i = Sigma^{1/2} g_i`, `y = X beta* + sigma z`.
    ///
    /// Values are drawn in a fixed element order (X row-major, then z), so a
    /// given generator state always produces the same dataset.
    pub fn generate(&self, rng: &mut ChaCha8Rng) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let (n, p) = (self.n, self.p);
        let mut raw = vec![0.0f64; n * p];
        for v in raw.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let g = DMatrix::from_row_slice(n, p, &raw);
        let x = match &self.cov {
            Covariance::Diagonal(d) => {
                let mut x = g;
                for j in 0..p {
                    x.column_mut(j).scale_mut(d[j].sqrt());
                }
                x
            }
            Covariance::Dense(_) => g * self.cov_sqrt()?,
        };
        let mut y = &x * &self.beta_star;
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            y[i] += self.sigma * z;
        }
        Ok((x, y))
    }
}

/// Minimum-norm interpolator `X^T (X X^T)^{-1} y` for n < p, via the
/// spectral pseudoinverse with relative cutoff 1e-12; dispatches to
/// [`least_squares`] when n >= p.
///
/// Unlike [`least_squares`], rank deficiency on the interpolation path is an
/// error rather than silently regularized, and the interpolation residual is
/// verified to `1e-8 * ||y||`.
pub fn min_norm(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, p) = (x.nrows(), x.ncols());
    if n >= p {
        return least_squares(x, y, None);
    }
    let sol = pinv_solve(x, y)?;
    if sol.rank < n {
        return Err(Error::RankDeficient(sol.min_ratio.min(SV_CUTOFF)));
    }
    let residual = (x * &sol.beta - y).norm();
    if residual > 1e-8 * y.norm().max(1e-300) {
        return Err(Error::NumericalFailure(format!(
            "interpolation residual {residual:.3e} too large"
        )));
    }
    Ok(sol.beta)
}

/// Least squares restricted to a feature subset: zero outside the support,
/// pseudoinverse solution of the column-restricted system inside. With more
/// support columns than rows this is the min-norm interpolator on the
/// restricted features.
pub fn least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    support: Option<&[usize]>,
) -> Result<DVector<f64>> {
    let p = x.ncols();
    match support {
        None => Ok(pinv_solve(x, y)?.beta),
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::EmptySupport);
            }
            if idx.iter().any(|&i| i >= p) {
                return Err(Error::InvalidArgument("support index out of range".into()));
            }
            let sub = x.select_columns(idx.iter());
            let sol = pinv_solve(&sub, y)?;
            let mut beta = DVector::zeros(p);
            for (k, &i) in idx.iter().enumerate() {
                beta[i] = sol.beta[k];
            }
            Ok(beta)
        }
    }
}

/// Indices of the `s` largest entries of `values` by absolute value; ties
/// keep the lowest index first. The result is sorted ascending.
pub fn top_s_indices(values: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order.into_iter().take(s).collect();
    kept.sort_unstable();
    kept
}

/// Magnitude pruning: keeps the `s` largest-magnitude entries. Idempotent.
pub fn prune_magnitude(beta: &DVector<f64>, s: usize) -> DVector<f64> {
    let kept = top_s_indices(beta.as_slice(), s.min(beta.len()));
    let mut out = DVector::zeros(beta.len());
    for i in kept {
        out[i] = beta[i];
    }
    out
}

/// Hessian pruning (optimal-brain-damage style): magnitude pruning in the
/// coordinates scaled by the empirical covariance diagonal
/// `Sigma_hat = diag(X^T X)/n`. On the kept support the scaling cancels, so
/// the surviving entries equal those of `beta`.
pub fn prune_hessian(beta: &DVector<f64>, s: usize, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = beta.len();
    if x.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns for a {p}-dimensional beta",
            x.ncols()
        )));
    }
    let n = x.nrows() as f64;
    let mut scores = vec![0.0f64; p];
    for j in 0..p {
        let diag = x.column(j).norm_squared() / n;
        if diag <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "column {j} of X is identically zero; Hessian scores undefined"
            )));
        }
        scores[j] = diag.sqrt() * beta[j].abs();
    }
    let kept = top_s_indices(&scores, s.min(p));
    let mut out = DVector::zeros(p);
    for i in kept {
        out[i] = beta[i];
    }
    Ok(out)
}

/// Pruning rule applied after the initial fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneRule {
    Magnitude,
    Hessian,
    /// Keep the top-s true saliency scores `Sigma_ii beta*_i^2`; the lab
    /// knows the ground truth.
    Oracle,
}

/// What happens after pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrainMode {
    None,
    /// Re-solve least squares on the pruned support, reusing the data.
    Reuse,
    /// Re-solve on a freshly drawn dataset of the same size.
    Fresh,
}

/// Reporting label for sweep methods; retraining methods select their
/// support by magnitude pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dense,
    Magnitude,
    Hessian,
    Oracle,
    RetrainFresh,
    RetrainReuse,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::Magnitude => "magnitude",
            Method::Hessian => "hessian",
            Method::Oracle => "oracle",
            Method::RetrainFresh => "retrain_fresh",
            Method::RetrainReuse => "retrain_reuse",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Some(match s {
            "dense" => Method::Dense,
            "magnitude" => Method::Magnitude,
            "hessian" => Method::Hessian,
            "oracle" => Method::Oracle,
            "retrain_fresh" => Method::RetrainFresh,
            "retrain_reuse" => Method::RetrainReuse,
            _ => return None,
        })
    }
}

/// A fitted (possibly pruned/retrained) model with its nonzero support.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub support: Vec<usize>,
    pub method_tag: Method,
}

fn oracle_indices(model: &LgpModel, features: usize, s: usize) -> Vec<usize> {
    let diag = model.cov.diag_entries();
    let saliency: Vec<f64> = (0..features)
        .map(|i| diag[i] * model.beta_star[i] * model.beta_star[i])
        .collect();
    top_s_indices(&saliency, s)
}

/// Executes train -> prune (-> retrain) on the first `features` columns and
/// returns the fitted vector. `rng_train` drives the dataset; `rng_fresh` is
/// consumed only in fresh-retraining mode.
#[allow(clippy::too_many_arguments)]
fn pipeline_fit(
    model: &LgpModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    features: usize,
    s: usize,
    rule: PruneRule,
    retrain: RetrainMode,
    rng_fresh: &mut ChaCha8Rng,
) -> Result<FitResult> {
    let fit_support: Vec<usize> = (0..features).collect();
    let beta_hat = least_squares(x, y, Some(&fit_support))?;

    let (pruned, support, tag) = match rule {
        PruneRule::Magnitude => {
            let b = prune_magnitude(&beta_hat, s);
            let sup = top_s_indices(beta_hat.as_slice(), s.min(features));
            (b, sup, Method::Magnitude)
        }
        PruneRule::Hessian => {
            let sub = x.columns(0, features).into_owned();
            let restricted = DVector::from_iterator(features, (0..features).map(|i| beta_hat[i]));
            let pruned_sub = prune_hessian(&restricted, s, &sub)?;
            let mut b = DVector::zeros(model.p);
            let mut sup = Vec::new();
            for i in 0..features {
                if pruned_sub[i] != 0.0 {
                    b[i] = pruned_sub[i];
                    sup.push(i);
                }
            }
            (b, sup, Method::Hessian)
        }
        PruneRule::Oracle => {
            let sup = oracle_indices(model, features, s);
            let mut b = DVector::zeros(model.p);
            for &i in &sup {
                b[i] = beta_hat[i];
            }
            (b, sup, Method::Oracle)
        }
    };

    match retrain {
        RetrainMode::None => Ok(FitResult { beta_hat: pruned, support, method_tag: tag }),
        RetrainMode::Reuse => {
            let beta = least_squares(x, y, Some(&support))?;
            Ok(FitResult { beta_hat: beta, support, method_tag: Method::RetrainReuse })
        }
        RetrainMode::Fresh => {
            let (x2, y2) = model.generate(rng_fresh)?;
            let beta = least_squares(&x2, &y2, Some(&support))?;
            Ok(FitResult { beta_hat: beta, support, method_tag: Method::RetrainFresh })
        }
    }
}

/// One full pipeline run; returns the exact population risk of the final
/// model. Stage streams: 0 trains, 1 retrains fresh.
pub fn run_pipeline(
    model: &LgpModel,
    s: usize,
    retrain: RetrainMode,
    rule: PruneRule,
    seed: u64,
) -> Result<f64> {
    if s > model.p {
        return Err(Error::InvalidArgument(format!("s = {s} exceeds p = {}", model.p)));
    }
    let mut rng_train = stream_rng(seed, stream_id(0, 0, 0));
    let mut rng_fresh = stream_rng(seed, stream_id(0, 0, 1));
    let (x, y) = model.generate(&mut rng_train)?;
    let fit = pipeline_fit(model, &x, &y, model.p, s, rule, retrain, &mut rng_fresh)?;
    Ok(model.population_risk(&fit.beta_hat))
}

/// Aggregated Monte-Carlo estimate for one (grid point, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub grid: usize,
    pub method: Method,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

fn method_risks(
    model: &LgpModel,
    k: usize,
    s: usize,
    methods: &[Method],
    rng_train: &mut ChaCha8Rng,
    rng_fresh: &ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (x, y) = model.generate(rng_train)?;
    methods
        .iter()
        .map(|&m| {
            let (rule, retrain, s_eff) = match m {
                Method::Dense => (PruneRule::Magnitude, RetrainMode::None, k),
                Method::Magnitude => (PruneRule::Magnitude, RetrainMode::None, s),
                Method::Hessian => (PruneRule::Hessian, RetrainMode::None, s),
                Method::Oracle => (PruneRule::Oracle, RetrainMode::None, s),
                Method::RetrainFresh => (PruneRule::Magnitude, RetrainMode::Fresh, s),
                Method::RetrainReuse => (PruneRule::Magnitude, RetrainMode::Reuse, s),
            };
            // Each method that consumes fresh data gets an identical copy of
            // the fresh stream, so method lists do not interact.
            let mut fresh = rng_fresh.clone();
            let fit = pipeline_fit(model, &x, &y, k, s_eff, rule, retrain, &mut fresh)?;
            Ok(model.population_risk(&fit.beta_hat))
        })
        .collect()
}

/// Monte-Carlo sweep over fitted feature counts `k` (fitting always uses the
/// first `k` features). Per-trial streams are derived from
/// `(seed, point, trial)`, so outputs are independent of execution order and
/// thread count.
pub fn mc_sweep(
    model: &LgpModel,
    grid: &[usize],
    s: usize,
    methods: &[Method],
    trials: usize,
    seed: u64,
) -> Result<Vec<McCell>> {
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least 2 trials".into()));
    }
    for &k in grid {
        if k == 0 || k > model.p {
            return Err(Error::InvalidArgument(format!("grid value {k} outside [1, p]")));
        }
        if s > k {
            return Err(Error::InvalidArgument(format!("sparsity {s} exceeds grid value {k}")));
        }
    }
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|pt| (0..trials).map(move |t| (pt, t)))
        .collect();
    let per_task: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(pt, t)| {
            // Streams key on the grid VALUE, so reordering grid points (or
            // splitting the grid across runs) reproduces the same numbers.
            let mut rng_train = stream_rng(seed, stream_id(grid[pt] as u64, t as u64, 0));
            let rng_fresh = stream_rng(seed, stream_id(grid[pt] as u64, t as u64, 1));
            method_risks(model, grid[pt], s, methods, &mut rng_train, &rng_fresh)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(grid.len() * methods.len());
    for (pt, &k) in grid.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            let risks: Vec<f64> = (0..trials)
                .map(|t| per_task[pt * trials + t][mi])
                .collect();
            let (mean, stderr) = mean_stderr(&risks);
            cells.push(McCell { grid: k, method, mean, stderr, trials });
        }
    }
    Ok(cells)
}
