//! ReLU random-features regression and its equivalent linear Gaussian
//! problem (matched second moments), enabling theory-vs-experiment
//! comparison for the nonlinear model.
//!
//! Inputs are `a ~ N(0, I_d)`, features `x = ReLU(R a)` for a fixed input
//! layer `R`, and labels `y = a^T beta1 + (a^T beta2)^2`. The equivalent
//! problem uses `Sigma = E[x x^T]`, `beta* = Sigma^{-1} E[y x]` and
//! `sigma^2 = E[(y - x^T beta*)^2]`, so the population risk of any candidate
//! vector is the exact quadratic `sigma^2 + (b - beta*)^T Sigma (b - beta*)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::lab::{self, Covariance, LgpModel, Method};
use crate::linalg::sym_pinv_apply;
use crate::nonasym;
use crate::rng::{stream_id, stream_rng};
use crate::stats::mean_stderr;
use crate::{Error, Result};

/// A random-features regression instance with a fixed input layer.
#[derive(Debug, Clone)]
pub struct RfModel {
    /// Input layer, `p x d`, i.i.d. standard normal entries.
    pub r: DMatrix<f64>,
    pub d: usize,
    pub p: usize,
    pub n: usize,
    /// Unit-norm linear label direction.
    pub beta1: DVector<f64>,
    /// Unit-norm quadratic label direction.
    pub beta2: DVector<f64>,
}

impl RfModel {
    pub fn new(
        r: DMatrix<f64>,
        beta1: DVector<f64>,
        beta2: DVector<f64>,
        n: usize,
    ) -> Result<Self> {
        let (p, d) = (r.nrows(), r.ncols());
        if beta1.len() != d || beta2.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "label directions must be {d}-dimensional"
            )));
        }
        for (name, b) in [("beta1", &beta1), ("beta2", &beta2)] {
            if (b.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must have unit norm (got {})",
                    b.norm()
                )));
            }
        }
        if n == 0 || p == 0 || d == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        Ok(Self { r, d, p, n, beta1, beta2 })
    }

    /// Samples a fresh input layer (and normalized label directions) from a
    /// generator.
    pub fn sample(d: usize, p: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut raw = vec![0.0f64; p * d];
        for v in raw.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let r = DMatrix::from_row_slice(p, d, &raw);
        let mut b1 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut b2 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        b1.normalize_mut();
        b2.normalize_mut();
        Self::new(r, b1, b2, n)
    }

    /// Draws inputs and evaluates features and labels for `count` samples:
    /// `X` is `count x p` with rows `ReLU(R a_i)`. ReLU maps 0 to 0.
    pub fn generate_features(
        &self,
        count: usize,
        rng: &mut ChaCha8Rng,
    ) -> (DMatrix<f64>, DVector<f64>) {
        let mut raw = vec![0.0f64; count * self.d];
        for v in raw.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let a = DMatrix::from_row_slice(count, self.d, &raw);
        let mut x = &a * self.r.transpose();
        for v in x.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let lin = &a * &self.beta1;
        let quad = &a * &self.beta2;
        let y = DVector::from_fn(count, |i, _| lin[i] + quad[i] * quad[i]);
        (x, y)
    }

    /// Training draw of size `n`.
    pub fn rf_generate(&self, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>) {
        self.generate_features(self.n, rng)
    }

    /// Closed-form feature covariance `Sigma_ij = E[ReLU(u) ReLU(v)]` for
    /// jointly Gaussian `(u, v) = (r_i^T a, r_j^T a)`:
    ///
    /// ```text
    /// Sigma_ij = ||r_i|| ||r_j|| / (2 pi) * (sin t + (pi - t) cos t),
    ///            cos t = <r_i, r_j> / (||r_i|| ||r_j||)
    /// ```
    ///
    /// the first-order arc-cosine kernel; the diagonal reduces to
    /// `||r_i||^2 / 2`.
    pub fn analytic_cov(&self) -> DMatrix<f64> {
        let p = self.p;
        let norms: Vec<f64> = (0..p).map(|i| self.r.row(i).norm()).collect();
        let gram = &self.r * self.r.transpose();
        let mut sigma = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let denom = norms[i] * norms[j];
                let value = if denom == 0.0 {
                    0.0
                } else {
                    let rho = (gram[(i, j)] / denom).clamp(-1.0, 1.0);
                    let theta = rho.acos();
                    denom / (2.0 * std::f64::consts::PI)
                        * (theta.sin() + (std::f64::consts::PI - theta) * rho)
                };
                sigma[(i, j)] = value;
                sigma[(j, i)] = value;
            }
        }
        sigma
    }
}

/// How the feature covariance of the equivalent problem is obtained. Cross
/// moments `E[y x]` and the residual noise are always estimated by Monte
/// Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMode {
    /// Arc-cosine closed form (exact given `R`).
    Analytic,
    /// Plain sample average over the estimation budget.
    MonteCarlo,
}

/// The matched linear Gaussian problem plus estimation metadata.
#[derive(Debug, Clone)]
pub struct EquivalentLgp {
    pub model: LgpModel,
    pub mode: CovMode,
    /// Monte-Carlo samples used for the moment estimates.
    pub samples: usize,
    /// Condition number of the kept covariance spectrum.
    pub cond_number: f64,
}

const CHUNK: usize = 2048;

/// Builds the equivalent problem for a fixed input layer.
///
/// `samples` is the dedicated estimation budget (independent of any training
/// data); it is consumed once for `E[y x]` and once for the residual noise.
pub fn equivalent_lgp(
    model: &RfModel,
    mode: CovMode,
    samples: usize,
    rng_seed: u64,
) -> Result<EquivalentLgp> {
    let p = model.p;
    if samples < 10 * p {
        return Err(Error::InvalidArgument(format!(
            "estimation budget {samples} is below 10 p = {}",
            10 * p
        )));
    }

    let sigma = match mode {
        CovMode::Analytic => model.analytic_cov(),
        CovMode::MonteCarlo => {
            let mut rng = stream_rng(rng_seed, 0);
            let mut acc = DMatrix::zeros(p, p);
            let mut left = samples;
            while left > 0 {
                let take = left.min(CHUNK);
                let (x, _) = model.generate_features(take, &mut rng);
                acc += x.transpose() * &x;
                left -= take;
            }
            acc / samples as f64
        }
    };

    // Cross moments E[y x] from a dedicated stream.
    let mut rng = stream_rng(rng_seed, 1);
    let mut b = DVector::zeros(p);
    let mut left = samples;
    while left > 0 {
        let take = left.min(CHUNK);
        let (x, y) = model.generate_features(take, &mut rng);
        b += x.transpose() * &y;
        left -= take;
    }
    b /= samples as f64;

    let (beta_star, cond_number) = sym_pinv_apply(&sigma, &b, 1e-10)?;

    // Residual noise from a third stream.
    let mut rng = stream_rng(rng_seed, 2);
    let mut sq = 0.0;
    let mut left = samples;
    while left > 0 {
        let take = left.min(CHUNK);
        let (x, y) = model.generate_features(take, &mut rng);
        let resid = y - x * &beta_star;
        sq += resid.norm_squared();
        left -= take;
    }
    let sigma_noise = (sq / samples as f64).max(0.0).sqrt();

    let lgp = LgpModel::new(Covariance::Dense(sigma), beta_star, sigma_noise, model.n)?;
    Ok(EquivalentLgp { model: lgp, mode, samples, cond_number })
}

/// One aggregated row of the random-features experiment.
#[derive(Debug, Clone)]
pub struct RfCell {
    pub p: usize,
    pub method: Method,
    /// Sparsity target; equals p for the dense rows.
    pub s: usize,
    pub theory: f64,
    pub mc_mean: f64,
    /// Standard error across input-layer realizations (cluster level).
    pub mc_stderr: f64,
    pub trials: usize,
}

/// Experiment configuration knobs with the defaults used by the reference
/// protocol.
#[derive(Debug, Clone, Copy)]
pub struct RfExperimentOpts {
    /// Moment-estimation budget per input layer.
    pub estimation_samples: usize,
    /// DC draws for the sampled pruning prediction.
    pub dc_samples: usize,
    /// Support draws for the retraining prediction.
    pub retrain_supports: usize,
}

impl Default for RfExperimentOpts {
    fn default() -> Self {
        Self { estimation_samples: 200_000, dc_samples: 256, retrain_supports: 64 }
    }
}

/// Runs the two-track experiment: for each input-layer realization, solve
/// random-features regression empirically (min-norm, magnitude pruning,
/// retraining on fresh/reused data) and evaluate the equivalent-problem
/// predictions for the same fixed layer; aggregates both tracks across
/// realizations.
pub fn rf_pruning_experiment(
    template: &RfModel,
    s_targets: &[usize],
    trials_r: usize,
    trials_data: usize,
    opts: RfExperimentOpts,
    seed: u64,
) -> Result<Vec<RfCell>> {
    if trials_r == 0 || trials_data == 0 {
        return Err(Error::InvalidArgument("trial counts must be positive".into()));
    }
    for &s in s_targets {
        if s == 0 || s > template.p {
            return Err(Error::InvalidArgument(format!("sparsity target {s} outside [1, p]")));
        }
    }

    // methods tracked: dense + per-s magnitude / retrain fresh / retrain reuse
    struct RealizationResult {
        theory: Vec<f64>,
        mc: Vec<f64>,
    }

    let per_r: Vec<RealizationResult> = (0..trials_r)
        .into_par_iter()
        .map(|r_idx| -> Result<RealizationResult> {
            let rid = r_idx as u64;
            let mut rng_r = stream_rng(seed, stream_id(rid, 0, 0));
            let rf = RfModel::sample(template.d, template.p, template.n, &mut rng_r)?;
            let rf = RfModel::new(rf.r, template.beta1.clone(), template.beta2.clone(), template.n)?;
            let eq = equivalent_lgp(&rf, CovMode::Analytic, opts.estimation_samples, seed ^ rid)?;

            // Theory track for this fixed layer.
            let dc = nonasym::build_nonasym(&eq.model)?;
            let mut theory = vec![dc.dense_risk()];
            for (si, &s) in s_targets.iter().enumerate() {
                let prune = nonasym::sampled_prune_risk(
                    &eq.model,
                    &dc,
                    s,
                    opts.dc_samples,
                    seed ^ (rid.wrapping_mul(1000) + 3 + si as u64),
                )?;
                let retrain = nonasym::retrain_dc_risk_s(
                    &eq.model,
                    s,
                    opts.retrain_supports,
                    seed ^ (rid.wrapping_mul(1000) + 500 + si as u64),
                )?;
                theory.push(prune.mean);
                theory.push(retrain.mean); // fresh
                theory.push(retrain.mean); // reuse reported against the same prediction
            }

            // Monte-Carlo track: average over data draws for this layer.
            let mut sums = vec![0.0f64; theory.len()];
            for t in 0..trials_data {
                let tid = t as u64;
                let mut rng_train = stream_rng(seed, stream_id(rid, tid, 5));
                let mut rng_fresh = stream_rng(seed, stream_id(rid, tid, 6));
                let (x, y) = rf.rf_generate(&mut rng_train);
                let beta_hat = lab::least_squares(&x, &y, None)?;
                sums[0] += eq.model.population_risk(&beta_hat);
                for (si, &s) in s_targets.iter().enumerate() {
                    let pruned = lab::prune_magnitude(&beta_hat, s);
                    let support = lab::top_s_indices(beta_hat.as_slice(), s);
                    let (x2, y2) = rf.rf_generate(&mut rng_fresh);
                    let fresh = lab::least_squares(&x2, &y2, Some(&support))?;
                    let reuse = lab::least_squares(&x, &y, Some(&support))?;
                    sums[1 + 3 * si] += eq.model.population_risk(&pruned);
                    sums[2 + 3 * si] += eq.model.population_risk(&fresh);
                    sums[3 + 3 * si] += eq.model.population_risk(&reuse);
                }
            }
            let mc = sums.into_iter().map(|v| v / trials_data as f64).collect();
            Ok(RealizationResult { theory, mc })
        })
        .collect::<Result<_>>()?;

    // Aggregate across realizations; stderr at the realization level.
    let n_cols = 1 + 3 * s_targets.len();
    let mut cells = Vec::with_capacity(n_cols);
    let labels: Vec<(Method, usize)> = std::iter::once((Method::Dense, template.p))
        .chain(s_targets.iter().flat_map(|&s| {
            [
                (Method::Magnitude, s),
                (Method::RetrainFresh, s),
                (Method::RetrainReuse, s),
            ]
        }))
        .collect();
    for (col, &(method, s)) in labels.iter().enumerate() {
        let theory_vals: Vec<f64> = per_r.iter().map(|r| r.theory[col]).collect();
        let mc_vals: Vec<f64> = per_r.iter().map(|r| r.mc[col]).collect();
        let (theory, _) = mean_stderr(&theory_vals);
        let (mc_mean, mc_stderr) = mean_stderr(&mc_vals);
        cells.push(RfCell {
            p: template.p,
            method,
            s,
            theory,
            mc_mean,
            mc_stderr,
            trials: trials_r * trials_data,
        });
    }
    Ok(cells)
}

/// Dense equivalent-problem prediction for one layer (used by tests and the
/// CLI when only the unpruned risk is needed).
pub fn dense_dc_risk(eq: &EquivalentLgp) -> Result<f64> {
    if eq.model.p > eq.model.n {
        Ok(nonasym::build_nonasym(&eq.model)?.dense_risk())
    } else if eq.model.p < eq.model.n {
        let kappa = eq.model.kappa();
        Ok(eq.model.sigma * eq.model.sigma / (1.0 - kappa))
    } else {
        Err(Error::InterpolationThreshold)
    }
}
