//! Dispatch from a resolved configuration to the library routines, and
//! assembly of the output table.

use anyhow::{bail, Result};
use prune_dc_core::lab::{mc_sweep, Method};
use prune_dc_core::nonasym::{build_nonasym, retrain_dc_risk_s, sampled_prune_risk};
use prune_dc_core::pruning::{rank_one_excess, ridge_gamma, risk_feature_sweep, RidgeParams};
use prune_dc_core::report::{ReportRow, RiskReport};
use prune_dc_core::rf::{rf_pruning_experiment, RfExperimentOpts, RfModel};
use prune_dc_core::rng::stream_rng;
use prune_dc_core::stats::mean_stderr;

use crate::config::{default_grid, Config};
use crate::model_spec::{build_model, lambda_from_spec};

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names
        .iter()
        .map(|name| {
            Method::parse(name).ok_or_else(|| {
                anyhow::anyhow!(
                    "unknown method {name:?} (dense | magnitude | hessian | oracle | \
                     retrain_fresh | retrain_reuse)"
                )
            })
        })
        .collect()
}

fn sparsity_count(cfg: &Config) -> Result<usize> {
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        bail!("alpha must lie in (0, 1], got {}", cfg.alpha);
    }
    Ok(((cfg.alpha * cfg.p as f64).round() as usize).clamp(1, cfg.p))
}

fn sweep_grid(cfg: &Config, s: usize) -> Vec<usize> {
    if cfg.grid.is_empty() {
        default_grid(s, cfg.p, cfg.n, cfg.grid_points)
    } else {
        cfg.grid.clone()
    }
}

/// Theory-only sweep over fitted-feature counts. Grid points at the
/// interpolation threshold are emitted with empty risk fields.
pub fn theory_sweep(cfg: &Config) -> Result<RiskReport> {
    let model = build_model(cfg)?;
    let methods = parse_methods(&cfg.methods)?;
    let s = sparsity_count(cfg)?;
    let mut rows = Vec::new();
    for &k in &sweep_grid(cfg, s) {
        for &method in &methods {
            let risk = if k == cfg.n {
                None
            } else {
                Some(risk_feature_sweep(&model, k, s, method)?)
            };
            rows.push(ReportRow {
                grid: k as f64,
                method: method.label().to_string(),
                risk_theory: risk,
                risk_mc_mean: None,
                risk_mc_stderr: None,
                trials: 0,
            });
        }
    }
    Ok(RiskReport::from_rows(rows))
}

/// Monte-Carlo sweep with the matching theory column where a closed-form
/// path exists (diagonal covariance, non-retraining methods).
pub fn mc_sweep_cmd(cfg: &Config) -> Result<RiskReport> {
    let model = build_model(cfg)?;
    let methods = parse_methods(&cfg.methods)?;
    let s = sparsity_count(cfg)?;
    let seed = cfg.seed()?;
    let grid = sweep_grid(cfg, s);
    let mut rows = Vec::new();
    let live: Vec<usize> = grid.iter().cloned().filter(|&k| k != cfg.n).collect();
    let cells = mc_sweep(&model, &live, s, &methods, cfg.trials, seed)?;
    for &k in &grid {
        for &method in &methods {
            if k == cfg.n {
                rows.push(ReportRow {
                    grid: k as f64,
                    method: method.label().to_string(),
                    risk_theory: None,
                    risk_mc_mean: None,
                    risk_mc_stderr: None,
                    trials: 0,
                });
                continue;
            }
            let cell = cells
                .iter()
                .find(|c| c.grid == k && c.method == method)
                .expect("cell computed");
            // Retraining predictions are sample-based (dc-sample covers
            // them); the closed-form column applies to the other methods.
            let theory = match method {
                Method::RetrainFresh | Method::RetrainReuse => None,
                _ => Some(risk_feature_sweep(&model, k, s, method)?),
            };
            rows.push(ReportRow {
                grid: k as f64,
                method: method.label().to_string(),
                risk_theory: theory,
                risk_mc_mean: Some(cell.mean),
                risk_mc_stderr: Some(cell.stderr),
                trials: cell.trials as u64,
            });
        }
    }
    Ok(RiskReport::from_rows(rows))
}

/// Two-track random-features experiment over a list of feature counts.
pub fn rf_experiment(cfg: &Config) -> Result<RiskReport> {
    let seed = cfg.seed()?;
    let opts = RfExperimentOpts {
        estimation_samples: cfg.estimation_samples,
        dc_samples: cfg.dc_samples,
        retrain_supports: cfg.retrain_supports,
    };
    let mut rows = Vec::new();
    for (pi, &p) in cfg.p_list.iter().enumerate() {
        let template = RfModel::sample(cfg.d, p, cfg.n, &mut stream_rng(seed, pi as u64))?;
        let cells = rf_pruning_experiment(
            &template,
            &cfg.s_list,
            cfg.trials_r,
            cfg.trials_data,
            opts,
            seed.wrapping_add(1 + pi as u64),
        )?;
        for cell in cells {
            let method = if cell.method == Method::Dense {
                cell.method.label().to_string()
            } else {
                format!("{}:s={}", cell.method.label(), cell.s)
            };
            rows.push(ReportRow {
                grid: p as f64,
                method,
                risk_theory: Some(cell.theory),
                risk_mc_mean: Some(cell.mc_mean),
                risk_mc_stderr: Some(cell.mc_stderr),
                trials: cell.trials as u64,
            });
        }
    }
    Ok(RiskReport::from_rows(rows))
}

/// Sampled finite-p predictions: closed-form dense risk, sampled pruning
/// risk, and the retraining prediction, all from the fitted law.
pub fn dc_sample(cfg: &Config) -> Result<RiskReport> {
    let model = build_model(cfg)?;
    let s = sparsity_count(cfg)?;
    let seed = cfg.seed()?;
    let dc = build_nonasym(&model)?;

    let dense_draws: Vec<f64> = (0..cfg.samples)
        .map(|j| {
            let draw = prune_dc_core::nonasym::sample_dc_rng(
                &dc,
                &mut stream_rng(seed, j as u64),
            );
            model.population_risk(&draw)
        })
        .collect();
    let (dense_mean, dense_se) = mean_stderr(&dense_draws);
    let pruned = sampled_prune_risk(&model, &dc, s, cfg.samples, seed.wrapping_add(1))?;
    let retrain = retrain_dc_risk_s(&model, s, cfg.samples, seed.wrapping_add(2))?;

    Ok(RiskReport::from_rows(vec![
        ReportRow {
            grid: cfg.alpha,
            method: "dense".into(),
            risk_theory: Some(dc.dense_risk()),
            risk_mc_mean: Some(dense_mean),
            risk_mc_stderr: Some(dense_se),
            trials: cfg.samples as u64,
        },
        ReportRow {
            grid: cfg.alpha,
            method: "magnitude".into(),
            risk_theory: None,
            risk_mc_mean: Some(pruned.mean),
            risk_mc_stderr: Some(pruned.stderr),
            trials: pruned.samples as u64,
        },
        ReportRow {
            grid: cfg.alpha,
            method: "retrain".into(),
            risk_theory: None,
            risk_mc_mean: Some(retrain.mean),
            risk_mc_stderr: Some(retrain.stderr),
            trials: retrain.samples as u64,
        },
    ]))
}

pub fn ridge_gamma_cmd(cfg: &Config) -> Result<RiskReport> {
    let gamma = ridge_gamma(RidgeParams { p_bar: cfg.pbar, lambda_bar: cfg.lambda })?;
    Ok(RiskReport::from_rows(vec![ReportRow {
        grid: cfg.pbar,
        method: "ridge_gamma".into(),
        risk_theory: Some(gamma),
        risk_mc_mean: None,
        risk_mc_stderr: None,
        trials: 0,
    }]))
}

pub fn rank_one(cfg: &Config) -> Result<RiskReport> {
    let lambda = lambda_from_spec(&cfg.lambda_spec, cfg.p)?;
    let beta = crate::model_spec::latent_for_direction(&cfg.beta, &lambda)?;
    let (pruned, retrain) = rank_one_excess(
        lambda.as_slice(),
        beta.as_slice(),
        cfg.sigma * cfg.sigma,
        cfg.n,
        cfg.s,
    )?;
    let row = |method: &str, value: f64| ReportRow {
        grid: cfg.s as f64,
        method: method.into(),
        risk_theory: Some(value),
        risk_mc_mean: None,
        risk_mc_stderr: None,
        trials: 0,
    };
    Ok(RiskReport::from_rows(vec![
        row("pruned_excess", pruned),
        row("retrain_excess", retrain),
    ]))
}
