//! Pruning thresholds and closed-form risk predictions: dense, magnitude,
//! Hessian, fixed oracle subsets, restricted-fit subsets, the rank-one
//! retraining formulas and the ridge shrinkage parameter.
//!
//! Everything here is a pure function of a solved [`DcSolution`] (or plain
//! scalars), so sweep points evaluate in parallel for free.

use crate::dc::{self, DcSolution};
use crate::lab::{top_s_indices, LgpModel, Method};
use crate::mu::{Accumulator, MuDistribution};
use crate::special::{truncated_sq_risk, two_sided_tail};
use crate::{Error, Result};

/// Sparsity-matching thresholds for a mixture law at kept fraction `alpha`.
///
/// `t_star` thresholds the raw coordinates (magnitude pruning); `t_diamond`
/// thresholds the `Lambda^{1/2}`-scaled coordinates (Hessian pruning).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub t_star: f64,
    pub t_diamond: f64,
    pub alpha: f64,
}

/// Ridge-regression shape parameters: `p_bar = p/n` and the rescaled
/// regularizer `lambda_bar = lambda / p_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeParams {
    pub p_bar: f64,
    pub lambda_bar: f64,
}

/// Largest `t` with `sum_i w_i P(|N(m_i, s_i^2)| >= t) >= alpha`.
///
/// Bisection keeps the invariant `tail(lo) >= alpha > tail(hi)` and returns
/// `lo`, i.e. the supremum side; at a jump of the tail (point-mass
/// components) the exact level `alpha` may be unattainable and the returned
/// threshold sits at the jump location.
fn solve_tail_threshold(components: &[(f64, f64, f64)], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    if components.iter().all(|&(_, _, s)| s == 0.0) {
        return Err(Error::DegenerateMixture(alpha));
    }
    let tail = |t: f64| -> f64 {
        let mut acc = Accumulator::default();
        for &(w, m, s) in components {
            acc.add(w * two_sided_tail(m, s, t));
        }
        acc.value()
    };
    let mut lo = 0.0f64;
    let mut hi = components
        .iter()
        .map(|&(_, m, s)| m.abs() + 40.0 * s)
        .fold(1.0, f64::max);
    let mut guard = 0;
    while tail(hi) >= alpha {
        hi *= 2.0;
        guard += 1;
        if guard > 90 {
            return Err(Error::NumericalFailure(
                "tail threshold bracket failed to close".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) >= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Threshold `t*` for magnitude pruning at kept fraction `alpha`.
pub fn threshold_magnitude(sol: &DcSolution, alpha: f64) -> Result<f64> {
    let comps: Vec<_> = sol
        .components
        .iter()
        .map(|c| (c.weight, c.mean, c.std))
        .collect();
    solve_tail_threshold(&comps, alpha)
}

/// Threshold `t_diamond` for Hessian pruning: the same construction applied
/// to the scaled variable `Lambda^{1/2} X`.
pub fn threshold_hessian(sol: &DcSolution, alpha: f64) -> Result<f64> {
    let comps: Vec<_> = sol
        .components
        .iter()
        .map(|c| {
            let r = c.lambda.sqrt();
            (c.weight, r * c.mean, r * c.std)
        })
        .collect();
    solve_tail_threshold(&comps, alpha)
}

/// Both thresholds at once.
pub fn thresholds(sol: &DcSolution, alpha: f64) -> Result<ThresholdResult> {
    Ok(ThresholdResult {
        t_star: threshold_magnitude(sol, alpha)?,
        t_diamond: threshold_hessian(sol, alpha)?,
        alpha,
    })
}

/// Risk of the unpruned solution: `sigma^2 + sum_i w_i Lambda_i ((B_i -
/// m_i)^2 + s_i^2)`.
pub fn risk_dense(sol: &DcSolution) -> f64 {
    let mut acc = Accumulator::default();
    for c in &sol.components {
        let bias = c.b - c.mean;
        acc.add(c.weight * c.lambda * (bias * bias + c.std * c.std));
    }
    sol.sigma2 + acc.value()
}

/// Magnitude-pruning risk at kept fraction `alpha`:
/// `sigma^2 + E[Lambda (B - T_{t*}(X))^2]` with the per-component expectation
/// in closed form via truncated-Gaussian moments.
pub fn risk_magnitude(sol: &DcSolution, alpha: f64) -> Result<f64> {
    let t = threshold_magnitude(sol, alpha)?;
    let mut acc = Accumulator::default();
    for c in &sol.components {
        acc.add(c.weight * c.lambda * truncated_sq_risk(c.b, c.mean, c.std, t));
    }
    Ok(sol.sigma2 + acc.value())
}

/// Hessian-pruning risk at kept fraction `alpha`:
/// `sigma^2 + E[(Lambda^{1/2} B - T_{t_diamond}(Lambda^{1/2} X))^2]`.
///
/// The scaling absorbs the `Lambda` factor of the dense formula, so for
/// constant `Lambda` this coincides with [`risk_magnitude`] at every `alpha`.
pub fn risk_hessian(sol: &DcSolution, alpha: f64) -> Result<f64> {
    let t = threshold_hessian(sol, alpha)?;
    let mut acc = Accumulator::default();
    for c in &sol.components {
        let r = c.lambda.sqrt();
        acc.add(c.weight * truncated_sq_risk(r * c.b, r * c.mean, r * c.std, t));
    }
    Ok(sol.sigma2 + acc.value())
}

/// Risk when a fixed set of components is kept and the rest are zeroed,
/// regardless of the realized coordinate values (oracle-style pruning).
pub fn risk_kept_subset(sol: &DcSolution, kept: &[bool]) -> Result<f64> {
    if kept.len() != sol.components.len() {
        return Err(Error::DimensionMismatch(format!(
            "kept mask has {} entries for {} components",
            kept.len(),
            sol.components.len()
        )));
    }
    let mut acc = Accumulator::default();
    for (c, &keep) in sol.components.iter().zip(kept) {
        let term = if keep {
            let bias = c.b - c.mean;
            bias * bias + c.std * c.std
        } else {
            c.b * c.b
        };
        acc.add(c.weight * c.lambda * term);
    }
    Ok(sol.sigma2 + acc.value())
}

/// Risk of re-solving least squares on a fixed feature subset in the
/// underparameterized regime: `(total - subset + sigma^2) / (1 - kappa_s)`
/// with `kappa_s = s/n < 1`. The missing signal energy acts as independent
/// noise for the restricted fit.
pub fn risk_subset(
    total_energy: f64,
    subset_energy: f64,
    sigma2: f64,
    kappa_s: f64,
) -> Result<f64> {
    if !(kappa_s > 0.0 && kappa_s < 1.0) {
        return Err(Error::InvalidKappa { kappa: kappa_s, expected: "0 < s/n < 1" });
    }
    if subset_energy < 0.0 || subset_energy > total_energy * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::SubsetEnergy { subset: subset_energy, total: total_energy });
    }
    let missing = (total_energy - subset_energy).max(0.0);
    Ok((missing + sigma2) / (1.0 - kappa_s))
}

/// Excess risks for the perfectly correlated rank-one covariance
/// `Sigma = lambda lambda^T`: returns `(pruned_excess, retrain_excess)`.
///
/// With `zeta = ||T_s(lambda)||^2 / ||lambda||^2`,
/// pruned excess  = zeta^2 sigma^2 / (n-2) + (1-zeta)^2 (lambda^T beta*)^2,
/// retrain excess = sigma^2 / (n-2) for every s.
pub fn rank_one_excess(
    lambda_vec: &[f64],
    beta_star: &[f64],
    sigma2: f64,
    n: usize,
    s: usize,
) -> Result<(f64, f64)> {
    if lambda_vec.len() != beta_star.len() {
        return Err(Error::DimensionMismatch(format!(
            "lambda has {} entries, beta_star has {}",
            lambda_vec.len(),
            beta_star.len()
        )));
    }
    let p = lambda_vec.len();
    if n <= 2 {
        return Err(Error::InvalidArgument(format!("need n > 2, got {n}")));
    }
    if s == 0 || s > p {
        return Err(Error::InvalidArgument(format!("need 1 <= s <= {p}, got {s}")));
    }
    let norm2: f64 = lambda_vec.iter().map(|l| l * l).sum();
    if norm2 == 0.0 {
        return Err(Error::InvalidArgument("lambda is the zero vector".into()));
    }
    let kept = top_s_indices(lambda_vec, s);
    let kept2: f64 = kept.iter().map(|&i| lambda_vec[i] * lambda_vec[i]).sum();
    let zeta = kept2 / norm2;
    let c_star: f64 = lambda_vec.iter().zip(beta_star).map(|(l, b)| l * b).sum();
    let noise = sigma2 / (n as f64 - 2.0);
    let pruned = zeta * zeta * noise + (1.0 - zeta) * (1.0 - zeta) * c_star * c_star;
    Ok((pruned, noise))
}

/// Closed-form ridge shrinkage coefficient
/// `gamma = (1 - lambda_bar - 1/p_bar + sqrt((1 - lambda_bar - 1/p_bar)^2 +
/// 4 lambda_bar)) / 2`, always in `[0, 1)`.
pub fn ridge_gamma(params: RidgeParams) -> Result<f64> {
    let RidgeParams { p_bar, lambda_bar } = params;
    if !(p_bar > 0.0) || lambda_bar < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need p_bar > 0 and lambda_bar >= 0, got ({p_bar}, {lambda_bar})"
        )));
    }
    let a = 1.0 - lambda_bar - 1.0 / p_bar;
    Ok(0.5 * (a + (a * a + 4.0 * lambda_bar).sqrt()))
}

/// Ridge residual second moment `h^2` for `p_bar < 1`.
///
/// Evaluated through `w = (1 + 1/p_bar + lambda_bar - sqrt((1 + 1/p_bar +
/// lambda_bar)^2 - 4/p_bar)) / 2` so that no division by `gamma` occurs as
/// `lambda_bar -> 0`. The `p_bar > 1` branch of this formula is inconsistent
/// in the source derivation and is rejected.
pub fn ridge_h2(params: RidgeParams, signal_energy: f64, sigma2: f64) -> Result<f64> {
    let RidgeParams { p_bar, lambda_bar } = params;
    if !(p_bar > 0.0 && p_bar < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge h^2 is only exposed for p_bar < 1 (the p_bar > 1 branch is \
             known-inconsistent); got p_bar = {p_bar}"
        )));
    }
    if signal_energy < 0.0 || sigma2 < 0.0 {
        return Err(Error::InvalidArgument("energies must be non-negative".into()));
    }
    let gamma = ridge_gamma(params)?;
    let c = 1.0 + 1.0 / p_bar + lambda_bar;
    let w = 0.5 * (c - (c * c - 4.0 / p_bar).sqrt());
    let denom = 1.0 / (p_bar * w * w) - 1.0;
    if denom <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "h^2 denominator {denom} is not positive"
        )));
    }
    Ok((signal_energy * gamma * gamma + sigma2) / denom)
}

/// Theoretical risk of fitting the first `k` features and pruning to `s`
/// nonzeros, under a diagonal-covariance model.
///
/// The missing features beyond `k` enter as extra independent noise
/// `sigma_k^2 = sigma^2 + sum_{i>k} Lambda_i beta*_i^2`; the fitted problem
/// dispatches to the over- (`k > n`) or under-parameterized (`k < n`) law
/// and the requested pruning risk with kept fraction `alpha = s/k`.
pub fn risk_feature_sweep(model: &LgpModel, k: usize, s: usize, method: Method) -> Result<f64> {
    let diag = model.cov.diagonal().ok_or_else(|| {
        Error::InvalidArgument("feature sweeps require a diagonal covariance".into())
    })?;
    let p = model.p;
    if k == 0 || k > p {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= {p}, got k = {k}")));
    }
    if k == model.n {
        return Err(Error::InterpolationThreshold);
    }
    if s == 0 || s > k {
        return Err(Error::InvalidArgument(format!("need 1 <= s <= k = {k}, got s = {s}")));
    }

    let lambda_k = &diag.as_slice()[..k];
    let beta_k = &model.beta_star.as_slice()[..k];
    let mut tail_energy = Accumulator::default();
    for i in k..p {
        tail_energy.add(diag[i] * model.beta_star[i] * model.beta_star[i]);
    }
    let sigma_k2 = model.sigma * model.sigma + tail_energy.value();

    let mu = MuDistribution::from_model(lambda_k, beta_k)?;
    let kappa = k as f64 / model.n as f64;
    let sol = if k > model.n {
        dc::build_mixture(&mu, kappa, sigma_k2)?
    } else {
        dc::build_mixture_underparam(&mu, kappa, sigma_k2)?
    };
    let alpha = s as f64 / k as f64;

    match method {
        Method::Dense => Ok(risk_dense(&sol)),
        Method::Magnitude => risk_magnitude(&sol, alpha),
        Method::Hessian => risk_hessian(&sol, alpha),
        Method::Oracle => {
            let saliency: Vec<f64> = lambda_k
                .iter()
                .zip(beta_k)
                .map(|(l, b)| l * b * b)
                .collect();
            let mut kept = vec![false; k];
            for i in top_s_indices(&saliency, s) {
                kept[i] = true;
            }
            risk_kept_subset(&sol, &kept)
        }
        Method::RetrainFresh | Method::RetrainReuse => Err(Error::InvalidArgument(
            "retraining risks are sample-based; use the retraining DC".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc::{build_mixture, build_mixture_underparam};
    use crate::mu::MuAtom;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn law(atoms: Vec<(f64, f64, f64)>) -> MuDistribution {
        MuDistribution::from_atoms(
            atoms
                .into_iter()
                .map(|(lambda, b, weight)| MuAtom { lambda, b, weight })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn threshold_alpha_one_is_zero() {
        let sol = build_mixture(&law(vec![(1.0, 1.0, 1.0)]), 2.0, 1.0).unwrap();
        assert_eq!(threshold_magnitude(&sol, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn threshold_gaussian_quartile() {
        // Single component N(0, c^2): t* at alpha = 1/2 is c * Phi^{-1}(3/4).
        for c in [0.5, 1.0, 3.0] {
            let mut sol = build_mixture(&law(vec![(1.0, 0.0, 1.0)]), 2.0, 1.0).unwrap();
            sol.components[0].std = c;
            let t = threshold_magnitude(&sol, 0.5).unwrap();
            close(t, c * 0.6744897501960817, 1e-10 * c);
        }
    }

    #[test]
    fn threshold_grows_as_alpha_shrinks() {
        let sol = build_mixture(&law(vec![(1.0, 1.0, 1.0)]), 2.0, 1.0).unwrap();
        let t1 = threshold_magnitude(&sol, 0.1).unwrap();
        let t2 = threshold_magnitude(&sol, 0.01).unwrap();
        let t3 = threshold_magnitude(&sol, 0.001).unwrap();
        assert!(0.0 < t1 && t1 < t2 && t2 < t3);
        // And the attained tail matches alpha.
        close(crate::dc::mixture_tail(&sol, t1), 0.1, 1e-9);
    }

    #[test]
    fn threshold_rejects_degenerate_point_mass() {
        // Noiseless and signal-free: every component collapses to a point.
        let sol = build_mixture(&law(vec![(1.0, 0.0, 1.0)]), 2.0, 0.0).unwrap();
        assert_eq!(sol.components[0].std, 0.0);
        assert!(threshold_magnitude(&sol, 0.5).is_err());
        assert_eq!(threshold_magnitude(&sol, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn dense_risk_closed_form_isotropic() {
        // Lambda = 1: risk = kappa sigma^2/(kappa-1) + E[B^2] (kappa-1)/kappa.
        for (kappa, sigma2, energy) in
            [(2.0, 1.0, 1.0), (4.0, 0.5, 2.0), (1.25, 2.0, 0.25f64)]
        {
            let sol = build_mixture(&law(vec![(1.0, energy.sqrt(), 1.0)]), kappa, sigma2).unwrap();
            let expected = kappa * sigma2 / (kappa - 1.0) + energy * (kappa - 1.0) / kappa;
            close(risk_dense(&sol), expected, 1e-10);
        }
    }

    #[test]
    fn dense_risk_underparam_exact() {
        let mu = law(vec![(0.5, 1.0, 0.3), (2.0, -0.7, 0.7)]);
        for kappa in [0.1, 0.3, 0.5, 0.9] {
            let sol = build_mixture_underparam(&mu, kappa, 1.3).unwrap();
            close(risk_dense(&sol), 1.3 / (1.0 - kappa), 1e-12);
        }
    }

    #[test]
    fn magnitude_limits() {
        let mu = law(vec![(1.0, 1.0, 0.5), (3.0, -0.5, 0.5)]);
        let sol = build_mixture(&mu, 2.0, 1.0).unwrap();
        close(risk_magnitude(&sol, 1.0).unwrap(), risk_dense(&sol), 1e-10);
        let all_pruned = sol.sigma2 + mu.weighted_signal_energy();
        close(risk_magnitude(&sol, 1e-12).unwrap(), all_pruned, 1e-8);
    }

    #[test]
    fn magnitude_dense_example() {
        let sol = build_mixture(&law(vec![(1.0, 1.0, 1.0)]), 2.0, 1.0).unwrap();
        close(risk_magnitude(&sol, 1.0).unwrap(), 2.5, 1e-10);
    }

    #[test]
    fn hessian_equals_magnitude_for_constant_lambda() {
        for c in [0.5, 1.0, 2.0] {
            let mu = law(vec![(c, 1.0, 0.4), (c, -2.0, 0.6)]);
            let sol = build_mixture(&mu, 3.0, 0.7).unwrap();
            for alpha in [0.05, 0.3, 0.8, 1.0] {
                close(
                    risk_hessian(&sol, alpha).unwrap(),
                    risk_magnitude(&sol, alpha).unwrap(),
                    1e-8,
                );
            }
        }
    }

    #[test]
    fn hessian_beats_magnitude_on_spiked_law() {
        // Spiked covariance with flat coefficients: the eigenvalue scaling
        // exposes the salient atoms that raw magnitudes miss.
        let mu = law(vec![(25.0, 1.0, 0.1), (1.0, 1.0, 0.9)]);
        let sol = build_mixture(&mu, 10.0 / 3.0, 1.0).unwrap();
        let hess = risk_hessian(&sol, 0.1).unwrap();
        let magn = risk_magnitude(&sol, 0.1).unwrap();
        assert!(hess <= magn, "hessian {hess} > magnitude {magn}");
    }

    #[test]
    fn kept_subset_matches_dense_when_all_kept() {
        let mu = law(vec![(25.0, 1.0, 0.1), (1.0, 1.0, 0.9)]);
        let sol = build_mixture(&mu, 2.0, 1.0).unwrap();
        close(
            risk_kept_subset(&sol, &[true, true]).unwrap(),
            risk_dense(&sol),
            1e-12,
        );
        let nothing = risk_kept_subset(&sol, &[false, false]).unwrap();
        close(nothing, sol.sigma2 + mu.weighted_signal_energy(), 1e-12);
    }

    #[test]
    fn subset_risk_examples() {
        close(risk_subset(2.0, 2.0, 1.0, 0.2).unwrap(), 1.25, 1e-14);
        close(risk_subset(2.0, 1.5, 1.0, 0.2).unwrap(), 1.875, 1e-14);
        close(risk_subset(2.0, 2.0, 0.0, 0.2).unwrap(), 0.0, 0.0);
        assert!(risk_subset(2.0, 2.5, 1.0, 0.2).is_err());
        assert!(risk_subset(2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn subset_risk_decreasing_in_subset_energy() {
        let mut last = f64::INFINITY;
        for i in 0..10 {
            let subset = i as f64 * 0.2;
            let r = risk_subset(2.0, subset, 0.5, 0.3).unwrap();
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn rank_one_examples() {
        // s = p keeps everything: zeta = 1.
        let (pruned, retrain) = rank_one_excess(&[3.0, 4.0], &[1.0, 1.0], 1.0, 102, 2).unwrap();
        close(pruned, 0.01, 1e-15);
        close(retrain, 0.01, 1e-15);

        // Hand example: zeta = 16/25, sigma = 0, lambda^T beta* = 7.
        let (pruned, retrain) = rank_one_excess(&[3.0, 4.0], &[1.0, 1.0], 0.0, 100, 1).unwrap();
        close(pruned, 6.3504, 1e-12);
        assert_eq!(retrain, 0.0);

        assert!(rank_one_excess(&[1.0], &[1.0], 1.0, 2, 1).is_err());
        assert!(rank_one_excess(&[0.0, 0.0], &[1.0, 1.0], 1.0, 10, 1).is_err());
    }

    #[test]
    fn ridge_gamma_values() {
        close(
            ridge_gamma(RidgeParams { p_bar: 1.0, lambda_bar: 1.0 }).unwrap(),
            (5.0f64.sqrt() - 1.0) / 2.0,
            1e-15,
        );
        // lambda -> 0 piecewise limit.
        for (p_bar, limit) in [(0.25, 0.0), (0.5, 0.0), (2.0, 0.5), (4.0, 0.75)] {
            let g = ridge_gamma(RidgeParams { p_bar, lambda_bar: 1e-12 }).unwrap();
            close(g, limit, 1e-9);
        }
        assert!(ridge_gamma(RidgeParams { p_bar: 0.0, lambda_bar: 1.0 }).is_err());
    }

    #[test]
    fn ridge_h2_underparam_limit() {
        for p_bar in [0.25, 0.5, 0.9] {
            let h2 = ridge_h2(RidgeParams { p_bar, lambda_bar: 1e-14 }, 1.0, 1.0).unwrap();
            close(h2, p_bar / (1.0 - p_bar), 1e-6);
        }
        assert!(ridge_h2(RidgeParams { p_bar: 2.0, lambda_bar: 0.1 }, 1.0, 1.0).is_err());
    }
}
