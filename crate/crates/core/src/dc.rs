//! Fixed points of the asymptotic distributional characterization (DC) and
//! the Gaussian mixture law of the rescaled min-norm solution.
//!
//! Overparameterized regime (kappa = p/n > 1): `xi` is the unique positive
//! root of `E[1/(1 + (xi Lambda)^{-1})] = 1/kappa` and
//!
//! ```text
//! gamma = (sigma^2 + E[B^2 Lambda / (1 + xi Lambda)^2])
//!         / (1 - kappa E[1/(1 + (xi Lambda)^{-1})^2])
//! ```
//!
//! per atom the rescaled solution coordinate is Gaussian with
//! mean `(1 - 1/(1 + xi Lambda)) B` and
//! std `sqrt(kappa gamma) Lambda^{-1/2} / (1 + (xi Lambda)^{-1})`.
//!
//! Underparameterized regime (kappa < 1): the solution is unbiased with
//! per-atom std `sigma Lambda^{-1/2} / sqrt(kappa^{-1} - 1)`.

use crate::mu::{Accumulator, MuDistribution};
use crate::special::two_sided_tail;
use crate::{Error, Result};

/// Which side of the interpolation threshold a solution lives on.
///
/// `kappa = 1` is excluded everywhere: both regimes blow up there and callers
/// must branch around the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcRegime {
    /// kappa > 1, with the solved fixed-point parameters.
    Overparameterized { xi: f64, gamma: f64 },
    /// kappa < 1; the solution is unbiased and no fixed point is needed.
    Underparameterized,
}

/// Per-atom Gaussian component of the mixture law of the rescaled solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub lambda: f64,
    pub b: f64,
    pub weight: f64,
    /// Gaussian mean of the rescaled solution coordinate.
    pub mean: f64,
    /// Gaussian std; zero only in degenerate noiseless cases.
    pub std: f64,
}

/// A solved DC: the regime parameters plus one mixture component per atom.
///
/// Immutable; share across threads at will.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSolution {
    pub kappa: f64,
    pub sigma2: f64,
    pub regime: DcRegime,
    pub components: Vec<MixtureComponent>,
}

/// `F(xi) = E[1/(1 + (xi Lambda)^{-1})]`, strictly increasing from 0 to 1.
fn kept_fraction(mu: &MuDistribution, xi: f64) -> f64 {
    let mut acc = Accumulator::default();
    for atom in mu.atoms() {
        acc.add(atom.weight / (1.0 + 1.0 / (xi * atom.lambda)));
    }
    acc.value()
}

/// Solves `E[1/(1 + (xi Lambda)^{-1})] = 1/kappa` for the unique `xi > 0`.
///
/// Bisection on log(xi), starting from [1e-12, 1e12] with geometric bracket
/// expansion; monotonicity of F makes this unconditionally convergent.
pub fn solve_xi(mu: &MuDistribution, kappa: f64) -> Result<f64> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidKappa { kappa, expected: "kappa > 1" });
    }
    let target = 1.0 / kappa;
    let mut lo = 1e-12f64;
    let mut hi = 1e12f64;
    while kept_fraction(mu, lo) > target {
        lo /= 1e3;
        if lo < 1e-30 {
            return Err(Error::BracketExhausted);
        }
    }
    while kept_fraction(mu, hi) < target {
        hi *= 1e3;
        if hi > 1e30 {
            return Err(Error::BracketExhausted);
        }
    }
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (llo + lhi);
        if kept_fraction(mu, mid.exp()) < target {
            llo = mid;
        } else {
            lhi = mid;
        }
        if (lhi - llo).abs() < f64::EPSILON {
            break;
        }
    }
    let xi = (0.5 * (llo + lhi)).exp();
    let residual = (kept_fraction(mu, xi) - target).abs();
    if residual > 1e-12 * target {
        return Err(Error::NumericalFailure(format!(
            "xi fixed point residual {residual:.3e} exceeds 1e-12 relative"
        )));
    }
    Ok(xi)
}

/// The `gamma` parameter for a solved `xi`; errors if the denominator is not
/// strictly positive (impossible for a valid `xi`, so it flags bad inputs).
pub fn solve_gamma(mu: &MuDistribution, kappa: f64, sigma2: f64, xi: f64) -> Result<f64> {
    if !(kappa > 1.0) {
        return Err(Error::InvalidKappa { kappa, expected: "kappa > 1" });
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma2 = {sigma2} < 0")));
    }
    let bias_energy = mu.expect(|l, b| {
        let d = 1.0 + xi * l;
        b * b * l / (d * d)
    })?;
    let second = mu.expect(|l, _| {
        let d = 1.0 + 1.0 / (xi * l);
        1.0 / (d * d)
    })?;
    let denom = 1.0 - kappa * second;
    if denom <= 0.0 {
        return Err(Error::GammaDenominator(denom));
    }
    Ok((sigma2 + bias_energy) / denom)
}

impl DcSolution {
    /// Saddle-point accessor `u* = xi sqrt(gamma)` (overparameterized only).
    pub fn u_star(&self) -> Option<f64> {
        match self.regime {
            DcRegime::Overparameterized { xi, gamma } => Some(xi * gamma.sqrt()),
            DcRegime::Underparameterized => None,
        }
    }

    /// Saddle-point accessor `tau* = sqrt(gamma)` (overparameterized only).
    pub fn tau_star(&self) -> Option<f64> {
        match self.regime {
            DcRegime::Overparameterized { gamma, .. } => Some(gamma.sqrt()),
            DcRegime::Underparameterized => None,
        }
    }
}

/// Builds the overparameterized mixture law for `kappa > 1`.
pub fn build_mixture(mu: &MuDistribution, kappa: f64, sigma2: f64) -> Result<DcSolution> {
    let xi = solve_xi(mu, kappa)?;
    let gamma = solve_gamma(mu, kappa, sigma2, xi)?;
    let scale = (kappa * gamma).sqrt();
    let components = mu
        .atoms()
        .iter()
        .map(|atom| {
            let shrink = 1.0 / (1.0 + xi * atom.lambda);
            MixtureComponent {
                lambda: atom.lambda,
                b: atom.b,
                weight: atom.weight,
                mean: (1.0 - shrink) * atom.b,
                std: scale / (atom.lambda.sqrt() * (1.0 + 1.0 / (xi * atom.lambda))),
            }
        })
        .collect();
    Ok(DcSolution {
        kappa,
        sigma2,
        regime: DcRegime::Overparameterized { xi, gamma },
        components,
    })
}

/// Builds the underparameterized mixture law for `0 < kappa < 1`: unbiased
/// per-atom Gaussians with std `sigma Lambda^{-1/2} / sqrt(kappa^{-1} - 1)`.
pub fn build_mixture_underparam(
    mu: &MuDistribution,
    kappa: f64,
    sigma2: f64,
) -> Result<DcSolution> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidKappa { kappa, expected: "0 < kappa < 1" });
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma2 = {sigma2} < 0")));
    }
    let sigma = sigma2.sqrt();
    let spread = 1.0 / (1.0 / kappa - 1.0).sqrt();
    let components = mu
        .atoms()
        .iter()
        .map(|atom| MixtureComponent {
            lambda: atom.lambda,
            b: atom.b,
            weight: atom.weight,
            mean: atom.b,
            std: sigma * spread / atom.lambda.sqrt(),
        })
        .collect();
    Ok(DcSolution {
        kappa,
        sigma2,
        regime: DcRegime::Underparameterized,
        components,
    })
}

/// `P(|X| >= t)` for the mixture law; equals 1 at `t = 0` and is strictly
/// decreasing in `t` when every component has positive std.
pub fn mixture_tail(sol: &DcSolution, t: f64) -> f64 {
    debug_assert!(t >= 0.0 && t.is_finite());
    let mut acc = Accumulator::default();
    for c in &sol.components {
        acc.add(c.weight * two_sided_tail(c.mean, c.std, t));
    }
    acc.value().clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mu::MuAtom;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn constant_law(lambda: f64, b: f64) -> MuDistribution {
        MuDistribution::from_atoms(vec![MuAtom { lambda, b, weight: 1.0 }]).unwrap()
    }

    #[test]
    fn xi_closed_form_for_constant_lambda() {
        // Lambda = 1: xi/(1 + xi) = 1/kappa so xi = 1/(kappa - 1).
        let mu = constant_law(1.0, 0.0);
        close(solve_xi(&mu, 2.0).unwrap(), 1.0, 1e-12);
        close(solve_xi(&mu, 4.0 / 3.0).unwrap(), 3.0, 1e-11);
    }

    #[test]
    fn xi_two_atom_example() {
        let mu = MuDistribution::from_atoms(vec![
            MuAtom { lambda: 1.0, b: 0.0, weight: 0.5 },
            MuAtom { lambda: 4.0, b: 0.0, weight: 0.5 },
        ])
        .unwrap();
        // xi = 0.5: 0.5 * (1/(1+2) + 1/(1+1/2)) = 0.5 * (1/3 + 2/3) = 1/2.
        close(solve_xi(&mu, 2.0).unwrap(), 0.5, 1e-12);
    }

    #[test]
    fn xi_rejects_bad_kappa() {
        let mu = constant_law(1.0, 0.0);
        assert!(solve_xi(&mu, 1.0).is_err());
        assert!(solve_xi(&mu, 0.5).is_err());
    }

    #[test]
    fn xi_bisection_matches_residual_oracle() {
        // Independent check: brute scan confirms the returned xi brackets the
        // sign change of F(xi) - 1/kappa.
        let mu = MuDistribution::from_atoms(vec![
            MuAtom { lambda: 0.3, b: 0.0, weight: 0.25 },
            MuAtom { lambda: 2.0, b: 0.0, weight: 0.75 },
        ])
        .unwrap();
        for kappa in [1.2, 2.0, 5.0, 20.0] {
            let xi = solve_xi(&mu, kappa).unwrap();
            assert!(kept_fraction(&mu, xi * 0.999) < 1.0 / kappa);
            assert!(kept_fraction(&mu, xi * 1.001) > 1.0 / kappa);
        }
    }

    #[test]
    fn kept_fraction_is_monotone_around_solution() {
        let mu = MuDistribution::from_atoms(vec![
            MuAtom { lambda: 0.5, b: 1.0, weight: 0.4 },
            MuAtom { lambda: 3.0, b: -1.0, weight: 0.6 },
        ])
        .unwrap();
        let xi = solve_xi(&mu, 3.0).unwrap();
        let f = |x: f64| kept_fraction(&mu, x);
        assert!(f(xi / 2.0) < f(xi) && f(xi) < f(2.0 * xi));
        assert!(f(1e-9) > 0.0 && f(1e9) < 1.0);
    }

    #[test]
    fn xi_is_scale_covariant() {
        // Lambda -> c Lambda maps xi -> xi / c (the equation sees xi*Lambda).
        let base = MuDistribution::from_atoms(vec![
            MuAtom { lambda: 0.7, b: 0.0, weight: 0.5 },
            MuAtom { lambda: 2.2, b: 0.0, weight: 0.5 },
        ])
        .unwrap();
        let xi = solve_xi(&base, 2.5).unwrap();
        for c in [0.1, 0.5, 4.0, 100.0] {
            let scaled = MuDistribution::from_atoms(
                base.atoms()
                    .iter()
                    .map(|a| MuAtom { lambda: c * a.lambda, ..*a })
                    .collect(),
            )
            .unwrap();
            let xi_c = solve_xi(&scaled, 2.5).unwrap();
            close(xi_c * c, xi, 1e-9 * xi.max(1.0));
        }
    }

    #[test]
    fn gamma_hand_examples() {
        let mu = constant_law(1.0, 1.0);
        let xi = solve_xi(&mu, 2.0).unwrap();
        // (1 + 1/4) / (1 - 2/4) = 2.5
        close(solve_gamma(&mu, 2.0, 1.0, xi).unwrap(), 2.5, 1e-11);

        let mu0 = constant_law(1.0, 0.0);
        let xi0 = solve_xi(&mu0, 2.0).unwrap();
        close(solve_gamma(&mu0, 2.0, 0.0, xi0).unwrap(), 0.0, 1e-12);
        close(solve_gamma(&mu0, 2.0, 1.0, xi0).unwrap(), 2.0, 1e-11);
    }

    #[test]
    fn gamma_denominator_positive_for_solved_xi() {
        // For constant Lambda the denominator equals 1 - 1/kappa exactly.
        let mu = constant_law(2.0, 1.0);
        for kappa in [1.1, 2.0, 10.0] {
            let xi = solve_xi(&mu, kappa).unwrap();
            let second = mu
                .expect(|l, _| {
                    let d = 1.0 + 1.0 / (xi * l);
                    1.0 / (d * d)
                })
                .unwrap();
            close(1.0 - kappa * second, 1.0 - 1.0 / kappa, 1e-10);
        }
    }

    #[test]
    fn mixture_component_example() {
        // Lambda = B = 1, kappa = 2, sigma2 = 1: xi = 1, gamma = 2.5,
        // mean = 1/2, std = sqrt(5)/2.
        let mu = constant_law(1.0, 1.0);
        let sol = build_mixture(&mu, 2.0, 1.0).unwrap();
        let c = &sol.components[0];
        close(c.mean, 0.5, 1e-11);
        close(c.std, 5.0f64.sqrt() / 2.0, 1e-11);
        close(sol.u_star().unwrap(), 2.5f64.sqrt(), 1e-11);
        close(sol.tau_star().unwrap(), 2.5f64.sqrt(), 1e-11);
    }

    #[test]
    fn mixture_means_vanish_for_zero_signal() {
        let mu = MuDistribution::from_model(&[0.5, 1.0, 2.0], &[0.0, 0.0, 0.0]).unwrap();
        let sol = build_mixture(&mu, 3.0, 1.0).unwrap();
        for c in &sol.components {
            assert_eq!(c.mean, 0.0);
            assert!(c.std > 0.0);
        }
        // Noiseless and signal-free: the mixture degenerates to zero.
        let sol0 = build_mixture(&mu, 3.0, 0.0).unwrap();
        for c in &sol0.components {
            assert_eq!(c.mean, 0.0);
            close(c.std, 0.0, 1e-15);
        }
    }

    #[test]
    fn underparam_components() {
        let mu = constant_law(1.0, 0.3);
        let sol = build_mixture_underparam(&mu, 0.5, 1.0).unwrap();
        let c = &sol.components[0];
        close(c.mean, 0.3, 0.0);
        close(c.std, 1.0, 1e-14);
        assert!(build_mixture_underparam(&mu, 1.0, 1.0).is_err());
        assert!(build_mixture_underparam(&mu, 1.5, 1.0).is_err());

        let s0 = build_mixture_underparam(&mu, 0.5, 0.0).unwrap();
        assert_eq!(s0.components[0].std, 0.0);
    }

    #[test]
    fn tail_basics() {
        let mu = constant_law(1.0, 0.0);
        let sol = build_mixture(&mu, 2.0, 1.0).unwrap();
        assert_eq!(mixture_tail(&sol, 0.0), 1.0);
        assert!(mixture_tail(&sol, 1e9) < 1e-300);
        // Strictly decreasing on a grid.
        let mut last = 1.0;
        for i in 1..40 {
            let t = i as f64 * 0.25;
            let v = mixture_tail(&sol, t);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn tail_standard_normal_quantile() {
        // A solution with a single unit Gaussian component.
        let sol = DcSolution {
            kappa: 2.0,
            sigma2: 1.0,
            regime: DcRegime::Overparameterized { xi: 1.0, gamma: 1.0 },
            components: vec![MixtureComponent {
                lambda: 1.0,
                b: 0.0,
                weight: 1.0,
                mean: 0.0,
                std: 1.0,
            }],
        };
        close(mixture_tail(&sol, 1.959963984540054), 0.05, 1e-12);
    }
}
