//! Property tests for the algebraic invariants: randomized laws, ratios and
//! thresholds instead of hand-picked fixtures.

use proptest::prelude::*;

use prune_dc_core::dc::{build_mixture, mixture_tail, solve_xi, DcRegime};
use prune_dc_core::mu::{MuAtom, MuDistribution};
use prune_dc_core::pruning::{risk_dense, risk_hessian, risk_magnitude, threshold_magnitude};
use prune_dc_core::report::{ReportRow, RiskReport};
use prune_dc_core::special::{lower_partial_moments, upper_partial_moments};

fn law_strategy(max_atoms: usize) -> impl Strategy<Value = MuDistribution> {
    prop::collection::vec((0.05f64..20.0, -5.0f64..5.0, 0.05f64..1.0), 1..=max_atoms).prop_map(
        |raw| {
            let total: f64 = raw.iter().map(|(_, _, w)| w).sum();
            // Force exact normalization so the weight-sum invariant holds.
            let mut atoms: Vec<MuAtom> = raw
                .iter()
                .map(|&(lambda, b, w)| MuAtom { lambda, b, weight: w / total })
                .collect();
            let correction: f64 = 1.0 - atoms.iter().map(|a| a.weight).sum::<f64>();
            atoms[0].weight += correction;
            MuDistribution::from_atoms(atoms).expect("normalized law")
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expectation_is_linear(law in law_strategy(5), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = |l: f64, x: f64| l * x;
        let g = |l: f64, x: f64| l + x * x;
        let combo = law.expect(|l, x| a * f(l, x) + b * g(l, x)).unwrap();
        let parts = a * law.expect(f).unwrap() + b * law.expect(g).unwrap();
        prop_assert!((combo - parts).abs() <= 1e-12 * (1.0 + combo.abs().max(parts.abs())));
    }

    #[test]
    fn xi_scale_covariance(law in law_strategy(4), kappa in 1.05f64..15.0, c in 0.05f64..40.0) {
        let xi = solve_xi(&law, kappa).unwrap();
        let scaled = MuDistribution::from_atoms(
            law.atoms().iter().map(|a| MuAtom { lambda: c * a.lambda, ..*a }).collect(),
        ).unwrap();
        let xi_c = solve_xi(&scaled, kappa).unwrap();
        prop_assert!((xi_c * c - xi).abs() <= 1e-8 * xi.max(1e-6));
    }

    #[test]
    fn gamma_denominator_stays_positive(
        law in law_strategy(4),
        kappa in 1.05f64..15.0,
    ) {
        let xi = solve_xi(&law, kappa).unwrap();
        let second = law.expect(|l, _| {
            let d = 1.0 + 1.0 / (xi * l);
            1.0 / (d * d)
        }).unwrap();
        prop_assert!(1.0 - kappa * second > 0.0);
    }

    #[test]
    fn magnitude_risk_interpolates_the_dense_limit(
        law in law_strategy(4),
        kappa in 1.1f64..10.0,
        sigma2 in 0.05f64..3.0,
    ) {
        let sol = build_mixture(&law, kappa, sigma2).unwrap();
        let dense = risk_dense(&sol);
        let at_one = risk_magnitude(&sol, 1.0).unwrap();
        prop_assert!((at_one - dense).abs() <= 1e-8 * dense.max(1.0));
        let all_pruned = sigma2 + law.weighted_signal_energy();
        let near_zero = risk_magnitude(&sol, 1e-12).unwrap();
        prop_assert!((near_zero - all_pruned).abs() <= 1e-6 * all_pruned.max(1.0));
    }

    #[test]
    fn threshold_attains_the_target_tail(
        law in law_strategy(4),
        kappa in 1.1f64..10.0,
        sigma2 in 0.05f64..3.0,
        alpha in 0.01f64..0.99,
    ) {
        let sol = build_mixture(&law, kappa, sigma2).unwrap();
        let t = threshold_magnitude(&sol, alpha).unwrap();
        // All stds are positive here, so the tail is continuous at t*.
        prop_assert!((mixture_tail(&sol, t) - alpha).abs() <= 1e-9);
    }

    #[test]
    fn hessian_reduces_to_magnitude_for_constant_spectrum(
        bs in prop::collection::vec(-4.0f64..4.0, 1..4),
        c in 0.1f64..10.0,
        kappa in 1.1f64..8.0,
        sigma2 in 0.05f64..2.0,
        alpha in 0.02f64..1.0,
    ) {
        let weight = 1.0 / bs.len() as f64;
        let atoms = bs.iter().map(|&b| MuAtom { lambda: c, b, weight }).collect();
        let law = MuDistribution::from_atoms(atoms).unwrap();
        let sol = build_mixture(&law, kappa, sigma2).unwrap();
        let h = risk_hessian(&sol, alpha).unwrap();
        let m = risk_magnitude(&sol, alpha).unwrap();
        prop_assert!((h - m).abs() <= 1e-8 * m.max(1.0));
    }

    #[test]
    fn underparam_regime_never_solves_a_fixed_point(
        law in law_strategy(4),
        kappa in 0.05f64..0.95,
        sigma2 in 0.0f64..3.0,
    ) {
        let sol = prune_dc_core::dc::build_mixture_underparam(&law, kappa, sigma2).unwrap();
        prop_assert!(matches!(sol.regime, DcRegime::Underparameterized));
        let dense = risk_dense(&sol);
        prop_assert!((dense - sigma2 / (1.0 - kappa)).abs() <= 1e-10 * (1.0 + dense));
    }

    #[test]
    fn partial_moments_split_the_full_moments(
        mean in -5.0f64..5.0,
        std in 0.05f64..5.0,
        at in -8.0f64..8.0,
    ) {
        let (pu, m1u, m2u) = upper_partial_moments(mean, std, at);
        let (pl, m1l, m2l) = lower_partial_moments(mean, std, at);
        prop_assert!((pu + pl - 1.0).abs() <= 1e-13);
        prop_assert!((m1u + m1l - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        let second = mean * mean + std * std;
        prop_assert!((m2u + m2l - second).abs() <= 1e-12 * (1.0 + second));
    }

    #[test]
    fn csv_round_trip_is_lossless(
        rows in prop::collection::vec(
            (
                -1e6f64..1e6,
                "[a-z_]{1,12}(:s=[0-9]{1,3})?",
                prop::option::of(-1e12f64..1e12),
                prop::option::of(0.0f64..1e6),
                prop::option::of(0.0f64..1e3),
                0u64..100_000,
            ),
            0..8,
        )
    ) {
        let report = RiskReport::from_rows(
            rows.into_iter()
                .map(|(grid, method, theory, mc, se, trials)| ReportRow {
                    grid,
                    method,
                    risk_theory: theory,
                    risk_mc_mean: mc,
                    risk_mc_stderr: se,
                    trials,
                })
                .collect(),
        );
        let parsed = RiskReport::from_csv(&report.to_csv()).unwrap();
        prop_assert_eq!(parsed, report);
    }
}
