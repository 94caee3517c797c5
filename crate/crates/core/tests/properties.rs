//! Property tests over the analytic layer.

use proptest::prelude::*;
use relbudget_core::regimes::{classify, RegimeLabel, RegimeThresholds};
use relbudget_core::rewardstats::{
    anti_concentration, bilevel_reward_stats, c_rl, c_sft, continuous_reward_mean, sigma_rl,
    truncated_gamma_moments, Budget, GammaModel,
};
use relbudget_core::specfun::{log_gamma, reg_gamma_pair, reg_lower_gamma};
use relbudget_core::traces::{fit_gamma, FitMethod};
use relbudget_core::{simulate, SimConfig};

fn budget(h: f64) -> Budget {
    Budget::new(h).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn incomplete_gamma_halves_sum_to_one(s in 0.05f64..2000.0, z in 0.0f64..3000.0) {
        let (p, q) = reg_gamma_pair(s, z).unwrap();
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
        prop_assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_gamma_monotone_in_z(s in 0.1f64..500.0, z in 0.0f64..800.0, dz in 0.0f64..50.0) {
        let a = reg_lower_gamma(s, z).unwrap();
        let b = reg_lower_gamma(s, z + dz).unwrap();
        prop_assert!(b >= a - 1e-14);
    }

    #[test]
    fn incomplete_gamma_recurrence(s in 0.5f64..60.0, z in 0.1f64..80.0) {
        // P(s+1, z) = P(s, z) - z^s e^{-z} / Γ(s+1)
        let term = (s * z.ln() - z - log_gamma(s + 1.0).unwrap()).exp();
        let lhs = reg_lower_gamma(s + 1.0, z).unwrap();
        let rhs = reg_lower_gamma(s, z).unwrap() - term;
        prop_assert!((lhs - rhs).abs() < 1e-11, "{lhs} vs {rhs}");
    }

    #[test]
    fn log_gamma_functional_equation(s in 0.01f64..1e5) {
        let lhs = log_gamma(s + 1.0).unwrap();
        let rhs = log_gamma(s).unwrap() + s.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn convention_bridge(k in 0.3f64..40.0, p in 1e-4f64..1.0, h in 1.0f64..5000.0) {
        // E[max(0, H - T)] = E[(H + 1 - T) 1{T ≤ H}] - P[T ≤ H]
        let model = GammaModel::new(k, p).unwrap();
        let tm = truncated_gamma_moments(model, budget(h));
        prop_assume!(!tm.is_degenerate());
        let bi = bilevel_reward_stats(&tm, budget(h));
        let cont = continuous_reward_mean(model, budget(h));
        prop_assert!((cont - (bi.mean - tm.success_prob)).abs() <= 1e-9 * (h + 1.0));
    }

    #[test]
    fn continuous_stats_scale_with_budget(k in 0.3f64..40.0, xi in 0.05f64..20.0, h in 0.1f64..1e5) {
        let unit = sigma_rl(k, xi, budget(1.0)).unwrap();
        let scaled = sigma_rl(k, xi, budget(h)).unwrap();
        prop_assert!((scaled.mean - h * unit.mean).abs() <= 1e-10 * h);
        prop_assert!((scaled.std - h * unit.std).abs() <= 1e-10 * h);
    }

    #[test]
    fn bilevel_stats_depend_on_rate_only_through_xi(k in 0.5f64..20.0, xi in 0.1f64..10.0, p in 1e-4f64..1.0, c in 0.1f64..10.0) {
        // Doubling both p and H at fixed ξ leaves q and μ̃·p unchanged.
        let h = xi * k / p;
        let a = truncated_gamma_moments(GammaModel::new(k, p).unwrap(), budget(h));
        let b = truncated_gamma_moments(GammaModel::new(k, p * c).unwrap(), budget(h / c));
        prop_assert!((a.success_prob - b.success_prob).abs() < 1e-12);
        if let (Some(ma), Some(mb)) = (a.mean_given_success, b.mean_given_success) {
            prop_assert!((ma * p - mb * p * c).abs() <= 1e-9 * ma * p);
        }
    }

    #[test]
    fn anti_concentration_is_probability_nonincreasing_in_eps(
        k in 0.3f64..50.0, xi in 0.05f64..20.0, e1 in 0.0f64..4.0, e2 in 0.0f64..4.0,
    ) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = anti_concentration(k, xi, lo).unwrap();
        let b = anti_concentration(k, xi, hi).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn radicands_stay_valid(k in 0.3f64..60.0, xi in 0.05f64..20.0) {
        let crl = c_rl(k, xi).unwrap();
        prop_assert!(crl.is_finite() && crl >= 0.0);
        let csft = c_sft(k, xi).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&csft), "C_SFT={csft}");
    }

    #[test]
    fn ample_budget_limits(k in 1.0f64..20.0) {
        // ξ → ∞: reward std → H/(√K ξ) and the success-conditioned spread
        // matches the unconditional one.
        let xi = 200.0;
        prop_assert!((c_rl(k, xi).unwrap() / k.sqrt() - 1.0).abs() < 1e-3);
        prop_assert!((c_sft(k, xi).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn regimes_partition_and_order(a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let th = RegimeThresholds::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(classify(lo, &th) <= classify(hi, &th));
        let expected = if lo < 0.8 { RegimeLabel::Deficient } else if lo <= 2.0 { RegimeLabel::Balanced } else { RegimeLabel::Ample };
        prop_assert_eq!(classify(lo, &th), expected);
    }

    #[test]
    fn moment_fit_is_scale_equivariant(
        xs in prop::collection::vec(0.5f64..1e4, 3..60), c in 0.01f64..100.0,
    ) {
        let fit = match fit_gamma(&xs, FitMethod::MoM) {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let fs = fit_gamma(&scaled, FitMethod::MoM).unwrap();
        prop_assert!((fs.k - fit.k).abs() <= 1e-8 * fit.k);
        prop_assert!((fs.p * c - fit.p).abs() <= 1e-8 * fit.p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trajectories_increase_until_converged(k in 0.5f64..10.0, xi0 in 0.1f64..3.0, h in 10.0f64..1e4) {
        let t = simulate(&SimConfig::new(k, xi0, h, 25)).unwrap();
        prop_assert!(!t.states.is_empty());
        for w in t.states.windows(2) {
            prop_assert!(w[1].xi > w[0].xi);
            prop_assert!(w[1].j > w[0].j);
            prop_assert!(w[1].j < h);
        }
        for s in &t.states {
            prop_assert!(s.kappa > 0.0 && s.kappa.is_finite());
            prop_assert!((0.0..=1.0).contains(&s.c0));
        }
    }
}
