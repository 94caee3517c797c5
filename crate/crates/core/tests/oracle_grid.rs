//! Monte-Carlo cross-checks of the closed forms.

use relbudget_core::oracle::{
    exceedance_from_times, gamma_cdf, ks_distance, reward_moments_from_times, sample_gamma, sample_negbin,
};
use relbudget_core::rewardstats::{
    anti_concentration, bilevel_reward_stats, sigma_rl, truncated_gamma_moments, Budget, Convention, GammaModel,
};
use relbudget_core::RngSpec;

const SAMPLES: usize = 200_000;
const H: f64 = 100.0;

#[test]
fn continuous_reward_grid_within_three_standard_errors() {
    let budget = Budget::new(H).unwrap();
    let mut failures = Vec::new();
    for (ki, k) in [1.0, 2.0, 5.0].into_iter().enumerate() {
        for (xi_i, xi) in [0.25, 0.5, 1.0, 1.5, 2.0, 4.0].into_iter().enumerate() {
            let p = k * xi / H;
            let rng = RngSpec::new(2024, (ki * 10 + xi_i) as u64);
            let times = sample_gamma(k, p, &rng, SAMPLES).unwrap();
            let mc = reward_moments_from_times(&times, budget, Convention::Continuous).unwrap();
            let exact = sigma_rl(k, xi, budget).unwrap();
            let eps: f64 = 0.5;
            let ac = exceedance_from_times(&times, budget, exact.mean + exact.std * eps.sqrt()).unwrap();
            let ac_exact = anti_concentration(k, xi, eps).unwrap();
            for (name, est, truth) in [
                ("mean", mc.mean, exact.mean),
                ("variance", mc.variance, exact.variance),
                ("anti_concentration", ac, ac_exact),
            ] {
                if !est.agrees_with(truth, 3.0) {
                    failures.push(format!("K={k} ξ={xi} {name}: {} vs {truth} (z={})", est.value, est.z_score(truth)));
                }
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn bilevel_reward_grid_within_three_standard_errors() {
    let budget = Budget::new(H).unwrap();
    for k in [1.0, 3.0] {
        for xi in [0.5, 1.0, 2.0] {
            let model = GammaModel::new(k, k * xi / H).unwrap();
            let times = sample_gamma(k, model.rate(), &RngSpec::new(99, 0), SAMPLES).unwrap();
            let mc = reward_moments_from_times(&times, budget, Convention::BiLevel).unwrap();
            let tm = truncated_gamma_moments(model, budget);
            let exact = bilevel_reward_stats(&tm, budget);
            assert!(mc.mean.agrees_with(exact.mean, 3.0), "K={k} ξ={xi} mean");
            assert!(mc.variance.agrees_with(exact.variance, 3.0), "K={k} ξ={xi} variance");
            assert!(mc.success_fraction.agrees_with(tm.success_prob, 3.0), "K={k} ξ={xi} q");
        }
    }
}

#[test]
fn negative_binomial_approaches_gamma() {
    let n = 100_000;
    let ks = |p: f64| {
        let draws = sample_negbin(3.0, p, &RngSpec::new(5, 0), n).unwrap();
        let xs: Vec<f64> = draws.iter().map(|&d| d as f64).collect();
        ks_distance(&xs, gamma_cdf(3.0, p).unwrap()).unwrap()
    };
    let (fine, coarse) = (ks(0.01), ks(0.1));
    assert!(fine < coarse, "KS at p=0.01: {fine}, at p=0.1: {coarse}");
}

#[test]
fn gamma_sampler_passes_ks() {
    for k in [0.4, 1.0, 2.5, 30.0] {
        let xs = sample_gamma(k, 0.2, &RngSpec::new(8, 1), 50_000).unwrap();
        // 1% critical value of the one-sample KS test is about 1.63/√n.
        let d = ks_distance(&xs, gamma_cdf(k, 0.2).unwrap()).unwrap();
        assert!(d < 1.63 / (50_000f64).sqrt(), "K={k}: D={d}");
    }
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let a = sample_gamma(2.0, 1.0, &RngSpec::new(1, 0), 64).unwrap();
    let b = sample_gamma(2.0, 1.0, &RngSpec::new(1, 0), 64).unwrap();
    let c = sample_gamma(2.0, 1.0, &RngSpec::new(1, 1), 64).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
