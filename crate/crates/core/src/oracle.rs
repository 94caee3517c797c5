//! Monte-Carlo ground truth for the closed forms.
//!
//! Every sampler is driven by a ChaCha8 stream selected by `(seed,
//! stream_id)`, so estimates are reproducible per algorithm and independent
//! across streams.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::rewardstats::{sigma_rl_for_model, Budget, Convention, GammaModel};
use crate::specfun::reg_lower_gamma;

/// Name of the generator recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64 + set_stream)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Same seed, another stream.
    pub fn with_stream(&self, stream_id: u64) -> Self {
        Self { stream_id, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// `(value - reference) / std_error`; zero when both agree exactly.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.value - reference;
        if diff == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY.copysign(diff)
        } else {
            diff / self.std_error
        }
    }

    /// True if `reference` lies within `k` standard errors.
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        self.z_score(reference).abs() <= k
    }

    fn proportion(hits: usize, n: usize) -> Self {
        let value = hits as f64 / n as f64;
        Self { value, std_error: (value * (1.0 - value) / n as f64).sqrt(), n_samples: n }
    }
}

/// Stateful `Gamma(shape, rate)` sampler over one stream.
///
/// Marsaglia–Tsang squeeze for shape > 1, inverse CDF for shape 1 and the
/// `U^{1/K}` boost from `shape + 1` for shape < 1.
pub struct GammaSampler {
    shape: f64,
    rate: f64,
    rng: ChaCha8Rng,
}

impl GammaSampler {
    pub fn new(model: GammaModel, rng: &RngSpec) -> Self {
        Self { shape: model.shape(), rate: model.rate(), rng: rng.rng() }
    }

    pub fn next_sample(&mut self) -> f64 {
        let unit = if self.shape == 1.0 {
            let u: f64 = self.rng.sample(Open01);
            -u.ln()
        } else if self.shape > 1.0 {
            marsaglia_tsang(self.shape, &mut self.rng)
        } else {
            let boosted = marsaglia_tsang(self.shape + 1.0, &mut self.rng);
            let u: f64 = self.rng.sample(Open01);
            boosted * u.powf(1.0 / self.shape)
        };
        unit / self.rate
    }
}

fn marsaglia_tsang<R: Rng>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// `n` i.i.d. `Gamma(k, rate p)` variates.
pub fn sample_gamma(k: f64, p: f64, rng: &RngSpec, n: usize) -> Result<Vec<f64>> {
    let mut sampler = GammaSampler::new(GammaModel::new(k, p)?, rng);
    Ok((0..n).map(|_| sampler.next_sample()).collect())
}

/// `n` negative-binomial trial counts: the number of Bernoulli(p) trials
/// needed for `k` successes (support `≥ k`).
pub fn sample_negbin(k: f64, p: f64, rng: &RngSpec, n: usize) -> Result<Vec<u64>> {
    if !(k.is_finite() && k >= 1.0 && k.fract() == 0.0) {
        return Err(Error::domain(format!("negative binomial K must be a positive integer, got {k}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("success probability must lie in (0, 1), got {p}")));
    }
    let k = k as u64;
    let log_fail = (-p).ln_1p();
    let mut rng = rng.rng();
    Ok((0..n)
        .map(|_| {
            (0..k)
                .map(|_| {
                    // Geometric trial count by inversion: ceil(ln U / ln(1-p)).
                    let u: f64 = rng.sample(Open01);
                    ((u.ln() / log_fail).ceil() as u64).max(1)
                })
                .sum()
        })
        .collect())
}

/// Reward of one rollout with time-to-solution `t`.
pub fn reward(t: f64, budget: Budget, convention: Convention) -> f64 {
    let h = budget.value();
    if t > h {
        return 0.0;
    }
    match convention {
        Convention::Continuous => h - t,
        Convention::BiLevel => h - t + 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRewardStats {
    pub mean: McEstimate,
    pub variance: McEstimate,
    /// Fraction of rollouts with `T ≤ H`.
    pub success_fraction: McEstimate,
}

/// Empirical reward moments over precomputed times-to-solution.
///
/// The variance estimate is the population variance; its standard error is
/// `√((m4 - m2²)/n)` with `m2`, `m4` the central moments.
pub fn reward_moments_from_times(times: &[f64], budget: Budget, convention: Convention) -> Result<McRewardStats> {
    if times.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let n = times.len();
    let nf = n as f64;
    let rewards: Vec<f64> = times.iter().map(|&t| reward(t, budget, convention)).collect();
    let successes = times.iter().filter(|&&t| t <= budget.value()).count();
    let mean = rewards.iter().sum::<f64>() / nf;
    let (m2, m4) = rewards.iter().fold((0.0, 0.0), |(a, b), &r| {
        let d2 = (r - mean) * (r - mean);
        (a + d2, b + d2 * d2)
    });
    let (m2, m4) = (m2 / nf, m4 / nf);
    Ok(McRewardStats {
        mean: McEstimate { value: mean, std_error: (m2 / nf).sqrt(), n_samples: n },
        variance: McEstimate { value: m2, std_error: ((m4 - m2 * m2).max(0.0) / nf).sqrt(), n_samples: n },
        success_fraction: McEstimate::proportion(successes, n),
    })
}

pub fn mc_reward_stats(
    model: GammaModel,
    budget: Budget,
    convention: Convention,
    rng: &RngSpec,
    n: usize,
) -> Result<McRewardStats> {
    let times = sample_gamma(model.shape(), model.rate(), rng, n)?;
    reward_moments_from_times(&times, budget, convention)
}

/// Fraction of times whose continuous reward reaches `threshold`.
pub fn exceedance_from_times(times: &[f64], budget: Budget, threshold: f64) -> Result<McEstimate> {
    if times.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let hits = times
        .iter()
        .filter(|&&t| reward(t, budget, Convention::Continuous) >= threshold)
        .count();
    Ok(McEstimate::proportion(hits, times.len()))
}

/// Estimates `P[R ≥ E R + √ε σ]` for the continuous reward, with the
/// threshold built from the closed-form mean and std.
pub fn mc_anti_concentration(model: GammaModel, budget: Budget, eps: f64, rng: &RngSpec, n: usize) -> Result<McEstimate> {
    ensure_non_negative("epsilon", eps)?;
    let stats = sigma_rl_for_model(model, budget)?;
    let threshold = stats.mean + stats.std * eps.sqrt();
    let times = sample_gamma(model.shape(), model.rate(), rng, n)?;
    exceedance_from_times(&times, budget, threshold)
}

/// Minimum sample count accepted by [`ks_distance`].
pub const KS_MIN_SAMPLES: usize = 100;

/// Kolmogorov–Smirnov statistic `sup |F_n(x) - F(x)|` against an analytic CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::domain(format!(
            "KS distance needs at least {KS_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// CDF of `Gamma(k, rate p)`, suitable for [`ks_distance`].
pub fn gamma_cdf(k: f64, p: f64) -> Result<impl Fn(f64) -> f64> {
    ensure_positive("shape K", k)?;
    ensure_positive("rate p", p)?;
    Ok(move |t: f64| if t <= 0.0 { 0.0 } else { reg_lower_gamma(k, p * t).unwrap_or(f64::NAN) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_se(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt(), v)
    }

    #[test]
    fn exponential_sample_mean() {
        let xs = sample_gamma(1.0, 2.0, &RngSpec::new(1, 0), 1_000_000).unwrap();
        let (m, se, _) = mean_and_se(&xs);
        assert!((m - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn gamma_moments_shape_five() {
        let xs = sample_gamma(5.0, 0.01, &RngSpec::new(2, 0), 1_000_000).unwrap();
        let (m, se, v) = mean_and_se(&xs);
        assert!((m - 500.0).abs() < 3.0 * se);
        let n = xs.len() as f64;
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let var_se = ((m4 - v * v) / n).sqrt();
        assert!((v - 50_000.0).abs() < 3.0 * var_se);
    }

    #[test]
    fn small_shape_uses_boost() {
        let xs = sample_gamma(0.4, 1.0, &RngSpec::new(3, 0), 400_000).unwrap();
        let (m, se, _) = mean_and_se(&xs);
        assert!((m - 0.4).abs() < 3.0 * se);
        assert!(xs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sampling_is_reproducible_per_stream() {
        let spec = RngSpec::new(42, 7);
        assert_eq!(sample_gamma(2.0, 1.0, &spec, 100).unwrap(), sample_gamma(2.0, 1.0, &spec, 100).unwrap());
        assert_ne!(
            sample_gamma(2.0, 1.0, &spec, 100).unwrap(),
            sample_gamma(2.0, 1.0, &spec.with_stream(8), 100).unwrap()
        );
    }

    #[test]
    fn negbin_support_and_mean() {
        let xs = sample_negbin(1.0, 0.5, &RngSpec::new(4, 0), 1_000_000).unwrap();
        let f: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let (m, se, _) = mean_and_se(&f);
        assert!((m - 2.0).abs() < 3.0 * se);
        let xs = sample_negbin(3.0, 0.2, &RngSpec::new(4, 1), 10_000).unwrap();
        assert!(xs.iter().all(|&x| x >= 3));
        assert!(sample_negbin(2.5, 0.2, &RngSpec::new(4, 1), 10).is_err());
        assert!(sample_negbin(2.0, 1.0, &RngSpec::new(4, 1), 10).is_err());
    }

    #[test]
    fn negbin_approaches_gamma_for_small_p() {
        let rng = RngSpec::new(5, 0);
        let ks = |p: f64| {
            let xs: Vec<f64> = sample_negbin(3.0, p, &rng, 100_000).unwrap().into_iter().map(|x| x as f64).collect();
            ks_distance(&xs, gamma_cdf(3.0, p).unwrap()).unwrap()
        };
        assert!(ks(0.01) < ks(0.1));
    }

    #[test]
    fn continuous_reward_mean_unit_budget() {
        let model = GammaModel::new(1.0, 1.0).unwrap();
        let b = Budget::new(1.0).unwrap();
        let est = mc_reward_stats(model, b, Convention::Continuous, &RngSpec::new(6, 0), 1_000_000).unwrap();
        assert!(est.mean.agrees_with((-1f64).exp(), 3.0));
    }

    #[test]
    fn vanishing_budget_gives_zero_reward() {
        let model = GammaModel::new(3.0, 1.0).unwrap();
        let b = Budget::new(1e-300).unwrap();
        let est = mc_reward_stats(model, b, Convention::Continuous, &RngSpec::new(6, 1), 10_000).unwrap();
        assert_eq!(est.mean.value, 0.0);
    }

    #[test]
    fn conventions_differ_by_success_fraction() {
        let b = Budget::new(4.0).unwrap();
        let times = sample_gamma(2.0, 0.5, &RngSpec::new(7, 0), 200_000).unwrap();
        let c = reward_moments_from_times(&times, b, Convention::Continuous).unwrap();
        let l = reward_moments_from_times(&times, b, Convention::BiLevel).unwrap();
        let diff = l.mean.value - c.mean.value;
        assert!((diff - c.success_fraction.value).abs() < 1e-9);
    }

    #[test]
    fn anti_concentration_matches_closed_form() {
        let (k, xi, eps) = (2.0, 1.5, 0.5);
        let b = Budget::new(10.0).unwrap();
        let model = GammaModel::new(k, k * xi / 10.0).unwrap();
        let est = mc_anti_concentration(model, b, eps, &RngSpec::new(8, 0), 1_000_000).unwrap();
        let closed = crate::rewardstats::anti_concentration(k, xi, eps).unwrap();
        assert!(est.agrees_with(closed, 3.0), "{} vs {closed}", est.value);
        let none = mc_anti_concentration(model, b, 1e6, &RngSpec::new(8, 1), 10_000).unwrap();
        assert_eq!(none.value, 0.0);
    }

    #[test]
    fn ks_distance_behaviour() {
        let xs = sample_gamma(2.0, 1.0, &RngSpec::new(9, 0), 1_000_000).unwrap();
        assert!(ks_distance(&xs, gamma_cdf(2.0, 1.0).unwrap()).unwrap() < 0.002);
        let constant = vec![1.0; 500];
        assert!(ks_distance(&constant, gamma_cdf(2.0, 1.0).unwrap()).unwrap() > 0.5);
        assert!(ks_distance(&[], |_| 0.5).is_err());
    }

    #[test]
    fn std_error_scales_with_root_n() {
        let model = GammaModel::new(2.0, 1.0).unwrap();
        let b = Budget::new(2.0).unwrap();
        let a = mc_reward_stats(model, b, Convention::Continuous, &RngSpec::new(10, 0), 200_000).unwrap();
        let c = mc_reward_stats(model, b, Convention::Continuous, &RngSpec::new(10, 1), 400_000).unwrap();
        let ratio = a.mean.std_error / c.mean.std_error;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1);
    }

    #[test]
    fn disjoint_streams_agree_statistically() {
        let model = GammaModel::new(5.0, 2.0).unwrap();
        let b = Budget::new(3.0).unwrap();
        let a = mc_reward_stats(model, b, Convention::BiLevel, &RngSpec::new(11, 0), 300_000).unwrap();
        let c = mc_reward_stats(model, b, Convention::BiLevel, &RngSpec::new(11, 1), 300_000).unwrap();
        let combined = (a.mean.std_error.powi(2) + c.mean.std_error.powi(2)).sqrt();
        assert!((a.mean.value - c.mean.value).abs() < 3.0 * combined);
        assert_ne!(a.mean.value, c.mean.value);
    }
}
