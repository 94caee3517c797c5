//! Closed-form statistics of the shaped reward under the gamma
//! time-to-solution model.
//!
//! Two reward conventions are supported:
//!
//! - [`Convention::BiLevel`]: `R = H - T + 1` if `T ≤ H`, else `0`.
//! - [`Convention::Continuous`]: `R = max(0, H - T)`.
//!
//! They differ by exactly `1{T ≤ H}`, so their means differ by the success
//! probability `q = P[T ≤ H]`. The `(K, ξ)`-parameterized coefficients
//! (`C_RL`, `ψ`, `C_SFT`) all use the continuous convention.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::specfun::reg_lower_gamma;

/// Success probabilities below this are treated as "never succeeds".
pub const DEGENERATE_SUCCESS_PROB: f64 = 1e-300;

/// Radicands in `[-RADICAND_SLACK, 0)` are rounding noise and clamp to zero;
/// anything more negative is reported as a numeric error.
pub const RADICAND_SLACK: f64 = 1e-9;

/// Time-to-solution model `T ~ Gamma(shape K, rate p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaModel {
    shape: f64,
    rate: f64,
}

impl GammaModel {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self {
            shape: ensure_positive("shape K", shape)?,
            rate: ensure_positive("rate p", rate)?,
        })
    }

    /// The model whose relative budget under `budget` is `xi`: `p = Kξ/H`.
    pub fn from_relative(shape: f64, xi: RelativeBudget, budget: Budget) -> Result<Self> {
        Self::new(shape, shape * xi.value() / budget.value())
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Expected time to solution `K/p`.
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn relative_budget(&self, budget: Budget) -> RelativeBudget {
        RelativeBudget(budget.value() * self.rate / self.shape)
    }

    /// `P[T ≤ t]`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        reg_lower_gamma(self.shape, self.rate * t).expect("validated model")
    }
}

/// Token budget `H`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Budget(f64);

impl Budget {
    pub fn new(h: f64) -> Result<Self> {
        ensure_positive("budget H", h).map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Budget relative to task difficulty, `ξ = H / E[T] = pH/K`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RelativeBudget(f64);

impl RelativeBudget {
    pub fn new(xi: f64) -> Result<Self> {
        ensure_positive("relative budget xi", xi).map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Continuous,
    BiLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
    pub convention: Convention,
}

impl RewardStats {
    fn new(mean: f64, variance: f64, convention: Convention) -> Self {
        let variance = variance.max(0.0);
        Self { mean, variance, std: variance.sqrt(), convention }
    }

    fn zero(convention: Convention) -> Self {
        Self::new(0.0, 0.0, convention)
    }
}

/// Moments of `T` conditioned on success within the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMoments {
    /// `q = P[T ≤ H]`.
    pub success_prob: f64,
    /// `E[T | T ≤ H]`; `None` when success is numerically impossible.
    pub mean_given_success: Option<f64>,
    /// `Var[T | T ≤ H]`; `None` when success is numerically impossible.
    pub var_given_success: Option<f64>,
}

impl TruncatedMoments {
    pub fn is_degenerate(&self) -> bool {
        self.mean_given_success.is_none()
    }
}

fn clamped_sqrt(radicand: f64, what: &str) -> Result<f64> {
    if radicand >= 0.0 {
        Ok(radicand.sqrt())
    } else if radicand >= -RADICAND_SLACK {
        Ok(0.0)
    } else {
        Err(Error::numeric(format!("{what} radicand is negative: {radicand:e}")))
    }
}

/// `γ(K, z), γ(K+1, z), γ(K+2, z)` for `z = Kξ`.
struct GammaLadder {
    g0: f64,
    g1: f64,
    g2: f64,
}

impl GammaLadder {
    fn at(k: f64, z: f64) -> Result<Self> {
        Ok(Self {
            g0: reg_lower_gamma(k, z)?,
            g1: reg_lower_gamma(k + 1.0, z)?,
            g2: reg_lower_gamma(k + 2.0, z)?,
        })
    }
}

/// Success probability and success-conditioned moments of `T`.
///
/// `E[T^j 1{T ≤ H}] = Γ(K+j)/(Γ(K) p^j) · γ(K+j, pH)`.
pub fn truncated_gamma_moments(model: GammaModel, budget: Budget) -> TruncatedMoments {
    let (k, p) = (model.shape(), model.rate());
    let z = p * budget.value();
    let ladder = GammaLadder::at(k, z).expect("validated model and budget");
    if ladder.g0 < DEGENERATE_SUCCESS_PROB {
        return TruncatedMoments {
            success_prob: ladder.g0,
            mean_given_success: None,
            var_given_success: None,
        };
    }
    let r1 = ladder.g1 / ladder.g0;
    let r2 = ladder.g2 / ladder.g0;
    let mean = k / p * r1;
    let second = k * (k + 1.0) / (p * p) * r2;
    TruncatedMoments {
        success_prob: ladder.g0,
        mean_given_success: Some(mean),
        var_given_success: Some((second - mean * mean).max(0.0)),
    }
}

/// Mean and variance of the bi-level reward `(H + 1 - T) 1{T ≤ H}`.
///
/// A degenerate `tm` (no success mass) yields the all-zero reward.
pub fn bilevel_reward_stats(tm: &TruncatedMoments, budget: Budget) -> RewardStats {
    let (Some(mu), Some(var)) = (tm.mean_given_success, tm.var_given_success) else {
        return RewardStats::zero(Convention::BiLevel);
    };
    let q = tm.success_prob;
    let gap = budget.value() + 1.0 - mu;
    RewardStats::new(q * gap, q * var + q * (1.0 - q) * gap * gap, Convention::BiLevel)
}

/// `E[max(0, H - T)] = H γ(K, pH) - (K/p) γ(K+1, pH)`.
pub fn continuous_reward_mean(model: GammaModel, budget: Budget) -> f64 {
    let h = budget.value();
    let z = model.rate() * h;
    let g0 = reg_lower_gamma(model.shape(), z).expect("validated model");
    let g1 = reg_lower_gamma(model.shape() + 1.0, z).expect("validated model");
    (h * g0 - model.mean() * g1).max(0.0)
}

/// Dimensionless reward-spread coefficient with `std = C_RL · H / (Kξ)`.
pub fn c_rl(k: f64, xi: f64) -> Result<f64> {
    ensure_positive("shape K", k)?;
    ensure_positive("relative budget xi", xi)?;
    let z = k * xi;
    let g = GammaLadder::at(k, z)?;
    let first = z * g.g0 - k * g.g1;
    let radicand = z * z * g.g0 - 2.0 * k * z * g.g1 + k * (k + 1.0) * g.g2 - first * first;
    clamped_sqrt(radicand, "C_RL^2")
}

/// `J = H (γ(K, Kξ) - γ(K+1, Kξ)/ξ)`, the expected continuous reward.
pub fn expected_return(k: f64, xi: f64, budget: Budget) -> Result<f64> {
    ensure_positive("shape K", k)?;
    ensure_positive("relative budget xi", xi)?;
    let z = k * xi;
    let g0 = reg_lower_gamma(k, z)?;
    let g1 = reg_lower_gamma(k + 1.0, z)?;
    Ok((budget.value() * (g0 - g1 / xi)).max(0.0))
}

/// Continuous-convention reward statistics at relative budget `xi`.
pub fn sigma_rl(k: f64, xi: f64, budget: Budget) -> Result<RewardStats> {
    let c = c_rl(k, xi)?;
    let mean = expected_return(k, xi, budget)?;
    let std = c * budget.value() / (k * xi);
    Ok(RewardStats { mean, variance: std * std, std, convention: Convention::Continuous })
}

/// Same as [`sigma_rl`] but parameterized by the model.
pub fn sigma_rl_for_model(model: GammaModel, budget: Budget) -> Result<RewardStats> {
    sigma_rl(model.shape(), model.relative_budget(budget).value(), budget)
}

/// Anti-concentration threshold `ψ = 1 - J/H - √ε σ/H`, unclipped.
pub fn psi(k: f64, xi: f64, eps: f64) -> Result<f64> {
    ensure_positive("shape K", k)?;
    ensure_positive("relative budget xi", xi)?;
    ensure_non_negative("epsilon", eps)?;
    let z = k * xi;
    let g0 = reg_lower_gamma(k, z)?;
    let g1 = reg_lower_gamma(k + 1.0, z)?;
    Ok(1.0 - g0 + g1 / xi - c_rl(k, xi)? / z * eps.sqrt())
}

/// `P[R ≥ E R + √ε σ] = γ(K, Kξ · clip(ψ, 0, 1))`.
pub fn anti_concentration(k: f64, xi: f64, eps: f64) -> Result<f64> {
    let psi = psi(k, xi, eps)?.clamp(0.0, 1.0);
    reg_lower_gamma(k, k * xi * psi)
}

/// Ratio of success-conditioned to unconditional std of `T`, in `[0, 1]`.
pub fn c_sft(k: f64, xi: f64) -> Result<f64> {
    ensure_positive("shape K", k)?;
    ensure_positive("relative budget xi", xi)?;
    let g = GammaLadder::at(k, k * xi)?;
    if g.g0 < DEGENERATE_SUCCESS_PROB {
        return Err(Error::Degenerate(format!(
            "no successful traces: γ(K, Kξ) = {:e} at K={k}, ξ={xi}",
            g.g0
        )));
    }
    let r1 = g.g1 / g.g0;
    let r2 = g.g2 / g.g0;
    clamped_sqrt((k + 1.0) * r2 - k * r1 * r1, "C_SFT^2")
}

/// Success-conditioned std of `T`: `C_SFT · H / (√K ξ)`.
pub fn sigma_sft(k: f64, xi: f64, budget: Budget) -> Result<f64> {
    Ok(c_sft(k, xi)? * budget.value() / (k.sqrt() * xi))
}
