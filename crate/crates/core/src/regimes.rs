//! Optimal relative budget and regime classification.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::rewardstats::c_rl;
use crate::specfun::reg_lower_gamma;

const SCAN_LO: f64 = 0.05;
const SCAN_HI: f64 = 20.0;
const SCAN_POINTS: usize = 400;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    Deficient,
    Balanced,
    Ample,
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegimeLabel::Deficient => "deficient",
            RegimeLabel::Balanced => "balanced",
            RegimeLabel::Ample => "ample",
        })
    }
}

/// Boundaries of the balanced regime, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub xi_lo: f64,
    pub xi_hi: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { xi_lo: 0.8, xi_hi: 2.0 }
    }
}

impl RegimeThresholds {
    pub fn new(xi_lo: f64, xi_hi: f64) -> Result<Self> {
        ensure_positive("xi_lo", xi_lo)?;
        ensure_positive("xi_hi", xi_hi)?;
        if xi_lo >= xi_hi {
            return Err(Error::domain(format!("xi_lo ({xi_lo}) must be below xi_hi ({xi_hi})")));
        }
        Ok(Self { xi_lo, xi_hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalBudget {
    pub xi_star: f64,
    /// Reward std at `xi_star`, in units of `H`.
    pub sigma_at_star: f64,
    pub iterations_used: usize,
}

/// Reward std in units of `H`: `C_RL(K, ξ) / (Kξ)`.
fn scaled_sigma(k: f64, xi: f64) -> Result<f64> {
    Ok(c_rl(k, xi)? / (k * xi))
}

/// Relative budget maximizing the reward standard deviation for shape `k`.
///
/// A log-spaced scan over `[0.05, 20]` brackets the peak; the scan must be
/// unimodal (rise then fall) or the call fails. Golden-section search then
/// narrows the bracket to width `tol`.
pub fn optimal_xi(k: f64, tol: f64) -> Result<OptimalBudget> {
    ensure_positive("shape K", k)?;
    ensure_positive("tolerance", tol)?;

    let ratio = (SCAN_HI / SCAN_LO).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| SCAN_LO * ratio.powi(i as i32)).collect();
    let values = grid.iter().map(|&xi| scaled_sigma(k, xi)).collect::<Result<Vec<_>>>()?;

    let peak = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    if peak == 0 || peak == SCAN_POINTS - 1 {
        return Err(Error::numeric(format!(
            "reward std for K={k} peaks at the scan boundary ξ={}",
            grid[peak]
        )));
    }
    let rises = values[..=peak].windows(2).all(|w| w[1] >= w[0]);
    let falls = values[peak..].windows(2).all(|w| w[1] <= w[0]);
    if !(rises && falls) {
        return Err(Error::numeric(format!("reward std for K={k} is not unimodal on the scan grid")));
    }

    let (mut a, mut b) = (grid[peak - 1], grid[peak + 1]);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = scaled_sigma(k, c)?;
    let mut fd = scaled_sigma(k, d)?;
    let mut iterations = 0;
    while b - a > tol {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = scaled_sigma(k, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = scaled_sigma(k, d)?;
        }
    }
    let xi_star = 0.5 * (a + b);
    let sigma_at_star = scaled_sigma(k, xi_star)?;
    if sigma_at_star < values[peak - 1] || sigma_at_star < values[peak + 1] {
        return Err(Error::numeric(format!(
            "golden-section result ξ={xi_star} is below its bracket endpoints"
        )));
    }
    Ok(OptimalBudget { xi_star, sigma_at_star, iterations_used: iterations })
}

pub fn classify(xi: f64, th: &RegimeThresholds) -> RegimeLabel {
    if xi < th.xi_lo {
        RegimeLabel::Deficient
    } else if xi <= th.xi_hi {
        RegimeLabel::Balanced
    } else {
        RegimeLabel::Ample
    }
}

/// Order-of-magnitude rollout count for one improvement step, with unit
/// constants and no log factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexity {
    pub label: RegimeLabel,
    /// `f64::INFINITY` when the success probability underflows.
    pub n_estimate: f64,
    /// Always true: hidden constants and log factors are not modelled.
    pub asymptotic: bool,
}

/// Regime-dependent sample complexity with tail `f(ξ) = γ(K, Kξ)`:
/// deficient `κ^{-1/2} f^{-3/2}`, balanced `κ^{-1/2}`, ample `ξ κ^{-1/2}`.
pub fn regime_sample_complexity(
    k: f64,
    xi: f64,
    kappa: f64,
    th: &RegimeThresholds,
) -> Result<SampleComplexity> {
    ensure_positive("shape K", k)?;
    ensure_positive("relative budget xi", xi)?;
    ensure_positive("kappa", kappa)?;
    let label = classify(xi, th);
    let base = kappa.sqrt().recip();
    let n_estimate = match label {
        RegimeLabel::Deficient => {
            let f = reg_lower_gamma(k, k * xi)?;
            if f < 1e-300 {
                f64::INFINITY
            } else {
                base * f.powf(-1.5)
            }
        }
        RegimeLabel::Balanced => base,
        RegimeLabel::Ample => xi * base,
    };
    Ok(SampleComplexity { label, n_estimate, asymptotic: true })
}
