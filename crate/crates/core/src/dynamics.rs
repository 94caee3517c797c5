//! Idealized online-RL iteration under the gamma model.
//!
//! Each iteration applies the guaranteed improvement floor
//! `J' = J + ½ √κ σ` with trust region `κ = min(σ/J, (H-J)/(2σ))²`, then
//! recovers the relative budget `ξ'` that produces `J'`. The simulator is
//! deterministic and reports, but does not enforce, the rollout count each
//! step would need.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::fmt::format_sig;
use crate::rewardstats::{expected_return, sigma_rl, Budget};
use crate::specfun::reg_lower_gamma;

/// Relative tolerance of the `ξ` bisection.
const BISECTION_RTOL: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 200;

/// Header of the trajectory CSV.
pub const TRAJECTORY_CSV_HEADER: &str = "i,xi,J,sigma,kappa,c0,n_required";
const CSV_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: f64,
    pub xi0: f64,
    pub horizon: f64,
    pub iterations: usize,
    pub delta: f64,
    /// `ln |R|`, the log-size of the reward class.
    pub log_reward_class: f64,
    pub universal_c: f64,
    /// Include the union-bound factor `m` in the log term of the rollout count.
    pub include_m_in_log: bool,
}

impl SimConfig {
    /// Config with `δ = 0.05`, `ln|R| = 1`, `C = 1`.
    pub fn new(k: f64, xi0: f64, horizon: f64, iterations: usize) -> Self {
        Self {
            k,
            xi0,
            horizon,
            iterations,
            delta: 0.05,
            log_reward_class: 1.0,
            universal_c: 1.0,
            include_m_in_log: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("shape K", self.k)?;
        ensure_positive("xi0", self.xi0)?;
        ensure_positive("budget H", self.horizon)?;
        ensure_positive("delta", self.delta)?;
        if self.delta > 1.0 {
            return Err(Error::domain(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        ensure_non_negative("log reward-class size", self.log_reward_class)?;
        ensure_positive("universal constant C", self.universal_c)?;
        Ok(())
    }

    /// `log(m |R| / δ)` or `log(|R| / δ)`.
    fn log_term(&self) -> f64 {
        let m = if self.include_m_in_log { (self.iterations.max(1) as f64).ln() } else { 0.0 };
        m + self.log_reward_class - self.delta.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineState {
    pub i: usize,
    pub xi: f64,
    pub j: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub c0: f64,
    pub n_required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: SimConfig,
    pub states: Vec<OnlineState>,
    /// Set when the return reached the budget before `iterations` steps.
    pub converged_at: Option<usize>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        for s in &self.states {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.i,
                format_sig(s.xi, CSV_DIGITS),
                format_sig(s.j, CSV_DIGITS),
                format_sig(s.sigma, CSV_DIGITS),
                format_sig(s.kappa, CSV_DIGITS),
                format_sig(s.c0, CSV_DIGITS),
                format_sig(s.n_required, CSV_DIGITS),
            )?;
        }
        Ok(())
    }
}

/// Trust-region radius `κ = min(σ/J, (H - J)/(2σ))²`.
///
/// `J ≥ H` or `σ = 0` means the policy has converged and yields
/// [`Error::Degenerate`].
pub fn trust_region_kappa(j: f64, sigma: f64, h: f64) -> Result<f64> {
    ensure_positive("budget H", h)?;
    ensure_positive("expected return J", j)?;
    ensure_non_negative("reward std", sigma)?;
    if j >= h || sigma == 0.0 {
        return Err(Error::Degenerate(format!("converged policy: J={j}, sigma={sigma}, H={h}")));
    }
    let radius = (sigma / j).min((h - j) / (2.0 * sigma));
    Ok(radius * radius)
}

/// `c0 = γ(K, (ξK/H)(H - J - σ²/J))`, clamped at zero.
pub fn anti_concentration_online(k: f64, xi: f64, j: f64, sigma: f64, h: f64) -> Result<f64> {
    ensure_positive("shape K", k)?;
    ensure_positive("relative budget xi", xi)?;
    ensure_positive("expected return J", j)?;
    ensure_positive("budget H", h)?;
    let arg = xi * k / h * (h - j - sigma * sigma / j);
    reg_lower_gamma(k, arg.max(0.0))
}

/// `n = 2 C H log(m|R|/δ) / (√κ c0 σ)`; infinite when the denominator vanishes.
pub fn required_rollouts(cfg: &SimConfig, state: &OnlineState) -> f64 {
    let denom = state.kappa.sqrt() * state.c0 * state.sigma;
    if denom > 0.0 {
        2.0 * cfg.universal_c * cfg.horizon * cfg.log_term() / denom
    } else {
        f64::INFINITY
    }
}

/// Builds the full record at relative budget `xi`.
fn state_at(cfg: &SimConfig, i: usize, xi: f64) -> Result<OnlineState> {
    let budget = Budget::new(cfg.horizon)?;
    let stats = sigma_rl(cfg.k, xi, budget)?;
    let (j, sigma) = (stats.mean, stats.std);
    let kappa = trust_region_kappa(j, sigma, cfg.horizon)?;
    let c0 = anti_concentration_online(cfg.k, xi, j, sigma, cfg.horizon)?;
    let mut state = OnlineState { i, xi, j, sigma, kappa, c0, n_required: 0.0 };
    state.n_required = required_rollouts(cfg, &state);
    Ok(state)
}

pub fn initial_state(cfg: &SimConfig) -> Result<OnlineState> {
    cfg.validate()?;
    state_at(cfg, 0, cfg.xi0)
}

/// Result of one improvement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Advanced(OnlineState),
    /// The target return reached `H` to within relative `1e-12`.
    Converged,
}

/// Solves `J(ξ) = target` for `ξ > xi_lo`, where `J(xi_lo) < target`.
fn invert_return(k: f64, budget: Budget, xi_lo: f64, target: f64) -> Result<f64> {
    let ret = |xi: f64| expected_return(k, xi, budget);
    let mut lo = xi_lo;
    let mut hi = 4.0 * xi_lo;
    let mut doublings = 0;
    while ret(hi)? <= target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(Error::numeric(format!("could not bracket ξ for J={target}")));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= BISECTION_RTOL * hi {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if ret(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::numeric(format!("ξ bisection did not converge for J={target}")))
}

/// One iteration: improve `J` by `½√κσ` and recompute every statistic at the
/// new relative budget.
pub fn step(cfg: &SimConfig, state: &OnlineState) -> Result<StepOutcome> {
    let h = cfg.horizon;
    let target = state.j + 0.5 * state.kappa.sqrt() * state.sigma;
    if target >= h * (1.0 - 1e-12) {
        return Ok(StepOutcome::Converged);
    }
    let xi = invert_return(cfg.k, Budget::new(h)?, state.xi, target)?;
    match state_at(cfg, state.i + 1, xi) {
        Ok(next) => Ok(StepOutcome::Advanced(next)),
        Err(Error::Degenerate(_)) => Ok(StepOutcome::Converged),
        Err(e) => Err(e),
    }
}

/// Runs `cfg.iterations` steps from `ξ0`, stopping early on convergence.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let mut state = initial_state(cfg)?;
    let mut states = Vec::with_capacity(cfg.iterations + 1);
    states.push(state);
    let mut converged_at = None;
    for _ in 0..cfg.iterations {
        match step(cfg, &state)? {
            StepOutcome::Advanced(next) => {
                state = next;
                states.push(next);
            }
            StepOutcome::Converged => {
                converged_at = Some(state.i);
                break;
            }
        }
    }
    Ok(Trajectory { config: cfg.clone(), states, converged_at })
}
