//! Relative-budget analysis of reinforcement learning with verifiable
//! rewards under a gamma time-to-solution model.
//!
//! A problem's time-to-solution `T` (tokens until the first correct answer)
//! is modelled as `Gamma(K, p)`; a rollout budget `H` then induces the
//! relative budget `ξ = pH/K = H/E[T]`. Every reward statistic here is a
//! function of `(K, ξ)` scaled by `H`.
//!
//! Modules, bottom-up:
//!
//! - [`specfun`]: log-gamma, digamma and the regularized incomplete gamma pair.
//! - [`rewardstats`]: closed-form reward moments, `C_RL`, anti-concentration, `C_SFT`.
//! - [`regimes`]: optimal relative budget and regime-dependent sample complexity.
//! - [`dynamics`]: idealized online-RL iteration with trust-region schedule.
//! - [`oracle`]: Monte-Carlo samplers and estimators used as ground truth.
//! - [`traces`]: rollout-log ingestion, gamma fitting and budget sweeps.

pub mod dynamics;
mod error;
pub mod fmt;
pub mod oracle;
pub mod regimes;
pub mod rewardstats;
pub mod specfun;
pub mod traces;

pub use dynamics::{simulate, OnlineState, SimConfig, Trajectory};
pub use error::{Error, ErrorKind, Result};
pub use oracle::{McEstimate, RngSpec};
pub use regimes::{optimal_xi, OptimalBudget, RegimeLabel, RegimeThresholds};
pub use rewardstats::{Budget, Convention, GammaModel, RelativeBudget, RewardStats, TruncatedMoments};
pub use traces::{ProblemStats, SweepConfig, SweepResult, TraceDataset, TraceRecord};
