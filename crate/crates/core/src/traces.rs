//! Rollout-log ingestion, gamma fitting and relative-budget sweeps.
//!
//! Input is line-delimited JSON, one record per line:
//!
//! ```text
//! {"problem_id":"gsm8k-17","tokens":312,"correct":true}
//! ```
//!
//! `tokens` is the time-to-solution for correct traces and the generated
//! length otherwise. Unknown fields are ignored and blank lines skipped.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::fmt::format_sig;
use crate::oracle::{GammaSampler, RngSpec};
use crate::rewardstats::GammaModel;
use crate::specfun::{digamma, trigamma};

/// Loading fails when more than this fraction of non-blank lines is malformed.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

pub const SWEEP_CSV_HEADER: &str = "xi,normalized_variance,anti_concentration,n_problems";
const CSV_DIGITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub problem_id: String,
    pub tokens: u64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceDataset {
    pub records: Vec<TraceRecord>,
    pub skipped: Vec<SkippedLine>,
}

impl TraceDataset {
    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        Self { records, skipped: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records grouped by problem, in `problem_id` order.
    pub fn by_problem(&self) -> BTreeMap<&str, Vec<&TraceRecord>> {
        let mut map: BTreeMap<&str, Vec<&TraceRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.problem_id.as_str()).or_default().push(r);
        }
        map
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parses line-delimited records, skipping malformed lines.
pub fn parse_traces<R: BufRead>(reader: R) -> Result<TraceDataset> {
    let mut dataset = TraceDataset::default();
    let mut non_blank = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        non_blank += 1;
        match serde_json::from_str::<TraceRecord>(trimmed) {
            Ok(rec) if rec.tokens == 0 => dataset.skipped.push(SkippedLine {
                line: idx + 1,
                reason: "tokens must be at least 1".into(),
            }),
            Ok(rec) => dataset.records.push(rec),
            Err(e) => dataset.skipped.push(SkippedLine { line: idx + 1, reason: e.to_string() }),
        }
    }
    let bad = dataset.skipped.len();
    if bad as f64 > MAX_MALFORMED_FRACTION * non_blank as f64 {
        return Err(Error::Data(format!("{bad} of {non_blank} lines are malformed")));
    }
    Ok(dataset)
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<TraceDataset> {
    parse_traces(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    #[serde(rename = "mom")]
    MoM,
    #[serde(rename = "mle")]
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub k: f64,
    pub p: f64,
    /// Method that produced `(k, p)`; `MoM` after an MLE fallback.
    pub method: FitMethod,
    /// MLE did not converge and the moment estimate was used.
    pub fell_back: bool,
}

/// Sample mean and unbiased variance.
fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Fits `Gamma(k, rate p)` by moments or maximum likelihood.
///
/// MLE solves `ln k - ψ(k) = ln(mean) - mean(ln x)` by Newton's method
/// from the Choi–Wette starting point and falls back to moments if the
/// iteration fails.
pub fn fit_gamma(samples: &[f64], method: FitMethod) -> Result<GammaFit> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {}", samples.len())));
    }
    for &x in samples {
        ensure_positive("sample", x)?;
    }
    let (mean, var) = mean_var(samples);
    if var.is_nan() || var <= 0.0 {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let mom = GammaFit { k: mean * mean / var, p: mean / var, method: FitMethod::MoM, fell_back: false };
    match method {
        FitMethod::MoM => Ok(mom),
        FitMethod::Mle => {
            let mean_log = samples.iter().map(|x| x.ln()).sum::<f64>() / samples.len() as f64;
            let s = mean.ln() - mean_log;
            match mle_shape(s) {
                Some(k) => Ok(GammaFit { k, p: k / mean, method: FitMethod::Mle, fell_back: false }),
                None => Ok(GammaFit { fell_back: true, ..mom }),
            }
        }
    }
}

fn mle_shape(s: f64) -> Option<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return None;
    }
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let g = k.ln() - digamma(k).ok()? - s;
        let dg = 1.0 / k - trigamma(k).ok()?;
        let next = k - g / dg;
        let next = if next > 0.0 { next } else { 0.5 * k };
        if (next - k).abs() <= 1e-12 * k {
            return Some(next);
        }
        k = next;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemStats {
    pub problem_id: String,
    pub n_traces: usize,
    pub n_correct: usize,
    /// Mean tokens over correct traces; needs at least two.
    pub mu_hat: Option<f64>,
    pub var_hat: Option<f64>,
    pub k_hat: Option<f64>,
    pub p_hat: Option<f64>,
    pub fit_method: FitMethod,
}

/// Per-problem summary and gamma fit over correct traces only.
pub fn problem_stats(dataset: &TraceDataset, method: FitMethod) -> Vec<ProblemStats> {
    dataset
        .by_problem()
        .into_iter()
        .map(|(id, recs)| {
            let correct: Vec<f64> = recs.iter().filter(|r| r.correct).map(|r| r.tokens as f64).collect();
            let (mu_hat, var_hat) = if correct.len() >= 2 {
                let (m, v) = mean_var(&correct);
                (Some(m), Some(v))
            } else {
                (None, None)
            };
            let fit = fit_gamma(&correct, method).ok();
            ProblemStats {
                problem_id: id.to_string(),
                n_traces: recs.len(),
                n_correct: correct.len(),
                mu_hat,
                var_hat,
                k_hat: fit.map(|f| f.k),
                p_hat: fit.map(|f| f.p),
                fit_method: fit.map_or(method, |f| f.method),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub xi_grid: Vec<f64>,
    pub eps: f64,
    pub min_correct: usize,
}

impl Default for SweepConfig {
    /// ξ ∈ {0.1, 0.2, ..., 4.0}, ε = 0.5, at least 5 correct traces.
    fn default() -> Self {
        Self { xi_grid: linspace(0.1, 4.0, 40), eps: 0.5, min_correct: 5 }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub xi_grid: Vec<f64>,
    pub normalized_variance: Vec<f64>,
    pub anti_concentration: Vec<f64>,
    pub eps: f64,
    pub n_problems_used: usize,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for ((xi, v), c) in self.xi_grid.iter().zip(&self.normalized_variance).zip(&self.anti_concentration) {
            writeln!(
                out,
                "{},{},{},{}",
                format_sig(*xi, CSV_DIGITS),
                format_sig(*v, CSV_DIGITS),
                format_sig(*c, CSV_DIGITS),
                self.n_problems_used
            )?;
        }
        Ok(())
    }
}

/// Un-normalized reward curves of a single problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemCurve {
    /// Population variance of the bi-level reward at each grid point.
    pub variance: Vec<f64>,
    /// Fraction of traces with `R ≥ R̄ + σ̂√ε`; zero where `σ̂ = 0`.
    pub anti_concentration: Vec<f64>,
}

/// Empirical bi-level reward curves for one problem with difficulty `mu`.
///
/// At each `ξ` the budget is `H = ξ μ`; a trace earns `H - T + 1` if it is
/// correct and `T ≤ H`, and zero otherwise.
pub fn problem_curve(traces: &[&TraceRecord], mu: f64, xi_grid: &[f64], eps: f64) -> ProblemCurve {
    let n = traces.len() as f64;
    let root_eps = eps.sqrt();
    let mut variance = Vec::with_capacity(xi_grid.len());
    let mut anti = Vec::with_capacity(xi_grid.len());
    let mut rewards = vec![0.0; traces.len()];
    for &xi in xi_grid {
        let h = xi * mu;
        for (r, t) in rewards.iter_mut().zip(traces) {
            let tokens = t.tokens as f64;
            *r = if t.correct && tokens <= h { h - tokens + 1.0 } else { 0.0 };
        }
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        variance.push(var);
        anti.push(if sd > 0.0 {
            let threshold = mean + sd * root_eps;
            rewards.iter().filter(|&&r| r >= threshold).count() as f64 / n
        } else {
            0.0
        });
    }
    ProblemCurve { variance, anti_concentration: anti }
}

/// Sweeps the relative budget over every problem with at least
/// `min_correct` correct traces and averages the curves.
///
/// Each problem's variance curve is taken on the unit reward scale,
/// `Var(R/H)`, and divided by its own maximum over the grid; the
/// equal-weight average is then rescaled so its peak is 1. The raw
/// `Var(R)` grows with `H` and would always peak at the top of the grid.
pub fn sweep_budget(dataset: &TraceDataset, cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.xi_grid.is_empty() {
        return Err(Error::domain("xi grid is empty"));
    }
    for &xi in &cfg.xi_grid {
        ensure_positive("grid xi", xi)?;
    }
    ensure_non_negative("epsilon", cfg.eps)?;

    let groups = dataset.by_problem();
    let n_groups = groups.len();
    let eligible: Vec<(Vec<&TraceRecord>, f64)> = groups
        .into_values()
        .filter_map(|recs| {
            let correct: Vec<f64> = recs.iter().filter(|r| r.correct).map(|r| r.tokens as f64).collect();
            (!correct.is_empty() && correct.len() >= cfg.min_correct)
                .then(|| (recs, correct.iter().sum::<f64>() / correct.len() as f64))
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::Data(format!(
            "none of {n_groups} problems has at least {} correct traces",
            cfg.min_correct.max(1)
        )));
    }

    let curves: Vec<ProblemCurve> = eligible
        .par_iter()
        .map(|(recs, mu)| problem_curve(recs, *mu, &cfg.xi_grid, cfg.eps))
        .collect();

    let len = cfg.xi_grid.len();
    let used = curves.len() as f64;
    let mut variance = vec![0.0; len];
    let mut anti = vec![0.0; len];
    for (c, (_, mu)) in curves.iter().zip(&eligible) {
        // Variance of R/H, the reward on the unit scale the theory optimizes.
        let scaled: Vec<f64> = c.variance.iter().zip(&cfg.xi_grid).map(|(v, xi)| v / (xi * mu).powi(2)).collect();
        let peak = scaled.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            for (acc, v) in variance.iter_mut().zip(&scaled) {
                *acc += v / peak;
            }
        }
        for (acc, a) in anti.iter_mut().zip(&c.anti_concentration) {
            *acc += a;
        }
    }
    let peak = variance.iter().cloned().fold(0.0, f64::max);
    for v in &mut variance {
        *v = if peak > 0.0 { *v / peak } else { 0.0 };
    }
    for a in &mut anti {
        *a /= used;
    }
    Ok(SweepResult {
        xi_grid: cfg.xi_grid.clone(),
        normalized_variance: variance,
        anti_concentration: anti,
        eps: cfg.eps,
        n_problems_used: curves.len(),
    })
}

/// Synthetic rollouts with `T ~ Gamma(K, p)` rounded up to whole tokens.
///
/// With `truncation = Some(h)`, traces with `T > h` are marked incorrect and
/// censored at `h` tokens; otherwise every trace is correct.
pub fn generate_synthetic(
    model: GammaModel,
    n_problems: usize,
    traces_per_problem: usize,
    truncation: Option<f64>,
    rng: &RngSpec,
) -> Result<TraceDataset> {
    if n_problems == 0 || traces_per_problem == 0 {
        return Err(Error::domain("problem and trace counts must be at least 1"));
    }
    if let Some(h) = truncation {
        ensure_positive("truncation budget", h)?;
    }
    let width = n_problems.to_string().len().max(4);
    let mut sampler = GammaSampler::new(model, rng);
    let mut records = Vec::with_capacity(n_problems * traces_per_problem);
    for p in 0..n_problems {
        let problem_id = format!("p{p:0width$}");
        for _ in 0..traces_per_problem {
            let t = sampler.next_sample();
            let (tokens, correct) = match truncation {
                Some(h) if t > h => (h, false),
                _ => (t, true),
            };
            records.push(TraceRecord {
                problem_id: problem_id.clone(),
                tokens: (tokens.ceil() as u64).max(1),
                correct,
            });
        }
    }
    Ok(TraceDataset::from_records(records))
}
