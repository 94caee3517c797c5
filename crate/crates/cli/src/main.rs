//! `relbudget`: closed forms, simulations, Monte-Carlo oracles and trace
//! analysis for the relative-budget model.
//!
//! Scalar reports go to standard output as JSON, sequences as CSV.
//! Exit codes: 0 success, 2 argument or domain error, 3 data or numeric error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use relbudget_core::oracle::{
    exceedance_from_times, gamma_cdf, ks_distance, reward_moments_from_times, sample_gamma, sample_negbin,
    RNG_ALGORITHM,
};
use relbudget_core::regimes::classify;
use relbudget_core::rewardstats::{
    anti_concentration, c_rl, c_sft, expected_return, psi, sigma_rl, sigma_sft, Budget, Convention, GammaModel,
};
use relbudget_core::specfun::reg_lower_gamma;
use relbudget_core::traces::{generate_synthetic, linspace, load_traces, sweep_budget};
use relbudget_core::{optimal_xi, simulate, Error, ErrorKind, McEstimate, RegimeThresholds, RngSpec, SimConfig, SweepConfig};

const MIN_ORACLE_SAMPLES: usize = 1000;
const Z_PASS: f64 = 3.0;

#[derive(Parser)]
#[command(name = "relbudget", version, about = "Relative-budget statistics for verifiable-reward RL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form reward statistics at one (K, ξ).
    Stats {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        xi: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
    },
    /// Relative budget maximizing the reward standard deviation.
    OptimalXi {
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Idealized online-RL trajectory as CSV.
    Simulate {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        xi0: f64,
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        iters: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Natural log of the reward-class size.
        #[arg(long, default_value_t = 1.0)]
        log_reward_class: f64,
        #[arg(long, default_value_t = 1.0)]
        const_c: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo estimates against the closed forms.
    Oracle {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Dist::Gamma)]
        dist: Dist,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Budget sweep over a line-delimited JSON rollout log.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// Grid as `lo:hi:n`.
        #[arg(long, default_value = "0.1:4.0:40", value_parser = parse_grid)]
        xi_grid: Grid,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 5)]
        min_correct: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic gamma rollout log.
    Gen {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        problems: usize,
        #[arg(long)]
        traces: usize,
        #[arg(long)]
        seed: u64,
        /// Mark traces with T > H as incorrect, censored at H tokens.
        #[arg(long)]
        truncate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dist {
    Gamma,
    Negbin,
}

#[derive(Clone, Debug)]
struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(format!("expected lo:hi:n, got {s:?}"));
    };
    let lo: f64 = lo.parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad upper bound: {e}"))?;
    let n: usize = n.parse().map_err(|e| format!("bad point count: {e}"))?;
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(format!("grid needs 0 < lo <= hi and n >= 1, got {s:?}"));
    }
    Ok(Grid { lo, hi, n })
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Domain | ErrorKind::Io => 2,
            ErrorKind::Numeric | ErrorKind::Data => 3,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Stats { k, xi, eps, budget } => print_json(&stats_report(k, xi, eps, budget)?),
        Command::OptimalXi { k, tol } => {
            let opt = optimal_xi(k, tol)?;
            print_json(&json!({
                "k": k,
                "tol": tol,
                "xi_star": opt.xi_star,
                "sigma_at_star": opt.sigma_at_star,
                "iterations_used": opt.iterations_used,
            }))
        }
        Command::Simulate { k, xi0, budget, iters, delta, log_reward_class, const_c, out } => {
            let mut cfg = SimConfig::new(k, xi0, budget, iters);
            cfg.delta = delta;
            cfg.log_reward_class = log_reward_class;
            cfg.universal_c = const_c;
            let trajectory = simulate(&cfg)?;
            if let Some(i) = trajectory.converged_at {
                eprintln!("converged after {i} iterations");
            }
            with_output(out.as_deref(), |w| trajectory.write_csv(w))
        }
        Command::Oracle { k, p, budget, samples, dist, eps, seed, stream } => {
            print_json(&oracle_report(k, p, budget, samples, dist, eps, RngSpec::new(seed, stream))?)
        }
        Command::Analyze { input, xi_grid, eps, min_correct, out } => {
            let dataset = load_traces(&input)?;
            for s in &dataset.skipped {
                eprintln!("skipped line {}: {}", s.line, s.reason);
            }
            let cfg = SweepConfig { xi_grid: linspace(xi_grid.lo, xi_grid.hi, xi_grid.n), eps, min_correct };
            let result = sweep_budget(&dataset, &cfg)?;
            eprintln!(
                "{} records, {} skipped lines, {} of {} problems used",
                dataset.len(),
                dataset.skipped.len(),
                result.n_problems_used,
                dataset.by_problem().len()
            );
            with_output(out.as_deref(), |w| result.write_csv(w))
        }
        Command::Gen { k, p, problems, traces, seed, truncate, out } => {
            let model = GammaModel::new(k, p)?;
            let dataset = generate_synthetic(model, problems, traces, truncate, &RngSpec::new(seed, 0))?;
            let file = File::create(&out)
                .map_err(|e| Failure::usage(format!("cannot write {}: {e}", out.display())))?;
            let mut w = BufWriter::new(file);
            dataset.write_jsonl(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn print_json(value: &Value) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn with_output(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match path {
        Some(p) => {
            let file =
                File::create(p).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// `null` when no trace succeeds within the budget.
fn optional(result: relbudget_core::Result<f64>) -> CliResult<Value> {
    match result {
        Ok(v) => Ok(json!(v)),
        Err(Error::Degenerate(_)) => Ok(Value::Null),
        Err(e) => Err(e.into()),
    }
}

fn stats_report(k: f64, xi: f64, eps: f64, budget: f64) -> CliResult<Value> {
    let b = Budget::new(budget)?;
    let rl = sigma_rl(k, xi, b)?;
    Ok(json!({
        "k": k,
        "xi": xi,
        "eps": eps,
        "budget": budget,
        "c_rl": c_rl(k, xi)?,
        "sigma_rl": rl.std,
        "psi": psi(k, xi, eps)?,
        "anti_concentration": anti_concentration(k, xi, eps)?,
        "c_sft": optional(c_sft(k, xi))?,
        "sigma_sft": optional(sigma_sft(k, xi, b))?,
        "expected_return_J": expected_return(k, xi, b)?,
        "regime": classify(xi, &RegimeThresholds::default()).to_string(),
    }))
}

fn comparison(analytic: f64, est: McEstimate) -> Value {
    let z = est.z_score(analytic);
    json!({
        "analytic": analytic,
        "estimate": est.value,
        "std_error": est.std_error,
        "z_score": z,
        "pass": z.abs() < Z_PASS,
    })
}

fn oracle_report(
    k: f64,
    p: f64,
    budget: f64,
    samples: usize,
    dist: Dist,
    eps: f64,
    rng: RngSpec,
) -> CliResult<Value> {
    if samples < MIN_ORACLE_SAMPLES {
        return Err(Failure::usage(format!("--samples must be at least {MIN_ORACLE_SAMPLES}, got {samples}")));
    }
    let model = GammaModel::new(k, p)?;
    let b = Budget::new(budget)?;
    let times: Vec<f64> = match dist {
        Dist::Gamma => sample_gamma(k, p, &rng, samples)?,
        Dist::Negbin => {
            if k.fract() != 0.0 {
                return Err(Failure::usage(format!("negbin needs an integer --k, got {k}")));
            }
            if p >= 1.0 {
                return Err(Failure::usage(format!("negbin needs --p below 1, got {p}")));
            }
            sample_negbin(k, p, &rng, samples)?.into_iter().map(|t| t as f64).collect()
        }
    };
    let xi = model.relative_budget(b).value();
    let exact = sigma_rl(k, xi, b)?;
    let mc = reward_moments_from_times(&times, b, Convention::Continuous)?;
    let threshold = exact.mean + exact.std * eps.sqrt();
    let ac = exceedance_from_times(&times, b, threshold)?;
    let stats = [
        ("mean", comparison(exact.mean, mc.mean)),
        ("variance", comparison(exact.variance, mc.variance)),
        ("anti_concentration", comparison(anti_concentration(k, xi, eps)?, ac)),
        ("success_prob", comparison(reg_lower_gamma(k, p * budget)?, mc.success_fraction)),
    ];
    let all_pass = stats.iter().all(|(_, v)| v["pass"] == json!(true));
    let mut statistics = serde_json::Map::new();
    for (name, v) in stats {
        statistics.insert(name.to_string(), v);
    }
    Ok(json!({
        "k": k,
        "p": p,
        "budget": budget,
        "xi": xi,
        "eps": eps,
        "dist": match dist { Dist::Gamma => "gamma", Dist::Negbin => "negbin" },
        "samples": samples,
        "convention": "continuous",
        "statistics": statistics,
        "all_pass": all_pass,
        "ks_distance": ks_distance(&times, gamma_cdf(k, p)?)?,
        "rng": { "algorithm": RNG_ALGORITHM, "seed": rng.seed, "stream_id": rng.stream_id },
    }))
}
