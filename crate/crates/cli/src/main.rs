use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use darrm::eval::{error_closed_form, error_monte_carlo, expected_error};
use darrm::gammas::{all_ones, all_zeros, compute_p_const, gamma_const, gamma_dsub, gamma_sub, integer_allowance, NoiseFn, RrParams};
use darrm::mechanism::simulate_darrm_trace;
use darrm::optimizer::{objective_coeffs, optimize_with_coeffs, OptimizerConfig, Prior, SolverMode};
use darrm::privacy::{
    data_dependent_bound, general_composition, gnmax_sigma, simple_composition, verify_general_with,
    verify_iid_boundary, PrivacyBudget, VerifyOptions,
};
use darrm::dist::ProbVector;
use darrm::DarrmError;

mod output;
mod reproduce;

use output::write_atomic;
use reproduce::Scenario;

#[derive(Parser)]
#[command(name = "darrm", version, about = "Private majority ensembling with data-dependent randomized response")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal noise function over a sweep of allowances.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        solver: Option<Solver>,
    },
    /// Check a noise function against an (m eps, delta) target. Exits 1 if it fails.
    Verify {
        #[arg(long)]
        gamma: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long = "Delta", default_value_t = 0.0)]
        delta_mech: f64,
        #[arg(long)]
        m: f64,
        /// Defaults to 1 - (1 - Delta)^m.
        #[arg(long)]
        delta: Option<f64>,
        /// Scan the i.i.d. worst-case boundary instead of every corner multiset (pure DP only).
        #[arg(long)]
        iid: bool,
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
        /// Enumerate even when K is large and Delta > 0.
        #[arg(long)]
        allow_large: bool,
    },
    /// Error of a noise function at fixed p and, optionally, in expectation over a prior.
    Evaluate {
        #[arg(long)]
        gamma: PathBuf,
        /// Comma-separated p_1..p_K.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Same p for every mechanism.
        #[arg(long, conflicts_with = "p")]
        iid_p: Option<f64>,
        /// Monte-Carlo trials of the mechanism itself at p.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Prior as JSON intervals, e.g. "[[0,1]]"; enables the expected error.
        #[arg(long)]
        prior: Option<String>,
        #[arg(long = "T", default_value_t = 10_000)]
        t: u64,
        /// Write the per-trial trace of the simulation as CSV.
        #[arg(long, requires = "trials")]
        trace: Option<PathBuf>,
    },
    /// Composed budget of k mechanisms.
    Compose {
        #[arg(long, value_enum, default_value_t = ComposeMode::Simple)]
        mode: ComposeMode,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        delta_prime: f64,
    },
    /// Smallest GNMax noise for an (eps, delta) target.
    Gnmax {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 500.0)]
        lambda_max: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        /// Vote histogram for the data-dependent bound at the chosen lambda.
        #[arg(long, value_delimiter = ',')]
        votes: Vec<f64>,
    },
    /// Write a closed-form noise function as JSON.
    Gamma {
        #[arg(long, value_enum)]
        kind: GammaKind,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        p_const: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a built-in experiment as CSV files.
    Reproduce {
        #[arg(value_enum)]
        scenario: Scenario,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples for the objective and for expected errors.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, value_enum)]
        solver: Option<Solver>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Full,
    Rowgen,
}

impl From<Solver> for SolverMode {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Full => SolverMode::Full,
            Solver::Rowgen => SolverMode::Rowgen,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ComposeMode {
    Simple,
    General,
}

#[derive(Clone, Copy, ValueEnum)]
enum GammaKind {
    Sub,
    Dsub,
    Const,
    Ones,
    Zeros,
}

/// How a command ended, beyond success.
enum Failure {
    /// Exit 1.
    Rejected,
    /// Exit 2.
    Usage(String),
}

impl From<DarrmError> for Failure {
    fn from(e: DarrmError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn read_gamma(path: &Path) -> Result<NoiseFn<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let g = NoiseFn::from_json_str(&text)?;
    g.ensure_valid()?;
    Ok(g)
}

/// Reads an optimizer config, accepting two extra keys: `name` and `out`.
fn read_config(path: &Path) -> Result<(OptimizerConfig, Option<PathBuf>), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config: {e}")))?;
    let obj = v.as_object_mut().ok_or_else(|| Failure::Usage("config must be a JSON object".into()))?;
    obj.remove("name");
    let out = match obj.remove("out") {
        Some(serde_json::Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => return Err(Failure::Usage(format!("config out must be a string, got {other}"))),
        None => None,
    };
    let cfg: OptimizerConfig = serde_json::from_value(v).map_err(|e| Failure::Usage(format!("config: {e}")))?;
    Ok((cfg, out))
}

fn cmd_optimize(config: &Path, out: Option<PathBuf>, seed: Option<u64>, solver: Option<Solver>) -> Outcome {
    let (mut cfg, cfg_out) = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = solver {
        cfg.solver = Some(s.into());
    }
    let ms = cfg.m.values();
    // every budget is checked before any work starts
    let budgets: Vec<PrivacyBudget> = ms.iter().map(|&m| cfg.budget_for(m)).collect::<Result<_, _>>()?;
    if ms.is_empty() {
        return Ok(());
    }
    let dir = out.or(cfg_out).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let opts = cfg.options();
    let coeffs = objective_coeffs(cfg.k, &cfg.prior, &opts)?;
    let solutions = reproduce::par_map(&budgets, |b| optimize_with_coeffs(&coeffs, b, &opts));
    for (b, sol) in budgets.iter().zip(solutions) {
        let sol = sol?;
        let path = dir.join(format!("gamma_K{}_m{}.json", cfg.k, b.m));
        let mut text = serde_json::to_string_pretty(&sol).expect("serializable");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        println!(
            "K={} m={} status={:?} objective={:.6} fallback={} -> {}",
            cfg.k,
            b.m,
            sol.status,
            sol.objective_value,
            sol.fallback,
            path.display()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    gamma: &Path,
    eps: f64,
    delta_mech: f64,
    m: f64,
    delta: Option<f64>,
    iid: bool,
    grid_step: f64,
    allow_large: bool,
) -> Outcome {
    let g = read_gamma(gamma)?;
    let budget = match delta {
        Some(d) => PrivacyBudget::new(eps, delta_mech, m, d)?,
        None => PrivacyBudget::one_minus_pow(eps, delta_mech, m)?,
    };
    let ok = if iid {
        if budget.delta_mech > 0.0 || budget.delta > 0.0 {
            return Err(Failure::Usage("--iid needs Delta = delta = 0".into()));
        }
        let r = verify_iid_boundary(&g, m, eps, grid_step)?;
        print_json(&r);
        r.ok
    } else {
        let opts = VerifyOptions { allow_large, ..Default::default() };
        let r = verify_general_with(&g, &budget, &opts)?;
        print_json(&r);
        r.ok
    };
    if ok {
        Ok(())
    } else {
        Err(Failure::Rejected)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    gamma: &Path,
    p: Vec<f64>,
    iid_p: Option<f64>,
    trials: Option<u64>,
    seed: u64,
    prior: Option<String>,
    t: u64,
    trace: Option<PathBuf>,
) -> Outcome {
    let g = read_gamma(gamma)?;
    let mut report = serde_json::Map::new();
    let p = match iid_p {
        Some(x) => Some(ProbVector::iid(g.k(), x)?),
        None if !p.is_empty() => Some(ProbVector::new(p)?),
        None => None,
    };
    if let Some(p) = &p {
        report.insert("error_at_p".into(), json!(error_closed_form(&g, p)?));
        if let Some(n) = trials {
            report.insert("error_at_p_monte_carlo".into(), json!(error_monte_carlo(&g, p, n, seed)?));
            if let Some(path) = &trace {
                let mut buf = Vec::new();
                simulate_darrm_trace(&g, p, n, seed, &mut buf)?;
                write_atomic(path, &buf)?;
            }
        }
    } else if trials.is_some() {
        return Err(Failure::Usage("--trials needs --p or --iid-p".into()));
    }
    if let Some(text) = prior {
        let prior: Prior = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("prior: {e}")))?;
        let e = expected_error(&g, &prior, t, seed)?;
        report.insert("expected_error_over_prior".into(), json!({ "error": e, "T": t, "seed": seed, "prior": prior }));
    }
    if report.is_empty() {
        return Err(Failure::Usage("nothing to evaluate: give --p, --iid-p or --prior".into()));
    }
    print_json(&report);
    Ok(())
}

fn cmd_compose(mode: ComposeMode, k: f64, eps: f64, delta: f64, delta_prime: f64) -> Outcome {
    let (e, d) = match mode {
        ComposeMode::Simple => simple_composition(k, eps, delta)?,
        ComposeMode::General => {
            if !(k >= 1.0 && k.fract() == 0.0 && k <= f64::from(u32::MAX)) {
                return Err(Failure::Usage(format!("general composition needs an integer k, got {k}")));
            }
            general_composition(k as u32, eps, delta, delta_prime)?
        }
    };
    let mode = if mode == ComposeMode::Simple { "simple" } else { "general" };
    print_json(&json!({ "mode": mode, "k": k, "eps": e, "delta": d }));
    Ok(())
}

fn cmd_gnmax(eps: f64, delta: f64, lambda_max: f64, step: f64, votes: Vec<f64>) -> Outcome {
    let r = gnmax_sigma(eps, delta, lambda_max, step)?;
    let mut v = json!(r);
    if !votes.is_empty() {
        v["data_dependent"] = json!(data_dependent_bound(r.sigma, r.lambda, &votes)?);
    }
    print_json(&v);
    Ok(())
}

fn cmd_gamma(kind: GammaKind, k: usize, m: Option<f64>, p_const: Option<f64>, out: Option<PathBuf>) -> Outcome {
    let need_m = || -> Result<usize, Failure> {
        Ok(integer_allowance(m.ok_or_else(|| Failure::Usage("--m is required for this kind".into()))?)?)
    };
    let g: NoiseFn<f64> = match kind {
        GammaKind::Sub => gamma_sub(k, need_m()?)?,
        GammaKind::Dsub => gamma_dsub(k, need_m()?)?,
        GammaKind::Const => {
            gamma_const(k, p_const.ok_or_else(|| Failure::Usage("--p-const is required for const".into()))?)?
        }
        GammaKind::Ones => NoiseFn::checked(k, all_ones::<f64>(k).into_inner())?,
        GammaKind::Zeros => NoiseFn::checked(k, all_zeros::<f64>(k).into_inner())?,
    };
    let mut text = g.to_json_string();
    text.push('\n');
    match out {
        Some(path) => write_atomic(&path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

/// `p_const` of randomized response starting from simple composition of
/// all `K` mechanisms.
pub(crate) fn rr_p_const(k: usize, budget: &PrivacyBudget) -> darrm::Result<f64> {
    let lambda = 1.0 - (1.0 - budget.delta_mech).powi(k as i32);
    compute_p_const(budget.eps, budget.m, budget.delta, RrParams::new(k as f64, lambda)?)
}

fn set_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("DARRM_THREADS") {
        let n: usize = v.parse().map_err(|_| Failure::Usage(format!("DARRM_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Failure::Usage("DARRM_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    set_threads()?;
    match cli.command {
        Command::Optimize { config, out, seed, solver } => cmd_optimize(&config, out, seed, solver),
        Command::Verify { gamma, eps, delta_mech, m, delta, iid, grid_step, allow_large } => {
            cmd_verify(&gamma, eps, delta_mech, m, delta, iid, grid_step, allow_large)
        }
        Command::Evaluate { gamma, p, iid_p, trials, seed, prior, t, trace } => {
            cmd_evaluate(&gamma, p, iid_p, trials, seed, prior, t, trace)
        }
        Command::Compose { mode, k, eps, delta, delta_prime } => cmd_compose(mode, k, eps, delta, delta_prime),
        Command::Gnmax { eps, delta, lambda_max, step, votes } => cmd_gnmax(eps, delta, lambda_max, step, votes),
        Command::Gamma { kind, k, m, p_const, out } => cmd_gamma(kind, k, m, p_const, out),
        Command::Reproduce { scenario, out, seed, trials, solver } => {
            reproduce::run(scenario, &out, seed, trials, solver.map(Into::into))
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
