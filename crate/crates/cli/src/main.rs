//! Command-line front end: synthesize decision functions, sweep utility
//! regions, evaluate policies over continuous fading, and compare against
//! baselines. See `docs/config-schema.md` for the config format.

use clap::{Args, Parser, Subcommand};
use powcoord_cli::config::{ConfigError, RunConfig};
use powcoord_cli::output::*;
use powcoord::baselines::goodman_target_sinr;
use powcoord::eval::{simulate, Policy};
use powcoord::problem::TeamProblem;
use powcoord::region::{
    enumerate_vertex_payoffs, exhaustive_frontier, frontier_from_vertices, lambda_dirichlet,
    lambda_edge_grid, qos_mixture_lp, synthesized_vertices, RegionError, RegionFrontier,
    VertexPayoff,
};
use powcoord::synth::{multistart_synthesize, DecisionProfile};
use rand::SeedableRng;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "powcoord", about = "Distributed power-control toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; every random choice derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for Monte Carlo evaluation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize decision functions and write them with a report.
    Synthesize(Common),
    /// Sweep the utility-region frontier; solve the QoS mixture LP if
    /// QoS floors are configured.
    Region(Common),
    /// Monte Carlo evaluation of one policy over continuous fading.
    Evaluate(Common),
    /// Paired comparison of several policies along a gain-mean axis.
    Compare(Common),
}

/// Error wrapper mapping module failures onto exit codes.
enum CmdError {
    Config(String),
    Infeasible(String),
    Budget(String),
    Io(String),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.0)
    }
}
impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e.to_string())
    }
}
impl From<RegionError> for CmdError {
    fn from(e: RegionError) -> Self {
        match e {
            RegionError::InfeasibleQos => CmdError::Infeasible(e.to_string()),
            RegionError::BudgetExceeded { .. } => CmdError::Budget(e.to_string()),
            other => CmdError::Config(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (label, common) = match &cli.command {
        Command::Synthesize(c) => ("synthesize", c),
        Command::Region(c) => ("region", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Compare(c) => ("compare", c),
    };
    let run = || -> Result<(), CmdError> {
        let text = std::fs::read_to_string(&common.config)
            .map_err(|e| CmdError::Config(format!("cannot read config: {e}")))?;
        let hash = hex(&Sha256::digest(text.as_bytes()));
        let cfg = RunConfig::parse(&text)?;
        std::fs::create_dir_all(&common.out)?;
        let started = Instant::now();
        match &cli.command {
            Command::Synthesize(c) => cmd_synthesize(&cfg, c, &hash),
            Command::Region(c) => cmd_region(&cfg, c, &hash),
            Command::Evaluate(c) => cmd_evaluate(&cfg, c, &hash),
            Command::Compare(c) => cmd_compare(&cfg, c, &hash),
        }?;
        eprintln!(
            "{{\"command\":\"{label}\",\"status\":\"ok\",\"elapsed_s\":{:.3}}}",
            started.elapsed().as_secs_f64()
        );
        Ok(())
    };
    let fail = |kind: &str, code: u8, msg: &str| -> ExitCode {
        eprintln!(
            "{}",
            serde_json::json!({"command": label, "error": kind, "message": msg})
        );
        ExitCode::from(code)
    };
    match with_threads(common.threads, run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Config(m)) => fail("config", EXIT_CONFIG, &m),
        Err(CmdError::Infeasible(m)) => fail("infeasible_qos", EXIT_INFEASIBLE, &m),
        Err(CmdError::Budget(m)) => fail("budget_exceeded", EXIT_BUDGET, &m),
        Err(CmdError::Io(m)) => fail("io", 1, &m),
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn synthesize_profile(
    cfg: &RunConfig,
    problem: &TeamProblem,
    seed: u64,
) -> Result<powcoord::synth::SynthReport, CmdError> {
    multistart_synthesize(
        problem,
        &DecisionProfile::full_power(problem),
        &cfg.synth_options(),
        cfg.synth.n_starts,
        seed,
    )
    .map_err(|e| CmdError::Config(e.to_string()))
}

fn cmd_synthesize(cfg: &RunConfig, c: &Common, hash: &str) -> Result<(), CmdError> {
    let problem = cfg.problem(c.seed)?;
    let report = synthesize_profile(cfg, &problem, c.seed)?;
    write_atomic(
        &c.out.join("decision_functions.txt"),
        &decision_functions_text(&problem, &report.profile, hash, c.seed),
    )?;
    write_atomic(
        &c.out.join("synth_report.txt"),
        &synth_report_text(&report, hash, c.seed),
    )?;
    let total: f64 = report.sweep_seconds.iter().sum();
    eprintln!(
        "{}",
        serde_json::json!({"sweeps": report.sweeps, "converged": report.converged,
            "w_final": report.w_final(), "sweep_seconds_total": total})
    );
    Ok(())
}

fn lambda_grid(cfg: &RunConfig, k: usize, seed: u64) -> Vec<Vec<f64>> {
    if k == 1 {
        vec![vec![1.0]]
    } else if k == 2 {
        lambda_edge_grid(cfg.region.lambda_points.max(2))
    } else {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x9e37);
        lambda_dirichlet(k, cfg.region.lambda_points.max(1), &mut rng)
    }
}

fn cmd_region(cfg: &RunConfig, c: &Common, hash: &str) -> Result<(), CmdError> {
    let problem = cfg.problem(c.seed)?;
    let k = problem.k();
    let lambdas = lambda_grid(cfg, k, c.seed);
    let budget = cfg.region.budget;

    let synth_vertices = |lambdas: &[Vec<f64>]| -> Result<Vec<VertexPayoff>, CmdError> {
        synthesized_vertices(
            &problem,
            lambdas,
            &cfg.synth_options(),
            cfg.synth.n_starts,
            c.seed,
        )
        .map_err(CmdError::from)
    };

    let frontier: RegionFrontier = match cfg.region.mode.as_str() {
        "exhaustive" => exhaustive_frontier(&problem, &lambdas, budget)?,
        "synthesize" => frontier_from_vertices(&synth_vertices(&lambdas)?, &lambdas),
        "auto" => match exhaustive_frontier(&problem, &lambdas, budget) {
            Ok(f) => f,
            Err(RegionError::BudgetExceeded { .. }) => {
                frontier_from_vertices(&synth_vertices(&lambdas)?, &lambdas)
            }
            Err(e) => return Err(e.into()),
        },
        other => return Err(CmdError::Config(format!("unknown region mode '{other}'"))),
    };

    let mut registry = ProfileRegistry::new();
    let frontier_text = frontier_csv(&frontier, &mut registry, k);

    let mut qos_text = None;
    if let Some(qos) = &cfg.region.qos {
        if qos.len() != k {
            return Err(CmdError::Config(format!(
                "qos has {} entries for {k} users",
                qos.len()
            )));
        }
        let lambda = cfg
            .region
            .qos_lambda
            .clone()
            .unwrap_or_else(|| vec![1.0 / k as f64; k]);
        let vertices = match enumerate_vertex_payoffs(&problem, budget) {
            Ok(v) => v,
            Err(RegionError::BudgetExceeded { .. }) => synth_vertices(&lambdas)?,
            Err(e) => return Err(e.into()),
        };
        let mix = qos_mixture_lp(&vertices, &lambda, qos)?;
        qos_text = Some(qos_mixture_csv(&mix, &problem, &mut registry));
    }

    write_atomic(&c.out.join("frontier.csv"), &frontier_text)?;
    if let Some(text) = qos_text {
        write_atomic(&c.out.join("qos_mixture.csv"), &text)?;
    }
    write_atomic(
        &c.out.join("profiles.txt"),
        &registry.text(&problem, hash, c.seed),
    )?;
    Ok(())
}

fn resolve_policy(
    cfg: &RunConfig,
    problem: &TeamProblem,
    name: &str,
    seed: u64,
) -> Result<Policy, CmdError> {
    match name {
        "synthesized" => Ok(Policy::Table {
            profile: synthesize_profile(cfg, problem, seed)?.profile,
        }),
        "table" => {
            let path = cfg
                .eval
                .table_path
                .as_ref()
                .ok_or(CmdError::Config("policy 'table' requires table_path".into()))?;
            let text = std::fs::read_to_string(Path::new(path))
                .map_err(|e| CmdError::Config(format!("cannot read {path}: {e}")))?;
            Ok(Policy::Table {
                profile: parse_decision_functions(&text, problem)?,
            })
        }
        "goodman" => {
            let beta = goodman_target_sinr(&problem.utility.psi)
                .map_err(|e| CmdError::Config(e.to_string()))?;
            Ok(Policy::Goodman {
                beta_star: beta,
                max_iters: cfg.eval.goodman_max_iters,
            })
        }
        "iwfa" => Ok(Policy::Iwfa {
            max_rounds: cfg.eval.iwfa_max_rounds,
        }),
        "bpc_cs" => Ok(Policy::BpcCs),
        "full_power" => Ok(Policy::FullPower),
        other => Err(CmdError::Config(format!("unknown policy '{other}'"))),
    }
}

fn cmd_evaluate(cfg: &RunConfig, c: &Common, _hash: &str) -> Result<(), CmdError> {
    let problem = cfg.problem(c.seed)?;
    let policy = resolve_policy(cfg, &problem, &cfg.eval.policy, c.seed)?;
    let result = simulate(&problem, &policy, cfg.eval.n_blocks, c.seed);
    let mut text = eval_csv_header(problem.k());
    text.push_str(&eval_csv_row(&result));
    write_atomic(&c.out.join("eval.csv"), &text)?;
    Ok(())
}

fn cmd_compare(cfg: &RunConfig, c: &Common, _hash: &str) -> Result<(), CmdError> {
    let compare = cfg
        .compare
        .as_ref()
        .ok_or(CmdError::Config("compare command needs a [compare] section".into()))?;
    if compare.axis != "gain_mean" {
        return Err(CmdError::Config(format!(
            "unknown compare axis '{}'",
            compare.axis
        )));
    }
    if compare.values.is_empty() || compare.policies.is_empty() {
        return Err(CmdError::Config("compare needs values and policies".into()));
    }
    let base = cfg.problem(c.seed)?;
    let mut text = compare_csv_header(base.k());
    for (ai, &value) in compare.values.iter().enumerate() {
        let scenario = base
            .scenario
            .with_uniform_gain_mean(value)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        let channel = cfg.channel(&scenario)?;
        let observation = cfg.observation(&scenario, &channel, c.seed)?;
        let utility = cfg.utility(scenario.k())?;
        let problem = TeamProblem::with_shared_actions(scenario, channel, observation, utility)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        for name in &compare.policies {
            let policy = resolve_policy(cfg, &problem, name, c.seed.wrapping_add(ai as u64))?;
            let result = simulate(&problem, &policy, compare.n_blocks, c.seed);
            text.push_str(&compare_csv_row(value, &result));
        }
    }
    write_atomic(&c.out.join("compare.csv"), &text)?;
    Ok(())
}
