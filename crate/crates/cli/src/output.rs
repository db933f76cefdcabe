//! Output files: decision functions, synthesis reports, CSV tables.
//!
//! Everything is plain line-oriented text. Floats are serialized with 17
//! significant digits (`{:.16e}`), which round-trips f64 exactly, and files
//! are written atomically (temp file in the target directory, then rename).
//! No timestamps or other volatile data appear in any output, so rerunning
//! a command with the same config and seed reproduces every file byte for
//! byte.

use crate::config::ConfigError;
use powcoord::eval::EvalResult;
use powcoord::observe::LinkModel;
use powcoord::problem::TeamProblem;
use powcoord::region::{AuxiliaryMix, RegionFrontier};
use powcoord::synth::{DecisionProfile, SynthReport};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Decision-function file: a header describing the alphabets and quantizer
/// boundaries, then one row per observation index with the chosen power
/// vector of each transmitter.
pub fn decision_functions_text(
    problem: &TeamProblem,
    profile: &DecisionProfile,
    config_hash: &str,
    seed: u64,
) -> String {
    let mut out = String::new();
    out.push_str("# powcoord decision-functions v1\n");
    out.push_str(&format!("# config_hash {config_hash}\n"));
    out.push_str(&format!("# seed {seed}\n"));
    out.push_str(&format!(
        "# k {} bands {}\n",
        problem.k(),
        problem.scenario.bands()
    ));
    for (i, alphabet) in problem.actions.iter().enumerate() {
        out.push_str(&format!(
            "# actions tx {} size {}\n",
            i,
            alphabet.len()
        ));
    }
    for i in 0..problem.k() {
        out.push_str(&format!(
            "# observations tx {} size {}\n",
            i,
            problem.observation.n_obs(i)
        ));
    }
    for l in 0..problem.channel.n_links() {
        if let LinkModel::Quantized { quantizer, .. } = problem.channel.link(l) {
            let b: Vec<String> = quantizer.boundaries().iter().map(|&x| fmt_f64(x)).collect();
            out.push_str(&format!("# quantizer link {} boundaries {}\n", l, b.join(" ")));
        }
    }
    for (i, table) in profile.tables.iter().enumerate() {
        out.push_str(&format!("tx {i}\n"));
        for (s, &a) in table.iter().enumerate() {
            let powers: Vec<String> = problem.actions[i]
                .action(a)
                .iter()
                .map(|&p| fmt_f64(p))
                .collect();
            out.push_str(&format!("{s} {}\n", powers.join(" ")));
        }
    }
    out
}

/// Parses a decision-function file back into a profile against the same
/// problem (power vectors are matched to alphabet entries bit-exactly).
pub fn parse_decision_functions(
    text: &str,
    problem: &TeamProblem,
) -> Result<DecisionProfile, ConfigError> {
    let mut tables: Vec<Vec<usize>> = (0..problem.k())
        .map(|i| vec![usize::MAX; problem.observation.n_obs(i)])
        .collect();
    let mut current: Option<usize> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("tx ") {
            let i: usize = rest
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("bad tx header '{line}'")))?;
            if i >= problem.k() {
                return Err(ConfigError(format!("tx {i} out of range")));
            }
            current = Some(i);
            continue;
        }
        let i = current.ok_or(ConfigError("row before any tx header".into()))?;
        let mut parts = line.split_whitespace();
        let s: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(ConfigError(format!("bad row '{line}'")))?;
        let powers: Vec<f64> = parts
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| ConfigError(format!("bad power in '{line}'")))?;
        if s >= tables[i].len() {
            return Err(ConfigError(format!("observation index {s} out of range")));
        }
        let a = problem.actions[i]
            .actions()
            .iter()
            .position(|cand| {
                cand.len() == powers.len()
                    && cand.iter().zip(&powers).all(|(x, y)| x.to_bits() == y.to_bits())
            })
            .ok_or(ConfigError(format!(
                "power vector {powers:?} not in transmitter {i}'s alphabet"
            )))?;
        tables[i][s] = a;
    }
    for (i, t) in tables.iter().enumerate() {
        if t.iter().any(|&a| a == usize::MAX) {
            return Err(ConfigError(format!("transmitter {i} table incomplete")));
        }
    }
    Ok(DecisionProfile { tables })
}

/// Synthesis report (no wall-clock content; timings go to stderr).
pub fn synth_report_text(report: &SynthReport, config_hash: &str, seed: u64) -> String {
    let mut out = String::new();
    out.push_str("# powcoord synth-report v1\n");
    out.push_str(&format!("# config_hash {config_hash}\n"));
    out.push_str(&format!("# seed {seed}\n"));
    out.push_str(&format!("converged {}\n", report.converged));
    out.push_str(&format!("sweeps {}\n", report.sweeps));
    out.push_str(&format!("w_final {}\n", fmt_f64(report.w_final())));
    let trace: Vec<String> = report.w_trace.iter().map(|&w| fmt_f64(w)).collect();
    out.push_str(&format!("w_trace {}\n", trace.join(" ")));
    if let Some(ops) = &report.ops_per_sweep {
        let o: Vec<String> = ops.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("ops_per_sweep {}\n", o.join(" ")));
    }
    out
}

/// Registry of distinct profiles referenced by frontier/mixture CSVs.
pub struct ProfileRegistry {
    profiles: Vec<DecisionProfile>,
}

impl ProfileRegistry {
    pub fn new() -> Self {
        Self { profiles: Vec::new() }
    }

    pub fn id_of(&mut self, profile: &DecisionProfile) -> usize {
        if let Some(i) = self.profiles.iter().position(|p| p == profile) {
            return i;
        }
        self.profiles.push(profile.clone());
        self.profiles.len() - 1
    }

    pub fn text(&self, problem: &TeamProblem, config_hash: &str, seed: u64) -> String {
        let mut out = String::new();
        out.push_str("# powcoord profiles v1\n");
        out.push_str(&format!("# config_hash {config_hash}\n"));
        out.push_str(&format!("# seed {seed}\n"));
        for (id, profile) in self.profiles.iter().enumerate() {
            out.push_str(&format!("profile {id}\n"));
            for (i, table) in profile.tables.iter().enumerate() {
                out.push_str(&format!("tx {i}\n"));
                for (s, &a) in table.iter().enumerate() {
                    let powers: Vec<String> = problem.actions[i]
                        .action(a)
                        .iter()
                        .map(|&p| fmt_f64(p))
                        .collect();
                    out.push_str(&format!("{s} {}\n", powers.join(" ")));
                }
            }
        }
        out
    }
}

/// Splits a profiles file into `(id, decision-function text)` chunks that
/// [`parse_decision_functions`] accepts.
pub fn split_profiles_text(text: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("profile ") {
            let id = rest.trim().parse().unwrap_or(usize::MAX);
            out.push((id, String::new()));
        } else if let Some((_, body)) = out.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    out
}

pub fn frontier_csv(frontier: &RegionFrontier, registry: &mut ProfileRegistry, k: usize) -> String {
    let mut out = String::new();
    let lam: Vec<String> = (1..=k).map(|i| format!("lambda_{i}")).collect();
    let us: Vec<String> = (1..=k).map(|i| format!("u_{i}")).collect();
    out.push_str(&format!("{},{},profile_id\n", lam.join(","), us.join(",")));
    for pt in &frontier.points {
        let id = registry.id_of(&pt.profile);
        let lam: Vec<String> = pt.lambda.iter().map(|&x| fmt_f64(x)).collect();
        let us: Vec<String> = pt.payoff.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&format!("{},{},{id}\n", lam.join(","), us.join(",")));
    }
    out
}

pub fn qos_mixture_csv(
    mix: &AuxiliaryMix,
    problem: &TeamProblem,
    registry: &mut ProfileRegistry,
) -> String {
    let k = problem.k();
    let mut out = String::new();
    let us: Vec<String> = (1..=k).map(|i| format!("u_{i}")).collect();
    out.push_str(&format!("row,p_v,{},profile_id\n", us.join(",")));
    for (pv, profile) in &mix.atoms {
        let id = registry.id_of(profile);
        let u = powcoord::region::per_user_expected_utilities(problem, profile);
        let us: Vec<String> = u.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&format!("atom,{},{},{id}\n", fmt_f64(*pv), us.join(",")));
    }
    let total = mix.payoff(problem);
    let us: Vec<String> = total.iter().map(|&x| fmt_f64(x)).collect();
    out.push_str(&format!("mixture,{},{},\n", fmt_f64(1.0), us.join(",")));
    out
}

pub fn eval_csv_header(k: usize) -> String {
    let means: Vec<String> = (1..=k).map(|i| format!("u_mean_{i}")).collect();
    let ses: Vec<String> = (1..=k).map(|i| format!("u_se_{i}")).collect();
    format!(
        "policy,n_blocks,seed,{},{},sum_mean,sum_se,draw_hash\n",
        means.join(","),
        ses.join(",")
    )
}

pub fn eval_csv_row(r: &EvalResult) -> String {
    let means: Vec<String> = r.mean.iter().map(|&x| fmt_f64(x)).collect();
    let ses: Vec<String> = r.se.iter().map(|&x| fmt_f64(x)).collect();
    format!(
        "{},{},{},{},{},{},{},{:016x}\n",
        r.policy,
        r.n_blocks,
        r.seed,
        means.join(","),
        ses.join(","),
        fmt_f64(r.sum_mean),
        fmt_f64(r.sum_se),
        r.draw_hash
    )
}

pub fn compare_csv_header(k: usize) -> String {
    format!("axis,{}", eval_csv_header(k))
}

pub fn compare_csv_row(axis: f64, r: &EvalResult) -> String {
    format!("{},{}", fmt_f64(axis), eval_csv_row(r))
}
