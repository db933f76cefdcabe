//! Long-term utility region machinery.
//!
//! Deterministic decision profiles are the vertices of the achievable set;
//! mixing them through a shared offline lottery (the auxiliary variable)
//! traces its convex hull. This module enumerates vertices at desk scale,
//! sweeps Pareto frontiers over scalarization weights, solves the
//! QoS-constrained mixture linear program, and validates the whole
//! construction empirically: the joint law over (state, actions) induced by
//! simulating a mixture block by block must match the analytic
//!
//! ```text
//! Q(a0, a) = rho0(a0) sum_v P_V(v) prod_i nu_i^v(a_i | a0)
//! ```
//!
//! in total variation, and long-term utilities must be its linear images.

use crate::lp::{solve, Cmp, LinearProgram, LpOutcome};
use crate::model::utilities_into;
use crate::numeric::{block_rng, mean_and_se};
use crate::problem::TeamProblem;
use crate::synth::{expected_utilities, pushforward_into, DecisionProfile};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("profile enumeration needs ~{required:.3e} evaluations, budget is {budget:.3e}")]
    BudgetExceeded { required: f64, budget: f64 },
    #[error("QoS constraints are infeasible over the supplied vertices")]
    InfeasibleQos,
    #[error("joint support too large for the factorization check: {0} cells")]
    JointTooLarge(usize),
    #[error("lp failed: {0}")]
    Lp(#[from] crate::lp::LpError),
    #[error("{0}")]
    Invalid(String),
}

/// A deterministic profile together with its exact per-user payoff.
#[derive(Debug, Clone)]
pub struct VertexPayoff {
    pub profile: DecisionProfile,
    pub payoff: Vec<f64>,
}

/// Lottery over deterministic profiles (the auxiliary coordination key).
#[derive(Debug, Clone)]
pub struct AuxiliaryMix {
    /// `(P_V(v), profile_v)` with probabilities summing to one.
    pub atoms: Vec<(f64, DecisionProfile)>,
}

impl AuxiliaryMix {
    pub fn pure(profile: DecisionProfile) -> Self {
        Self {
            atoms: vec![(1.0, profile)],
        }
    }

    /// Exact per-user payoff: the lottery-weighted average of atom payoffs.
    pub fn payoff(&self, problem: &TeamProblem) -> Vec<f64> {
        let mut total = vec![0.0; problem.k()];
        for (p, profile) in &self.atoms {
            let u = expected_utilities(problem, profile);
            for (t, &v) in total.iter_mut().zip(&u) {
                *t += p * v;
            }
        }
        total
    }
}

/// One point of a frontier sweep.
#[derive(Debug, Clone)]
pub struct FrontierPoint {
    pub lambda: Vec<f64>,
    pub payoff: Vec<f64>,
    pub profile: DecisionProfile,
}

/// Pareto-filtered sweep of the utility region boundary.
#[derive(Debug, Clone)]
pub struct RegionFrontier {
    pub points: Vec<FrontierPoint>,
}

/// Exact per-user expected utilities of a deterministic profile.
pub fn per_user_expected_utilities(problem: &TeamProblem, profile: &DecisionProfile) -> Vec<f64> {
    expected_utilities(problem, profile)
}

/// Support bound for the auxiliary lottery: `prod_k |A_k| * prod_l |S_l| - 1`
/// (saturating at `u128::MAX`).
pub fn cardinality_bound(action_sizes: &[usize], obs_sizes: &[usize]) -> u128 {
    let mut acc: u128 = 1;
    for &n in action_sizes.iter().chain(obs_sizes) {
        acc = acc.saturating_mul(n as u128);
    }
    acc - 1
}

/// Number of deterministic profiles, as a float to survive huge alphabets.
pub fn profile_count(problem: &TeamProblem) -> f64 {
    problem
        .obs_sizes()
        .iter()
        .zip(problem.action_sizes())
        .map(|(&s, a)| (a as f64).powi(s as i32))
        .product()
}

/// Enumerates every deterministic profile with its payoff. Errors when the
/// profile count exceeds `budget`.
pub fn enumerate_vertex_payoffs(
    problem: &TeamProblem,
    budget: f64,
) -> Result<Vec<VertexPayoff>, RegionError> {
    let required = profile_count(problem);
    if required > budget {
        return Err(RegionError::BudgetExceeded { required, budget });
    }
    let entries: Vec<(usize, usize)> = (0..problem.k())
        .flat_map(|i| (0..problem.observation.n_obs(i)).map(move |s| (i, s)))
        .collect();
    let radices: Vec<usize> = entries
        .iter()
        .map(|&(i, _)| problem.actions[i].len())
        .collect();
    let mut digits = vec![0usize; entries.len()];
    let mut profile = DecisionProfile {
        tables: (0..problem.k())
            .map(|i| vec![0usize; problem.observation.n_obs(i)])
            .collect(),
    };
    let mut out = Vec::with_capacity(required as usize);
    loop {
        for (pos, &(i, s)) in entries.iter().enumerate() {
            profile.tables[i][s] = digits[pos];
        }
        out.push(VertexPayoff {
            profile: profile.clone(),
            payoff: expected_utilities(problem, &profile),
        });
        if !increment(&mut digits, &radices) {
            break;
        }
    }
    Ok(out)
}

fn increment(digits: &mut [usize], radices: &[usize]) -> bool {
    for pos in (0..digits.len()).rev() {
        digits[pos] += 1;
        if digits[pos] < radices[pos] {
            return true;
        }
        digits[pos] = 0;
    }
    false
}

/// Uniform grid on the simplex edge for two users; `n` points.
pub fn lambda_edge_grid(n: usize) -> Vec<Vec<f64>> {
    assert!(n >= 2);
    (0..n)
        .map(|j| {
            let t = j as f64 / (n - 1) as f64;
            vec![1.0 - t, t]
        })
        .collect()
}

/// `n` flat-Dirichlet samples on the `K`-simplex.
pub fn lambda_dirichlet<R: Rng>(k: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..k)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        })
        .collect()
}

/// True when every transmitter observes the full state exactly.
fn all_global(problem: &TeamProblem) -> bool {
    let n = problem.states().len();
    (0..problem.k()).all(|i| {
        let tx = problem.observation.tx(i);
        tx.is_deterministic() && tx.n_obs() == n
    })
}

/// Best weighted utility under shared perfect state knowledge: the per-state
/// centralized argmax, which is exact for the global-CSI structure.
fn centralized_best(problem: &TeamProblem, lambda: &[f64]) -> FrontierPoint {
    let p = problem.with_weights(lambda.to_vec());
    let states = p.states();
    let k = p.k();
    let action_sizes = p.action_sizes();
    let mut tables: Vec<Vec<usize>> = (0..k).map(|_| vec![0usize; states.len()]) .collect();
    let mut powers: Vec<&[f64]> = vec![&[]; k];
    let mut joint = vec![0usize; k];
    for a0 in 0..states.len() {
        let gains = states.gains(a0);
        let mut best_w = f64::NEG_INFINITY;
        let mut best = vec![0usize; k];
        joint.iter_mut().for_each(|x| *x = 0);
        loop {
            for i in 0..k {
                powers[i] = p.actions[i].action(joint[i]);
            }
            let w = crate::model::weighted_utility(&p.utility, &p.scenario, gains, &powers);
            if w > best_w {
                best_w = w;
                best.copy_from_slice(&joint);
            }
            if !increment(&mut joint, &action_sizes) {
                break;
            }
        }
        for i in 0..k {
            tables[i][a0] = best[i];
        }
    }
    let profile = DecisionProfile { tables };
    let payoff = expected_utilities(&p, &profile);
    FrontierPoint {
        lambda: lambda.to_vec(),
        payoff,
        profile,
    }
}

/// Sweeps the scalarization weights over `lambdas`, maximizing by exhaustive
/// vertex enumeration (within `budget`), and returns the Pareto-filtered
/// frontier. For the global-CSI structure above budget, the per-state
/// centralized maximization is used instead (it is exact there); any other
/// structure above budget errors, signalling the caller to synthesize.
pub fn exhaustive_frontier(
    problem: &TeamProblem,
    lambdas: &[Vec<f64>],
    budget: f64,
) -> Result<RegionFrontier, RegionError> {
    if lambdas.is_empty() {
        return Err(RegionError::Invalid("empty lambda grid".into()));
    }
    let points: Vec<FrontierPoint> = match enumerate_vertex_payoffs(problem, budget) {
        Ok(vertices) => lambdas
            .iter()
            .map(|lambda| {
                let mut best = 0usize;
                let mut best_w = f64::NEG_INFINITY;
                for (v, vertex) in vertices.iter().enumerate() {
                    let w: f64 = lambda
                        .iter()
                        .zip(&vertex.payoff)
                        .map(|(l, u)| l * u)
                        .sum();
                    if w > best_w {
                        best_w = w;
                        best = v;
                    }
                }
                FrontierPoint {
                    lambda: lambda.clone(),
                    payoff: vertices[best].payoff.clone(),
                    profile: vertices[best].profile.clone(),
                }
            })
            .collect(),
        Err(RegionError::BudgetExceeded { .. }) if all_global(problem) => lambdas
            .iter()
            .map(|lambda| centralized_best(problem, lambda))
            .collect(),
        Err(e) => return Err(e),
    };
    Ok(RegionFrontier {
        points: pareto_filter(points),
    })
}

/// Candidate vertex set for instances too large to enumerate: the best
/// synthesized profile per scalarization weight, deduplicated. An inner
/// approximation of the vertex set.
pub fn synthesized_vertices(
    problem: &TeamProblem,
    lambdas: &[Vec<f64>],
    opts: &crate::synth::SynthOptions,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<VertexPayoff>, RegionError> {
    let mut out: Vec<VertexPayoff> = Vec::new();
    for (li, lambda) in lambdas.iter().enumerate() {
        let p = problem.with_weights(lambda.clone());
        let report = crate::synth::multistart_synthesize(
            &p,
            &DecisionProfile::full_power(&p),
            opts,
            n_starts,
            seed.wrapping_add(li as u64),
        )
        .map_err(|e| RegionError::Invalid(e.to_string()))?;
        if !out.iter().any(|v| v.profile == report.profile) {
            out.push(VertexPayoff {
                payoff: expected_utilities(problem, &report.profile),
                profile: report.profile,
            });
        }
    }
    Ok(out)
}

/// Frontier sweep over a fixed vertex set: per lambda, the vertex
/// maximizing the weighted payoff, Pareto-filtered.
pub fn frontier_from_vertices(vertices: &[VertexPayoff], lambdas: &[Vec<f64>]) -> RegionFrontier {
    let points = lambdas
        .iter()
        .map(|lambda| {
            let mut best = 0usize;
            let mut best_w = f64::NEG_INFINITY;
            for (v, vertex) in vertices.iter().enumerate() {
                let w: f64 = lambda.iter().zip(&vertex.payoff).map(|(l, u)| l * u).sum();
                if w > best_w {
                    best_w = w;
                    best = v;
                }
            }
            FrontierPoint {
                lambda: lambda.clone(),
                payoff: vertices[best].payoff.clone(),
                profile: vertices[best].profile.clone(),
            }
        })
        .collect();
    RegionFrontier {
        points: pareto_filter(points),
    }
}

/// Drops points strictly dominated by another point and exact duplicates.
pub fn pareto_filter(points: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    let dominated = |p: &[f64], q: &[f64]| {
        q.iter().zip(p).all(|(a, b)| a >= b) && q.iter().zip(p).any(|(a, b)| a > b)
    };
    let mut kept: Vec<FrontierPoint> = Vec::new();
    for p in points {
        if kept
            .iter()
            .any(|k| dominated(&p.payoff, &k.payoff) || k.payoff == p.payoff)
        {
            continue;
        }
        kept.retain(|k| !dominated(&k.payoff, &p.payoff));
        kept.push(p);
    }
    kept
}

// ---------------------------------------------------------------------------
// QoS mixture linear program
// ---------------------------------------------------------------------------

/// Maximizes the weighted payoff over lotteries on `vertices` subject to
/// per-user QoS floors:
///
/// ```text
/// max_x  sum_v x_v (lambda · payoff_v)
/// s.t.   sum_v x_v payoff_v[i] >= qos[i]  for all i,   x in simplex
/// ```
///
/// Optima are generally non-unique (faces of tied vertices); the result is
/// canonicalized by a second lexicographic stage that, taking users in order
/// of decreasing QoS demand, grants each the least utility above its floor
/// consistent with optimality. Zero-probability atoms are pruned.
pub fn qos_mixture_lp(
    vertices: &[VertexPayoff],
    lambda: &[f64],
    qos: &[f64],
) -> Result<AuxiliaryMix, RegionError> {
    if vertices.is_empty() {
        return Err(RegionError::Invalid("no vertices supplied".into()));
    }
    let k = vertices[0].payoff.len();
    if lambda.len() != k || qos.len() != k {
        return Err(RegionError::Invalid(
            "lambda/qos dimension mismatch".into(),
        ));
    }
    let n = vertices.len();
    let objective: Vec<f64> = vertices
        .iter()
        .map(|v| lambda.iter().zip(&v.payoff).map(|(l, u)| l * u).sum())
        .collect();
    let payoff_row = |i: usize| -> Vec<f64> { vertices.iter().map(|v| v.payoff[i]).collect() };
    let mut rows: Vec<(Vec<f64>, Cmp, f64)> = vec![(vec![1.0; n], Cmp::Eq, 1.0)];
    for (i, &q) in qos.iter().enumerate() {
        rows.push((payoff_row(i), Cmp::Ge, q));
    }

    let stage1 = solve(&LinearProgram {
        objective: objective.clone(),
        rows: rows.clone(),
    })?;
    let (mut x, w_star) = match stage1 {
        LpOutcome::Optimal { x, value } => (x, value),
        LpOutcome::Infeasible => return Err(RegionError::InfeasibleQos),
        LpOutcome::Unbounded => {
            return Err(RegionError::Invalid("mixture LP cannot be unbounded".into()))
        }
    };

    // Lexicographic canonicalization on the optimal face.
    let slack = 1e-9 * (1.0 + w_star.abs());
    rows.push((objective.clone(), Cmp::Ge, w_star - slack));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| qos[b].partial_cmp(&qos[a]).unwrap().then(a.cmp(&b)));
    for &i in &order {
        let row = payoff_row(i);
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        match solve(&LinearProgram {
            objective: neg,
            rows: rows.clone(),
        })? {
            LpOutcome::Optimal { x: xi, value } => {
                let ui = -value;
                rows.push((row, Cmp::Le, ui + 1e-9 * (1.0 + ui.abs())));
                x = xi;
            }
            // the face is never empty or unbounded: stage 1 solved over it
            _ => break,
        }
    }

    // weights below the pinning slack scale are numerical ghosts, not atoms
    let mut atoms: Vec<(f64, DecisionProfile)> = x
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-7)
        .map(|(v, &p)| (p, vertices[v].profile.clone()))
        .collect();
    let total: f64 = atoms.iter().map(|(p, _)| p).sum();
    atoms.iter_mut().for_each(|(p, _)| *p /= total);
    Ok(AuxiliaryMix { atoms })
}

// ---------------------------------------------------------------------------
// Factorization check
// ---------------------------------------------------------------------------

/// Comparison of a simulated run against the analytic joint law.
#[derive(Debug, Clone)]
pub struct FactorizationReport {
    /// Total-variation distance between the empirical and analytic joint
    /// distributions over (state, action profile).
    pub tv_distance: f64,
    /// Per-user time averages over the simulated blocks.
    pub time_avg: Vec<f64>,
    /// Standard errors of the time averages.
    pub se: Vec<f64>,
    /// Per-user linear images `sum Q(a0,a) u_i(a0,a)` of the analytic law.
    pub expected: Vec<f64>,
    pub n_blocks: usize,
}

const PURPOSE_FACTORIZATION: u64 = 0xFAC7;

/// Simulates `n_blocks` i.i.d. blocks of a mixture (draw the lottery, then
/// state, observations and table lookups), tallies the empirical joint
/// frequency over (state, joint action) and compares it with the analytic
/// factorized law; also reports time-average utilities against the linear
/// image of the analytic law.
pub fn factorization_check(
    problem: &TeamProblem,
    mix: &AuxiliaryMix,
    n_blocks: usize,
    seed: u64,
) -> Result<FactorizationReport, RegionError> {
    let k = problem.k();
    let states = problem.states();
    let action_sizes = problem.action_sizes();
    let n_joint: usize = action_sizes.iter().product();
    let cells = states
        .len()
        .checked_mul(n_joint)
        .filter(|&c| c <= 50_000_000)
        .ok_or(RegionError::JointTooLarge(usize::MAX))?;

    // analytic law via per-atom pushforwards
    let mut q = vec![0.0f64; cells];
    let mut pushes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for (pv, profile) in &mix.atoms {
        for a0 in 0..states.len() {
            let rho = states.prob(a0);
            if rho == 0.0 {
                continue;
            }
            for j in 0..k {
                pushforward_into(problem, &profile.tables[j], j, a0, &mut pushes[j]);
            }
            // distribute the product measure over joint action cells
            fn spread(
                pushes: &[Vec<(usize, f64)>],
                action_sizes: &[usize],
                depth: usize,
                idx: usize,
                w: f64,
                out: &mut [f64],
                base: usize,
            ) {
                if depth == pushes.len() {
                    out[base + idx] += w;
                    return;
                }
                for &(a, p) in &pushes[depth] {
                    spread(
                        pushes,
                        action_sizes,
                        depth + 1,
                        idx * action_sizes[depth] + a,
                        w * p,
                        out,
                        base,
                    );
                }
            }
            spread(
                &pushes,
                &action_sizes,
                0,
                0,
                pv * rho,
                &mut q,
                a0 * n_joint,
            );
        }
    }

    // simulate
    let cum_rho: Vec<f64> = states
        .probs()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let cum_mix: Vec<f64> = mix
        .atoms
        .iter()
        .scan(0.0, |acc, (p, _)| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut counts = vec![0u64; cells];
    let mut samples: Vec<Vec<f64>> = vec![vec![0.0; n_blocks]; k];
    let mut powers: Vec<&[f64]> = vec![&[]; k];
    let mut u = vec![0.0; k];
    for block in 0..n_blocks {
        let mut rng = block_rng(seed, PURPOSE_FACTORIZATION, block as u64);
        let a0 = draw_cum(&cum_rho, rng.gen());
        let v = draw_cum(&cum_mix, rng.gen());
        let profile = &mix.atoms[v].1;
        let mut joint = 0usize;
        for i in 0..k {
            let s = problem.observation.tx(i).sample_obs(states, a0, &mut rng);
            let a = profile.tables[i][s];
            joint = joint * action_sizes[i] + a;
            powers[i] = problem.actions[i].action(a);
        }
        counts[a0 * n_joint + joint] += 1;
        utilities_into(&problem.utility, &problem.scenario, states.gains(a0), &powers, &mut u);
        for i in 0..k {
            samples[i][block] = u[i];
        }
    }

    let mut tv = 0.0;
    let mut expected = vec![0.0; k];
    let mut joint_digits = vec![0usize; k];
    for a0 in 0..states.len() {
        joint_digits.iter_mut().for_each(|x| *x = 0);
        let gains = states.gains(a0);
        let mut joint = 0usize;
        loop {
            let cell = a0 * n_joint + joint;
            let qv = q[cell];
            tv += (counts[cell] as f64 / n_blocks as f64 - qv).abs();
            if qv > 0.0 {
                for i in 0..k {
                    powers[i] = problem.actions[i].action(joint_digits[i]);
                }
                utilities_into(&problem.utility, &problem.scenario, gains, &powers, &mut u);
                for i in 0..k {
                    expected[i] += qv * u[i];
                }
            }
            if !increment(&mut joint_digits, &action_sizes) {
                break;
            }
            joint += 1;
        }
    }
    let (mut time_avg, mut se) = (vec![0.0; k], vec![0.0; k]);
    for i in 0..k {
        let (m, s) = mean_and_se(&samples[i]);
        time_avg[i] = m;
        se[i] = s;
    }
    Ok(FactorizationReport {
        tv_distance: 0.5 * tv,
        time_avg,
        se,
        expected,
        n_blocks,
    })
}

fn draw_cum(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}
