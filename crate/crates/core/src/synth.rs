//! Expected-utility evaluation and sequential best-response synthesis of
//! decision functions.
//!
//! A [`DecisionProfile`] holds one lookup table per transmitter mapping each
//! observation index to an action index. The expected weighted utility of a
//! profile is
//!
//! ```text
//! W = sum_{a0, s} rho0(a0) prod_i T_i(s_i|a0) w(a0, f_1(s_1), ..., f_K(s_K))
//! ```
//!
//! Synthesis updates one transmitter at a time in round-robin order, setting
//! every table entry to the action maximizing the best-response score
//!
//! ```text
//! omega_i(s_i, a_i) = sum_a0 rho0(a0) T_i(s_i|a0)
//!                     sum_{s_-i} T_-i(s_-i|a0) w(a0, ..., a_i, ...)
//! ```
//!
//! Since `W = sum_{s_i} omega_i(s_i, f_i(s_i))` and `omega_i` does not
//! depend on `f_i`, every single-entry argmax update is a coordinate ascent
//! step: `W` never decreases and the iteration reaches a fixed point on the
//! finite profile lattice.
//!
//! Two evaluation backends are provided. `Reference` runs the sums exactly
//! as written above and counts innermost iterations (`|A0|·|S|·sum_k |A_k|`
//! per sweep). `Cached` pushes each opponent's observation law through its
//! table first, which collapses the `s_-i` sum onto the distinct opponent
//! actions; it matches the reference within 1e-12 and is the default.

use crate::model::weighted_utility;
use crate::problem::TeamProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("decision profile invalid: {0}")]
    InvalidProfile(String),
    #[error("synthesis options invalid: {0}")]
    InvalidOptions(String),
}

/// One lookup table per transmitter: observation index to action index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionProfile {
    pub tables: Vec<Vec<usize>>,
}

impl DecisionProfile {
    /// Every observation maps to the full-power action.
    pub fn full_power(problem: &TeamProblem) -> Self {
        let tables = (0..problem.k())
            .map(|i| vec![problem.actions[i].full_power_index(); problem.observation.n_obs(i)])
            .collect();
        Self { tables }
    }

    /// Every observation of transmitter `i` maps to `action_indices[i]`.
    pub fn constant(problem: &TeamProblem, action_indices: &[usize]) -> Self {
        let tables = (0..problem.k())
            .map(|i| vec![action_indices[i]; problem.observation.n_obs(i)])
            .collect();
        Self { tables }
    }

    pub fn random<R: Rng>(problem: &TeamProblem, rng: &mut R) -> Self {
        let tables = (0..problem.k())
            .map(|i| {
                (0..problem.observation.n_obs(i))
                    .map(|_| rng.gen_range(0..problem.actions[i].len()))
                    .collect()
            })
            .collect();
        Self { tables }
    }

    pub fn validate(&self, problem: &TeamProblem) -> Result<(), SynthError> {
        if self.tables.len() != problem.k() {
            return Err(SynthError::InvalidProfile(format!(
                "{} tables for {} transmitters",
                self.tables.len(),
                problem.k()
            )));
        }
        for (i, t) in self.tables.iter().enumerate() {
            if t.len() != problem.observation.n_obs(i) {
                return Err(SynthError::InvalidProfile(format!(
                    "table {i} has {} entries, expected {}",
                    t.len(),
                    problem.observation.n_obs(i)
                )));
            }
            if t.iter().any(|&a| a >= problem.actions[i].len()) {
                return Err(SynthError::InvalidProfile(format!(
                    "table {i} holds an out-of-range action index"
                )));
            }
        }
        Ok(())
    }

    /// Squared L2 distance between the power tables of transmitter `i`
    /// under two profiles (used by the epsilon stopping rule).
    pub fn power_distance_sq(&self, other: &Self, problem: &TeamProblem, i: usize) -> f64 {
        let alphabet = &problem.actions[i];
        self.tables[i]
            .iter()
            .zip(&other.tables[i])
            .map(|(&a, &b)| {
                alphabet
                    .action(a)
                    .iter()
                    .zip(alphabet.action(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Which evaluation path computes expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalBackend {
    /// Pushforward-cached sums (fast, default).
    #[default]
    Cached,
    /// Naive sums exactly as written, with an inner-iteration counter.
    Reference,
}

// ---------------------------------------------------------------------------
// Pushforward helpers
// ---------------------------------------------------------------------------

/// Nonzero entries of `nu_j(a|a0) = sum_{s: f_j(s)=a} T_j(s|a0)`.
pub(crate) fn pushforward_into(
    problem: &TeamProblem,
    table: &[usize],
    j: usize,
    a0: usize,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    let tx = problem.observation.tx(j);
    let states = problem.states();
    if tx.is_deterministic() {
        out.push((table[tx.project(states, a0)], 1.0));
        return;
    }
    tx.for_each_obs(states, a0, |s, p| {
        let a = table[s];
        match out.iter_mut().find(|e| e.0 == a) {
            Some(e) => e.1 += p,
            None => out.push((a, p)),
        }
    });
}

/// Sums `weight * prod_j nu_j * w(a0, a)` over the product of pushforward
/// supports for transmitters `depth..K`, with earlier slots already fixed
/// in `powers`.
fn joint_expectation<'a>(
    problem: &'a TeamProblem,
    gains: &[f64],
    pushes: &[Vec<(usize, f64)>],
    powers: &mut Vec<&'a [f64]>,
    depth: usize,
    weight: f64,
) -> f64 {
    if depth == pushes.len() {
        return weight * weighted_utility(&problem.utility, &problem.scenario, gains, powers);
    }
    let mut acc = 0.0;
    for &(a, p) in &pushes[depth] {
        powers[depth] = problem.actions[depth].action(a);
        acc += joint_expectation(problem, gains, pushes, powers, depth + 1, weight * p);
    }
    acc
}

fn joint_expectation_vec<'a>(
    problem: &'a TeamProblem,
    gains: &[f64],
    pushes: &[Vec<(usize, f64)>],
    powers: &mut Vec<&'a [f64]>,
    depth: usize,
    weight: f64,
    scratch: &mut [f64],
    acc: &mut [f64],
) {
    if depth == pushes.len() {
        crate::model::utilities_into(&problem.utility, &problem.scenario, gains, powers, scratch);
        for (a, &u) in acc.iter_mut().zip(scratch.iter()) {
            *a += weight * u;
        }
        return;
    }
    for idx in 0..pushes[depth].len() {
        let (a, p) = pushes[depth][idx];
        powers[depth] = problem.actions[depth].action(a);
        joint_expectation_vec(problem, gains, pushes, powers, depth + 1, weight * p, scratch, acc);
    }
}

// ---------------------------------------------------------------------------
// Expected utilities
// ---------------------------------------------------------------------------

/// Exact expected weighted utility of a profile (cached backend).
pub fn expected_weighted_utility(problem: &TeamProblem, profile: &DecisionProfile) -> f64 {
    let k = problem.k();
    let states = problem.states();
    let mut pushes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut powers: Vec<&[f64]> = vec![&[]; k];
    let mut total = 0.0;
    for a0 in 0..states.len() {
        let rho = states.prob(a0);
        if rho == 0.0 {
            continue;
        }
        for j in 0..k {
            pushforward_into(problem, &profile.tables[j], j, a0, &mut pushes[j]);
        }
        total += rho * joint_expectation(problem, states.gains(a0), &pushes, &mut powers, 0, 1.0);
    }
    total
}

/// Exact per-transmitter expected utilities of a profile.
pub fn expected_utilities(problem: &TeamProblem, profile: &DecisionProfile) -> Vec<f64> {
    let k = problem.k();
    let states = problem.states();
    let mut pushes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut powers: Vec<&[f64]> = vec![&[]; k];
    let mut scratch = vec![0.0; k];
    let mut per_state = vec![0.0; k];
    let mut total = vec![0.0; k];
    for a0 in 0..states.len() {
        let rho = states.prob(a0);
        if rho == 0.0 {
            continue;
        }
        for j in 0..k {
            pushforward_into(problem, &profile.tables[j], j, a0, &mut pushes[j]);
        }
        per_state.iter_mut().for_each(|x| *x = 0.0);
        joint_expectation_vec(
            problem,
            states.gains(a0),
            &pushes,
            &mut powers,
            0,
            1.0,
            &mut scratch,
            &mut per_state,
        );
        for (t, &v) in total.iter_mut().zip(&per_state) {
            *t += rho * v;
        }
    }
    total
}

/// Best-response score `omega_i(s_i, a_i)` of a single entry.
pub fn best_response_score(
    problem: &TeamProblem,
    profile: &DecisionProfile,
    i: usize,
    s_i: usize,
    a_i: usize,
) -> f64 {
    let rows = best_response_rows(problem, profile, i);
    rows[s_i][a_i]
}

/// Scores of every `(s_i, a_i)` pair for transmitter `i` against the other
/// transmitters' current tables (cached backend).
pub fn best_response_rows(
    problem: &TeamProblem,
    profile: &DecisionProfile,
    i: usize,
) -> Vec<Vec<f64>> {
    let k = problem.k();
    let states = problem.states();
    let n_obs = problem.observation.n_obs(i);
    let n_act = problem.actions[i].len();
    let mut rows = vec![vec![0.0; n_act]; n_obs];
    // pushforwards of the opponents, in transmitter order with slot i unused
    let mut pushes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut powers: Vec<&[f64]> = vec![&[]; k];
    let mut gain_per_action = vec![0.0; n_act];
    for a0 in 0..states.len() {
        let rho = states.prob(a0);
        if rho == 0.0 {
            continue;
        }
        for j in 0..k {
            if j != i {
                pushforward_into(problem, &profile.tables[j], j, a0, &mut pushes[j]);
            }
        }
        gain_per_action.iter_mut().for_each(|x| *x = 0.0);
        accumulate_candidate_values(
            problem,
            states.gains(a0),
            &pushes,
            &mut powers,
            i,
            0,
            1.0,
            &mut gain_per_action,
        );
        let tx = problem.observation.tx(i);
        tx.for_each_obs(states, a0, |s, t| {
            let scale = rho * t;
            let row = &mut rows[s];
            for (r, &g) in row.iter_mut().zip(&gain_per_action) {
                *r += scale * g;
            }
        });
    }
    rows
}

/// Fills `out[a_i] += weight * prod nu_j * w(...)` over opponents'
/// pushforward products, sweeping every candidate action of slot `i` at the
/// innermost level.
#[allow(clippy::too_many_arguments)]
fn accumulate_candidate_values<'a>(
    problem: &'a TeamProblem,
    gains: &[f64],
    pushes: &[Vec<(usize, f64)>],
    powers: &mut Vec<&'a [f64]>,
    i: usize,
    depth: usize,
    weight: f64,
    out: &mut [f64],
) {
    if depth == pushes.len() {
        for (a_i, o) in out.iter_mut().enumerate() {
            powers[i] = problem.actions[i].action(a_i);
            *o += weight * weighted_utility(&problem.utility, &problem.scenario, gains, powers);
        }
        return;
    }
    if depth == i {
        accumulate_candidate_values(problem, gains, pushes, powers, i, depth + 1, weight, out);
        return;
    }
    for idx in 0..pushes[depth].len() {
        let (a, p) = pushes[depth][idx];
        powers[depth] = problem.actions[depth].action(a);
        accumulate_candidate_values(problem, gains, pushes, powers, i, depth + 1, weight * p, out);
    }
}

// ---------------------------------------------------------------------------
// Reference (dense) backend
// ---------------------------------------------------------------------------

/// Naive-sum evaluation paths. These iterate the full `(a0, s)` ranges of
/// the defining formulas and count innermost iterations, serving both as an
/// independently structured cross-check for the cached backend and as the
/// instrumented path for complexity accounting.
pub mod reference {
    use super::*;

    /// `W` by direct summation over all `(a0, s_1, ..., s_K)`.
    pub fn expected_weighted_utility_dense(
        problem: &TeamProblem,
        profile: &DecisionProfile,
        ops: &mut u64,
    ) -> f64 {
        let k = problem.k();
        let states = problem.states();
        let obs_sizes: Vec<usize> = problem.obs_sizes();
        let mut powers: Vec<&[f64]> = vec![&[]; k];
        let mut s = vec![0usize; k];
        let mut total = 0.0;
        for a0 in 0..states.len() {
            let rho = states.prob(a0);
            s.iter_mut().for_each(|x| *x = 0);
            loop {
                *ops += 1;
                let mut p = rho;
                for j in 0..k {
                    if p == 0.0 {
                        break;
                    }
                    p *= problem.observation.tx(j).prob(states, s[j], a0);
                }
                if p != 0.0 {
                    for j in 0..k {
                        powers[j] = problem.actions[j].action(profile.tables[j][s[j]]);
                    }
                    total += p
                        * weighted_utility(
                            &problem.utility,
                            &problem.scenario,
                            states.gains(a0),
                            &powers,
                        );
                }
                if !increment(&mut s, &obs_sizes) {
                    break;
                }
            }
        }
        total
    }

    /// `omega_i` rows by direct summation over all `(a0, s_-i)` per entry.
    pub fn best_response_rows_dense(
        problem: &TeamProblem,
        profile: &DecisionProfile,
        i: usize,
        ops: &mut u64,
    ) -> Vec<Vec<f64>> {
        let k = problem.k();
        let states = problem.states();
        let obs_sizes = problem.obs_sizes();
        let others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
        let other_sizes: Vec<usize> = others.iter().map(|&j| obs_sizes[j]).collect();
        let n_obs = obs_sizes[i];
        let n_act = problem.actions[i].len();
        let mut rows = vec![vec![0.0; n_act]; n_obs];
        let mut powers: Vec<&[f64]> = vec![&[]; k];
        let mut s_others = vec![0usize; others.len()];
        for (s_i, row) in rows.iter_mut().enumerate() {
            for (a_i, cell) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a0 in 0..states.len() {
                    let base = states.prob(a0) * problem.observation.tx(i).prob(states, s_i, a0);
                    s_others.iter_mut().for_each(|x| *x = 0);
                    loop {
                        *ops += 1;
                        let mut p = base;
                        for (pos, &j) in others.iter().enumerate() {
                            if p == 0.0 {
                                break;
                            }
                            p *= problem.observation.tx(j).prob(states, s_others[pos], a0);
                        }
                        if p != 0.0 {
                            for (pos, &j) in others.iter().enumerate() {
                                powers[j] =
                                    problem.actions[j].action(profile.tables[j][s_others[pos]]);
                            }
                            powers[i] = problem.actions[i].action(a_i);
                            acc += p
                                * weighted_utility(
                                    &problem.utility,
                                    &problem.scenario,
                                    states.gains(a0),
                                    &powers,
                                );
                        }
                        if !increment(&mut s_others, &other_sizes) {
                            break;
                        }
                    }
                }
                *cell = acc;
            }
        }
        rows
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
}

// ---------------------------------------------------------------------------
// Sequential best-response synthesis
// ---------------------------------------------------------------------------

/// Synthesis controls.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    /// Optional L2 stopping threshold on per-transmitter power tables; the
    /// exact fixed-point test (no table entry changed over a sweep) is
    /// always active.
    pub eps: Option<f64>,
    /// Hard cap on sweeps.
    pub iter_max: usize,
    /// Recompute `W` from scratch after every single-entry update and store
    /// it in [`SynthReport::update_trace`] (slow; diagnostics and tests).
    pub record_updates: bool,
    pub backend: EvalBackend,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            eps: None,
            iter_max: 200,
            record_updates: false,
            backend: EvalBackend::Cached,
        }
    }
}

/// Outcome of one synthesis run.
#[derive(Debug, Clone)]
pub struct SynthReport {
    pub profile: DecisionProfile,
    /// `W` of the initial profile followed by `W` after each sweep.
    pub w_trace: Vec<f64>,
    /// `W` after every single-entry update, when recorded.
    pub update_trace: Option<Vec<f64>>,
    /// Sweeps executed.
    pub sweeps: usize,
    pub converged: bool,
    /// Wall-clock seconds per sweep (not part of any serialized artifact).
    pub sweep_seconds: Vec<f64>,
    /// Innermost-iteration count per sweep under the reference backend.
    pub ops_per_sweep: Option<Vec<u64>>,
}

impl SynthReport {
    pub fn w_final(&self) -> f64 {
        *self.w_trace.last().expect("trace never empty")
    }
}

fn eval_w(problem: &TeamProblem, profile: &DecisionProfile, backend: EvalBackend) -> f64 {
    match backend {
        EvalBackend::Cached => expected_weighted_utility(problem, profile),
        EvalBackend::Reference => {
            let mut ops = 0u64;
            reference::expected_weighted_utility_dense(problem, profile, &mut ops)
        }
    }
}

/// Round-robin sequential best-response over decision functions.
///
/// Each transmitter in turn replaces every table entry with the score
/// argmax (ties to the lowest action index, i.e. least power). Terminates at
/// a fixed point, under the optional epsilon rule, or at `iter_max`.
pub fn synthesize(
    problem: &TeamProblem,
    init: &DecisionProfile,
    opts: &SynthOptions,
) -> Result<SynthReport, SynthError> {
    init.validate(problem)?;
    if opts.iter_max < 1 {
        return Err(SynthError::InvalidOptions("iter_max must be >= 1".into()));
    }
    if let Some(e) = opts.eps {
        if !(e > 0.0) {
            return Err(SynthError::InvalidOptions("eps must be positive".into()));
        }
    }
    let k = problem.k();
    let mut profile = init.clone();
    let mut w_trace = vec![eval_w(problem, &profile, opts.backend)];
    let mut update_trace = opts.record_updates.then(Vec::new);
    let mut sweep_seconds = Vec::new();
    let mut ops_per_sweep = matches!(opts.backend, EvalBackend::Reference).then(Vec::new);
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < opts.iter_max {
        let start = Instant::now();
        let before = profile.clone();
        let mut changed = false;
        let mut sweep_ops = 0u64;
        for i in 0..k {
            let rows = match opts.backend {
                EvalBackend::Cached => best_response_rows(problem, &profile, i),
                EvalBackend::Reference => {
                    reference::best_response_rows_dense(problem, &profile, i, &mut sweep_ops)
                }
            };
            for (s, row) in rows.iter().enumerate() {
                let mut best = 0usize;
                for (a, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = a;
                    }
                }
                if profile.tables[i][s] != best {
                    profile.tables[i][s] = best;
                    changed = true;
                }
                if let Some(trace) = update_trace.as_mut() {
                    trace.push(eval_w(problem, &profile, opts.backend));
                }
            }
        }
        sweeps += 1;
        w_trace.push(eval_w(problem, &profile, opts.backend));
        sweep_seconds.push(start.elapsed().as_secs_f64());
        if let Some(ops) = ops_per_sweep.as_mut() {
            ops.push(sweep_ops);
        }
        if !changed {
            converged = true;
            break;
        }
        if let Some(eps) = opts.eps {
            let all_small = (0..k)
                .all(|i| profile.power_distance_sq(&before, problem, i).sqrt() < eps);
            if all_small {
                converged = true;
                break;
            }
        }
    }
    Ok(SynthReport {
        profile,
        w_trace,
        update_trace,
        sweeps,
        converged,
        sweep_seconds,
        ops_per_sweep,
    })
}

/// Best of `n_starts` synthesis runs: the supplied initial profile first,
/// then `n_starts - 1` random initializations drawn deterministically from
/// `seed`. Ties keep the earliest run.
pub fn multistart_synthesize(
    problem: &TeamProblem,
    init: &DecisionProfile,
    opts: &SynthOptions,
    n_starts: usize,
    seed: u64,
) -> Result<SynthReport, SynthError> {
    if n_starts < 1 {
        return Err(SynthError::InvalidOptions("n_starts must be >= 1".into()));
    }
    let mut best = synthesize(problem, init, opts)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 1..n_starts {
        let start = DecisionProfile::random(problem, &mut rng);
        let report = synthesize(problem, &start, opts)?;
        if report.w_final() > best.w_final() {
            best = report;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        symmetric_gain_means, NetRate, Scenario, ScenarioConfig, Topology, UtilityKind,
        UtilitySpec,
    };
    use crate::observe::{build_observation, ChannelModel, CsiStructure};
    use crate::testkit;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn small_problem(
        k: usize,
        cells: usize,
        levels: usize,
        structure: CsiStructure,
        kind: UtilityKind,
    ) -> TeamProblem {
        let p_max = 0.1;
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::Interference,
            k,
            bands: 1,
            p_max,
            p_total: p_max,
            noise: 0.01,
            p0: 0.0,
            r0: 1e6,
            gain_means: symmetric_gain_means(k, 1, 1.0, 10f64.powf(-0.5)),
            power_levels: crate::model::uniform_power_grid(levels, p_max),
        })
        .unwrap();
        let ch = ChannelModel::quantized(&sc, cells).unwrap();
        let obs = build_observation(structure, &sc, &ch).unwrap();
        let spec = UtilitySpec::sum_objective(kind, NetRate::Outage { c: 1.0 }, k);
        TeamProblem::with_shared_actions(sc, ch, obs, spec).unwrap()
    }

    // ------------------------------------------------- expected utilities

    #[test]
    fn degenerate_alphabets_reduce_to_instantaneous() {
        let p = small_problem(2, 1, 2, CsiStructure::Constant, UtilityKind::EnergyEfficiency);
        assert_eq!(p.states().len(), 1);
        let profile = DecisionProfile::constant(&p, &[1, 1]);
        let powers: Vec<&[f64]> = vec![p.actions[0].action(1), p.actions[1].action(1)];
        let w = weighted_utility(&p.utility, &p.scenario, p.states().gains(0), &powers);
        assert_eq!(expected_weighted_utility(&p, &profile), w);
    }

    #[test]
    fn constant_csi_two_states_averages() {
        // single transmitter, one link with two equiprobable cells
        let p = small_problem(1, 2, 2, CsiStructure::Constant, UtilityKind::ShannonRate);
        assert_eq!(p.states().len(), 2);
        let profile = DecisionProfile::constant(&p, &[1]);
        let powers: Vec<&[f64]> = vec![p.actions[0].action(1)];
        let w0 = weighted_utility(&p.utility, &p.scenario, p.states().gains(0), &powers);
        let w1 = weighted_utility(&p.utility, &p.scenario, p.states().gains(1), &powers);
        assert!(approx(
            expected_weighted_utility(&p, &profile),
            0.5 * (w0 + w1),
            1e-12
        ));
    }

    #[test]
    fn cached_matches_nested_loop_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        for _ in 0..25 {
            let p = testkit::random_problem(&mut rng, &testkit::RandomProblemOpts::small());
            let profile = DecisionProfile::random(&p, &mut rng);
            let fast = expected_weighted_utility(&p, &profile);
            let oracle = testkit::oracle_expected_weighted_utility(&p, &profile);
            assert!(approx(fast, oracle, 1e-12), "fast {fast} oracle {oracle}");
        }
    }

    #[test]
    fn backends_bit_compatible() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..15 {
            let p = testkit::random_problem(&mut rng, &testkit::RandomProblemOpts::small());
            let profile = DecisionProfile::random(&p, &mut rng);
            let mut ops = 0u64;
            let dense = reference::expected_weighted_utility_dense(&p, &profile, &mut ops);
            let cached = expected_weighted_utility(&p, &profile);
            assert!(approx(dense, cached, 1e-12));
            for i in 0..p.k() {
                let rd = reference::best_response_rows_dense(&p, &profile, i, &mut ops);
                let rc = best_response_rows(&p, &profile, i);
                for (a, b) in rd.iter().flatten().zip(rc.iter().flatten()) {
                    assert!(approx(*a, *b, 1e-12));
                }
            }
        }
    }

    // ---------------------------------------------------- response scores

    #[test]
    fn single_transmitter_score_is_direct_expectation() {
        let p = small_problem(1, 3, 3, CsiStructure::Individual, UtilityKind::EnergyEfficiency);
        let profile = DecisionProfile::full_power(&p);
        let states = p.states();
        for s in 0..p.observation.n_obs(0) {
            for a in 0..p.actions[0].len() {
                let mut expect = 0.0;
                for a0 in 0..states.len() {
                    let t = p.observation.tx(0).prob(states, s, a0);
                    if t > 0.0 {
                        let powers: Vec<&[f64]> = vec![p.actions[0].action(a)];
                        expect += states.prob(a0)
                            * t
                            * weighted_utility(&p.utility, &p.scenario, states.gains(a0), &powers);
                    }
                }
                assert!(approx(best_response_score(&p, &profile, 0, s, a), expect, 1e-12));
            }
        }
    }

    #[test]
    fn scores_summed_along_profile_reconstruct_w() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..10 {
            let p = testkit::random_problem(&mut rng, &testkit::RandomProblemOpts::small());
            let profile = DecisionProfile::random(&p, &mut rng);
            let w = expected_weighted_utility(&p, &profile);
            for i in 0..p.k() {
                let rows = best_response_rows(&p, &profile, i);
                let sum: f64 = rows
                    .iter()
                    .enumerate()
                    .map(|(s, row)| row[profile.tables[i][s]])
                    .sum();
                assert!(approx(sum, w, 1e-12), "i={i} sum={sum} w={w}");
            }
        }
    }

    #[test]
    fn zero_utility_gives_zero_scores() {
        // r0 = 0 kills every energy-efficiency value
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::Interference,
            k: 2,
            bands: 1,
            p_max: 0.1,
            p_total: 0.1,
            noise: 0.01,
            p0: 0.0,
            r0: 0.0,
            gain_means: symmetric_gain_means(2, 1, 1.0, 0.5),
            power_levels: crate::model::uniform_power_grid(2, 0.1),
        })
        .unwrap();
        let ch = ChannelModel::quantized(&sc, 2).unwrap();
        let obs = build_observation(CsiStructure::Individual, &sc, &ch).unwrap();
        let spec =
            UtilitySpec::sum_objective(UtilityKind::EnergyEfficiency, NetRate::Outage { c: 1.0 }, 2);
        let p = TeamProblem::with_shared_actions(sc, ch, obs, spec).unwrap();
        let profile = DecisionProfile::full_power(&p);
        for i in 0..2 {
            for row in best_response_rows(&p, &profile, i) {
                assert!(row.iter().all(|&v| v == 0.0));
            }
        }
    }

    // ------------------------------------------------------------ synthesis

    #[test]
    fn single_agent_perfect_csi_is_per_state_argmax_in_one_sweep() {
        let p = small_problem(1, 4, 4, CsiStructure::Individual, UtilityKind::EnergyEfficiency);
        let report = synthesize(&p, &DecisionProfile::full_power(&p), &SynthOptions::default())
            .unwrap();
        assert!(report.converged);
        // one improving sweep plus the fixed-point confirmation sweep
        assert!(report.sweeps <= 2);
        let states = p.states();
        for s in 0..p.observation.n_obs(0) {
            // direct per-state argmax of expected utility given s
            let mut best = (0usize, f64::NEG_INFINITY);
            for a in 0..p.actions[0].len() {
                let mut v = 0.0;
                for a0 in 0..states.len() {
                    let t = p.observation.tx(0).prob(states, s, a0);
                    if t > 0.0 {
                        let powers: Vec<&[f64]> = vec![p.actions[0].action(a)];
                        v += states.prob(a0)
                            * t
                            * weighted_utility(&p.utility, &p.scenario, states.gains(a0), &powers);
                    }
                }
                if v > best.1 {
                    best = (a, v);
                }
            }
            assert_eq!(report.profile.tables[0][s], best.0);
        }
    }

    #[test]
    fn strong_interference_sum_rate_picks_single_transmitter_vertex() {
        // both direct and cross gains 1, binary power, no CSI: exhaustive
        // over the 4 constant profiles says one transmitter should stay off
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::Interference,
            k: 2,
            bands: 1,
            p_max: 1.0,
            p_total: 1.0,
            noise: 0.01,
            p0: 0.0,
            r0: 1.0,
            gain_means: symmetric_gain_means(2, 1, 1.0, 1.0),
            power_levels: vec![0.0, 1.0],
        })
        .unwrap();
        let ch = ChannelModel::quantized(&sc, 1).unwrap();
        let obs = build_observation(CsiStructure::Constant, &sc, &ch).unwrap();
        let spec = UtilitySpec::sum_objective(UtilityKind::ShannonRate, NetRate::Shannon, 2);
        let p = TeamProblem::with_shared_actions(sc, ch, obs, spec).unwrap();
        let report =
            synthesize(&p, &DecisionProfile::full_power(&p), &SynthOptions::default()).unwrap();
        // exhaustive over the four profiles
        let mut best = (f64::NEG_INFINITY, vec![0, 0]);
        for a1 in 0..2 {
            for a2 in 0..2 {
                let w = expected_weighted_utility(&p, &DecisionProfile::constant(&p, &[a1, a2]));
                if w > best.0 {
                    best = (w, vec![a1, a2]);
                }
            }
        }
        assert!(approx(report.w_final(), best.0, 1e-12));
        let chosen: Vec<usize> = report.profile.tables.iter().map(|t| t[0]).collect();
        assert_eq!(chosen.iter().filter(|&&a| a == 1).count(), 1, "{chosen:?}");
        assert_eq!(best.1.iter().filter(|&&a| a == 1).count(), 1);
    }

    #[test]
    fn w_nondecreasing_at_every_update_and_terminates() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let opts = SynthOptions {
            record_updates: true,
            ..SynthOptions::default()
        };
        for _ in 0..15 {
            let p = testkit::random_problem(&mut rng, &testkit::RandomProblemOpts::small());
            let init = DecisionProfile::random(&p, &mut rng);
            let report = synthesize(&p, &init, &opts).unwrap();
            assert!(report.converged);
            let trace = report.update_trace.as_ref().unwrap();
            let mut prev = report.w_trace[0];
            for &w in trace {
                assert!(
                    w >= prev - 1e-12 * prev.abs().max(1.0),
                    "W decreased: {prev} -> {w}"
                );
                prev = w;
            }
            for pair in report.w_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12 * pair[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn reference_backend_counts_match_remark_formula() {
        let mut rng = ChaCha12Rng::seed_from_u64(44);
        for _ in 0..5 {
            let p = testkit::random_problem(&mut rng, &testkit::RandomProblemOpts::tiny());
            let opts = SynthOptions {
                backend: EvalBackend::Reference,
                iter_max: 3,
                ..SynthOptions::default()
            };
            let report = synthesize(&p, &DecisionProfile::full_power(&p), &opts).unwrap();
            let a0 = p.states().len() as u64;
            let s_total: u64 = p.obs_sizes().iter().map(|&s| s as u64).product();
            let a_sum: u64 = p.action_sizes().iter().map(|&a| a as u64).sum();
            for &ops in report.ops_per_sweep.as_ref().unwrap() {
                assert_eq!(ops, a0 * s_total * a_sum);
            }
        }
    }

    #[test]
    fn epsilon_rule_stops_early() {
        let p = small_problem(2, 3, 3, CsiStructure::Individual, UtilityKind::EnergyEfficiency);
        // an epsilon larger than any possible table distance stops after the
        // first sweep
        let opts = SynthOptions {
            eps: Some(1e9),
            ..SynthOptions::default()
        };
        let report = synthesize(&p, &DecisionProfile::full_power(&p), &opts).unwrap();
        assert!(report.converged);
        assert_eq!(report.sweeps, 1);
    }

    // ----------------------------------------------------------- multistart

    #[test]
    fn multistart_single_start_identical_to_synthesize() {
        let p = small_problem(2, 3, 3, CsiStructure::Individual, UtilityKind::EnergyEfficiency);
        let init = DecisionProfile::full_power(&p);
        let opts = SynthOptions::default();
        let single = synthesize(&p, &init, &opts).unwrap();
        let multi = multistart_synthesize(&p, &init, &opts, 1, 9).unwrap();
        assert_eq!(single.profile, multi.profile);
        assert_eq!(single.w_trace, multi.w_trace);
    }

    #[test]
    fn multistart_monotone_in_start_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(45);
        for _ in 0..8 {
            let p = testkit::random_problem(&mut rng, &testkit::RandomProblemOpts::small());
            let init = DecisionProfile::full_power(&p);
            let opts = SynthOptions::default();
            let one = multistart_synthesize(&p, &init, &opts, 1, 7).unwrap();
            let twenty = multistart_synthesize(&p, &init, &opts, 20, 7).unwrap();
            assert!(twenty.w_final() >= one.w_final() - 1e-15);
        }
    }

    #[test]
    fn multistart_reaches_exhaustive_optimum_on_tiny_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(46);
        for _ in 0..8 {
            let p = testkit::random_problem(&mut rng, &testkit::RandomProblemOpts::tiny());
            let init = DecisionProfile::full_power(&p);
            let opts = SynthOptions::default();
            let report = multistart_synthesize(&p, &init, &opts, 20, 11).unwrap();
            let (w_star, _) = testkit::exhaustive_best(&p);
            assert!(report.w_final() <= w_star + 1e-12 * w_star.abs().max(1.0));
            assert!(
                approx(report.w_final(), w_star, 1e-9),
                "best-of-20 {} vs exhaustive {}",
                report.w_final(),
                w_star
            );
        }
    }
}
