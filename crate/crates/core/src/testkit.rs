//! Test support: random problem instances and independently structured
//! oracles.
//!
//! The oracles here deliberately avoid the pushforward evaluation path used
//! by the library: they expand the observation structure into dense
//! column-stochastic tables and run plain nested loops over joint
//! observation tuples, so they can serve as cross-checks for the fast path.

use crate::model::{
    symmetric_gain_means, uniform_power_grid, weighted_utility, NetRate, Scenario, ScenarioConfig,
    Topology, UtilityKind, UtilitySpec,
};
use crate::observe::{build_observation, ChannelModel, CsiStructure};
use crate::problem::TeamProblem;
use crate::synth::DecisionProfile;
use rand::Rng;

/// Size caps for random instance generation.
#[derive(Debug, Clone)]
pub struct RandomProblemOpts {
    pub max_k: usize,
    pub max_cells: usize,
    pub min_actions: usize,
    pub max_actions: usize,
    pub allow_mac: bool,
    /// Cap on the joint state count; cells shrink until it fits.
    pub max_states: usize,
    /// Cap on the deterministic-profile count (`prod |A_i|^|S_i|`), so the
    /// instance stays exhaustively searchable. `None` disables the cap.
    pub max_profiles: Option<f64>,
}

impl RandomProblemOpts {
    /// Instances small enough for nested-loop oracles.
    pub fn small() -> Self {
        Self {
            max_k: 3,
            max_cells: 4,
            min_actions: 2,
            max_actions: 4,
            allow_mac: true,
            max_states: 4096,
            max_profiles: None,
        }
    }

    /// Instances small enough for exhaustive profile search.
    pub fn tiny() -> Self {
        Self {
            max_k: 2,
            max_cells: 3,
            min_actions: 2,
            max_actions: 3,
            allow_mac: true,
            max_states: 256,
            max_profiles: Some(1e5),
        }
    }
}

/// Draws a random team problem within the caps. Deterministic in `rng`.
pub fn random_problem<R: Rng>(rng: &mut R, opts: &RandomProblemOpts) -> TeamProblem {
    loop {
        let k = rng.gen_range(1..=opts.max_k);
        let topology = if opts.allow_mac && rng.gen_bool(0.3) {
            Topology::MultipleAccess
        } else {
            Topology::Interference
        };
        let n_links = match topology {
            Topology::Interference => k * k,
            Topology::MultipleAccess => k,
        };
        let mut cells = rng.gen_range(2..=opts.max_cells);
        while (cells as f64).powi(n_links as i32) > opts.max_states as f64 && cells > 2 {
            cells -= 1;
        }
        if (cells as f64).powi(n_links as i32) > opts.max_states as f64 {
            continue;
        }
        let n_levels = rng.gen_range(opts.min_actions..=opts.max_actions);
        let p_max = 0.1;
        let direct = 0.5 + rng.gen::<f64>();
        let cross = 0.1 + 0.9 * rng.gen::<f64>();
        let gain_means = match topology {
            Topology::Interference => symmetric_gain_means(k, 1, direct, cross),
            Topology::MultipleAccess => (0..k).map(|_| 0.3 + rng.gen::<f64>()).collect(),
        };
        let scenario = Scenario::new(ScenarioConfig {
            topology,
            k,
            bands: 1,
            p_max,
            p_total: p_max,
            noise: 0.01,
            p0: if rng.gen_bool(0.5) { 0.01 } else { 0.0 },
            r0: 1.0,
            gain_means,
            power_levels: uniform_power_grid(n_levels, p_max),
        })
        .unwrap();
        let channel = ChannelModel::quantized(&scenario, cells).unwrap();
        let structure = match rng.gen_range(0..4) {
            0 => CsiStructure::Constant,
            1 => CsiStructure::Individual,
            2 => CsiStructure::Direct,
            _ => CsiStructure::Local,
        };
        let observation = build_observation(structure, &scenario, &channel).unwrap();
        let kind = if rng.gen_bool(0.5) {
            UtilityKind::EnergyEfficiency
        } else {
            UtilityKind::ShannonRate
        };
        let psi = match rng.gen_range(0..3) {
            0 => NetRate::PacketSuccess {
                m: rng.gen_range(2..=8),
            },
            1 => NetRate::Outage {
                c: 0.5 + rng.gen::<f64>(),
            },
            _ => NetRate::Shannon,
        };
        let mut weights: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.05).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let utility = UtilitySpec::new(kind, psi, weights).unwrap();
        let problem =
            TeamProblem::with_shared_actions(scenario, channel, observation, utility).unwrap();
        if let Some(cap) = opts.max_profiles {
            let log_profiles: f64 = problem
                .obs_sizes()
                .iter()
                .zip(problem.action_sizes())
                .map(|(&s, a)| s as f64 * (a as f64).ln())
                .sum();
            if log_profiles > cap.ln() {
                continue;
            }
        }
        return problem;
    }
}

/// Expected weighted utility by brute force: dense observation tables and a
/// nested sum over every joint observation tuple.
pub fn oracle_expected_weighted_utility(problem: &TeamProblem, profile: &DecisionProfile) -> f64 {
    let k = problem.k();
    let states = problem.states();
    let tables: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|i| problem.observation.dense_table(i, states))
        .collect();
    let obs_sizes: Vec<usize> = problem.obs_sizes();
    let mut total = 0.0;
    let mut s = vec![0usize; k];
    for a0 in 0..states.len() {
        loop {
            let mut p = states.prob(a0);
            for j in 0..k {
                p *= tables[j][s[j]][a0];
            }
            if p != 0.0 {
                let powers: Vec<&[f64]> = (0..k)
                    .map(|j| problem.actions[j].action(profile.tables[j][s[j]]))
                    .collect();
                total += p
                    * weighted_utility(&problem.utility, &problem.scenario, states.gains(a0), &powers);
            }
            if !incr(&mut s, &obs_sizes) {
                break;
            }
        }
    }
    total
}

/// Per-user expected utilities by the same brute-force route.
pub fn oracle_expected_utilities(problem: &TeamProblem, profile: &DecisionProfile) -> Vec<f64> {
    let k = problem.k();
    let states = problem.states();
    let tables: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|i| problem.observation.dense_table(i, states))
        .collect();
    let obs_sizes: Vec<usize> = problem.obs_sizes();
    let mut total = vec![0.0; k];
    let mut u = vec![0.0; k];
    let mut s = vec![0usize; k];
    for a0 in 0..states.len() {
        loop {
            let mut p = states.prob(a0);
            for j in 0..k {
                p *= tables[j][s[j]][a0];
            }
            if p != 0.0 {
                let powers: Vec<&[f64]> = (0..k)
                    .map(|j| problem.actions[j].action(profile.tables[j][s[j]]))
                    .collect();
                crate::model::utilities_into(
                    &problem.utility,
                    &problem.scenario,
                    states.gains(a0),
                    &powers,
                    &mut u,
                );
                for (t, &v) in total.iter_mut().zip(&u) {
                    *t += p * v;
                }
            }
            if !incr(&mut s, &obs_sizes) {
                break;
            }
        }
    }
    total
}

/// Exhaustive search over all deterministic profiles; panics if the profile
/// count does not fit in a u64 loop. Returns the best weighted utility and
/// an achieving profile.
pub fn exhaustive_best(problem: &TeamProblem) -> (f64, DecisionProfile) {
    let entries: Vec<(usize, usize)> = (0..problem.k())
        .flat_map(|i| (0..problem.observation.n_obs(i)).map(move |s| (i, s)))
        .collect();
    let radices: Vec<usize> = entries.iter().map(|&(i, _)| problem.actions[i].len()).collect();
    let count: f64 = radices.iter().map(|&r| (r as f64).ln()).sum();
    assert!(count <= (1e7f64).ln(), "too many profiles for exhaustive search");
    let mut digits = vec![0usize; entries.len()];
    let mut profile = DecisionProfile {
        tables: (0..problem.k())
            .map(|i| vec![0usize; problem.observation.n_obs(i)])
            .collect(),
    };
    let mut best_w = f64::NEG_INFINITY;
    let mut best = profile.clone();
    loop {
        for (pos, &(i, s)) in entries.iter().enumerate() {
            profile.tables[i][s] = digits[pos];
        }
        let w = crate::synth::expected_weighted_utility(problem, &profile);
        if w > best_w {
            best_w = w;
            best = profile.clone();
        }
        if !incr(&mut digits, &radices) {
            break;
        }
    }
    (best_w, best)
}

fn incr(digits: &mut [usize], radices: &[usize]) -> bool {
    for pos in (0..digits.len()).rev() {
        digits[pos] += 1;
        if digits[pos] < radices[pos] {
            return true;
        }
        digits[pos] = 0;
    }
    false
}
