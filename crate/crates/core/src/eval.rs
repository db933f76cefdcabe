//! Monte Carlo evaluation over continuous block-fading channels.
//!
//! Synthesized tables are computed on quantized alphabets but judged here on
//! the continuous channel: every block draws fresh per-link gains, each
//! transmitter forms its observation (projection, plus calibrated estimation
//! noise for the noisy structure, then quantization), looks up its action,
//! and utilities accrue with the true continuous gains. Baselines receive
//! the continuous gains directly.
//!
//! Reproducibility: gains and observation noise come from dedicated
//! counter-based per-block streams keyed by (seed, purpose, block), and
//! per-block results land in a preallocated table combined by pairwise
//! summation, so results are bit-identical for a given seed regardless of
//! worker count. Policies evaluated under the same seed see identical
//! fading draws (common random numbers), which the per-run draw fingerprint
//! makes checkable.

use crate::baselines::{bpc_cs_powers, full_power_powers, goodman_powers, iwfa_powers};
use crate::numeric::{block_rng, fnv1a_f64, mean_and_se, FNV_OFFSET};
use crate::observe::{LinkModel, LinkObsKind};
use crate::problem::TeamProblem;
use crate::synth::DecisionProfile;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

const PURPOSE_GAINS: u64 = 0x6A15;
const PURPOSE_OBS_NOISE: u64 = 0x0B5E;

/// A policy the harness can run on one block.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Synthesized decision functions over the problem's observation
    /// structure.
    Table { profile: DecisionProfile },
    /// Target-SINR channel inversion at `beta_star`.
    Goodman { beta_star: f64, max_iters: usize },
    /// Iterative water-filling.
    Iwfa { max_rounds: usize },
    /// Full power on the strongest band.
    BpcCs,
    /// Uniform full power.
    FullPower,
}

impl Policy {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::Table { .. } => "synthesized",
            Policy::Goodman { .. } => "goodman",
            Policy::Iwfa { .. } => "iwfa",
            Policy::BpcCs => "bpc_cs",
            Policy::FullPower => "full_power",
        }
    }
}

/// Long-term utility estimate of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub policy: String,
    pub n_blocks: usize,
    pub seed: u64,
    /// Per-user mean utilities.
    pub mean: Vec<f64>,
    /// Per-user standard errors (sample stdev over sqrt(blocks)).
    pub se: Vec<f64>,
    /// Mean and standard error of the per-block sum utility.
    pub sum_mean: f64,
    pub sum_se: f64,
    /// FNV-1a fingerprint of the drawn gain sequence; equal fingerprints
    /// certify common random numbers across policies.
    pub draw_hash: u64,
}

/// Monte Carlo estimate of the long-term utilities of `policy`.
pub fn simulate(problem: &TeamProblem, policy: &Policy, n_blocks: usize, seed: u64) -> EvalResult {
    simulate_detailed(problem, policy, n_blocks, seed).0
}

/// As [`simulate`], and also returns the per-block utility samples
/// (`k` user rows followed by the sum row), for paired comparisons.
pub fn simulate_detailed(
    problem: &TeamProblem,
    policy: &Policy,
    n_blocks: usize,
    seed: u64,
) -> (EvalResult, Vec<Vec<f64>>) {
    assert!(n_blocks >= 1, "need at least one block");
    let k = problem.k();
    let n_links = problem.channel.n_links();
    let width = k + 1;
    let mut table = vec![0.0f64; n_blocks * width];
    let mut hashes = vec![0u64; n_blocks];

    let chunk = 4096usize; // fixed so partitioning does not depend on workers
    table
        .par_chunks_mut(chunk * width)
        .zip(hashes.par_chunks_mut(chunk))
        .enumerate()
        .for_each(|(ci, (rows, hrow))| {
            let base = ci * chunk;
            let mut gains = vec![0.0f64; n_links];
            let mut cells = vec![0usize; n_links];
            let mut u = vec![0.0f64; k];
            for (off, h) in hrow.iter_mut().enumerate() {
                let block = (base + off) as u64;
                let mut rng = block_rng(seed, PURPOSE_GAINS, block);
                problem.channel.sample_block(&mut rng, &mut gains, &mut cells);
                let mut hash = FNV_OFFSET;
                for &g in &gains {
                    hash = fnv1a_f64(hash, g);
                }
                *h = hash;
                let powers = act(problem, policy, &gains, &cells, seed, block);
                let refs: Vec<&[f64]> = powers.iter().map(|p| p.as_slice()).collect();
                crate::model::utilities_into(
                    &problem.utility,
                    &problem.scenario,
                    &gains,
                    &refs,
                    &mut u,
                );
                let row = &mut rows[off * width..(off + 1) * width];
                let mut sum = 0.0;
                for (i, &v) in u.iter().enumerate() {
                    row[i] = v;
                    sum += v;
                }
                row[k] = sum;
            }
        });

    let mut draw_hash = FNV_OFFSET;
    for &h in &hashes {
        for byte in h.to_le_bytes() {
            draw_hash ^= byte as u64;
            draw_hash = draw_hash.wrapping_mul(0x100000001b3);
        }
    }
    let mut samples: Vec<Vec<f64>> = vec![vec![0.0; n_blocks]; width];
    for block in 0..n_blocks {
        for series in 0..width {
            samples[series][block] = table[block * width + series];
        }
    }
    let mut mean = vec![0.0; k];
    let mut se = vec![0.0; k];
    for i in 0..k {
        let (m, s) = mean_and_se(&samples[i]);
        mean[i] = m;
        se[i] = s;
    }
    let (sum_mean, sum_se) = mean_and_se(&samples[k]);
    (
        EvalResult {
            policy: policy.label().to_string(),
            n_blocks,
            seed,
            mean,
            se,
            sum_mean,
            sum_se,
            draw_hash,
        },
        samples,
    )
}

/// Powers chosen by `policy` on one block.
fn act(
    problem: &TeamProblem,
    policy: &Policy,
    gains: &[f64],
    cells: &[usize],
    seed: u64,
    block: u64,
) -> Vec<Vec<f64>> {
    match policy {
        Policy::Table { profile } => {
            let mut noise_rng = block_rng(seed, PURPOSE_OBS_NOISE, block);
            (0..problem.k())
                .map(|i| {
                    let s = observe_continuous(problem, i, gains, cells, &mut noise_rng);
                    problem.actions[i].action(profile.tables[i][s]).to_vec()
                })
                .collect()
        }
        Policy::Goodman {
            beta_star,
            max_iters,
        } => goodman_powers(&problem.scenario, gains, *beta_star, *max_iters).0,
        Policy::Iwfa { max_rounds } => iwfa_powers(&problem.scenario, gains, *max_rounds).0,
        Policy::BpcCs => bpc_cs_powers(&problem.scenario, gains),
        Policy::FullPower => full_power_powers(&problem.scenario),
    }
}

/// Observation index of transmitter `i` for continuous per-link gains:
/// exact links quantize the true gain, noisy links add the calibrated
/// estimation noise first.
fn observe_continuous<R: Rng>(
    problem: &TeamProblem,
    i: usize,
    gains: &[f64],
    cells: &[usize],
    rng: &mut R,
) -> usize {
    let tx = problem.observation.tx(i);
    let mut s = 0usize;
    for l in tx.links() {
        let digit = match &l.kind {
            LinkObsKind::Exact => cells[l.link],
            LinkObsKind::Noisy { sigma, .. } => match problem.channel.link(l.link) {
                LinkModel::Quantized { quantizer, .. } => {
                    let z: f64 = rng.sample(StandardNormal);
                    quantizer.cell_of(gains[l.link] + sigma * z)
                }
                // noisy observation of a discrete link is rejected at build
                LinkModel::Discrete { .. } => unreachable!(),
            },
        };
        s = s * l.n_cells + digit;
    }
    s
}

/// One evaluated point of an axis sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis: f64,
    pub result: EvalResult,
}

/// Evaluates each point's policies under one shared seed per point, giving
/// every policy the same fading draws (paired comparison).
pub fn sweep_curve(
    points: &[(f64, TeamProblem, Vec<Policy>)],
    n_blocks: usize,
    seed: u64,
) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (axis, problem, policies) in points {
        for policy in policies {
            rows.push(SweepRow {
                axis: *axis,
                result: simulate(problem, policy, n_blocks, seed),
            });
        }
    }
    rows
}
