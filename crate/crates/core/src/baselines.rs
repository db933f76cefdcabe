//! Classical power-control baselines.
//!
//! All of these are online policies operating on the continuous channel
//! gains of the current block, which is how they are compared against
//! synthesized decision functions in the Monte Carlo harness:
//!
//! - target-SINR channel inversion (the classic energy-efficient
//!   best-response `a_i = beta* (noise + I_i) / g_ii`, capped at `p_max`),
//! - iterative water-filling (IWFA) for rate maximization,
//! - binary power control with channel selection (full power on the
//!   strongest band),
//! - plain full power.

use crate::model::{NetRate, Scenario};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("psi has no interior maximizer of psi(x)/x: the target-SINR policy degenerates")]
    NoInteriorRoot,
}

/// Target SINR `beta*` solving `x psi'(x) = psi(x)`, the unique maximizer
/// of `psi(x)/x` for the sigmoidal net-rate models.
///
/// Uses the log-derivative form `h(x) = x psi'(x)/psi(x) - 1`, which is
/// strictly decreasing for the supported families, and bracketed bisection
/// to 1e-10 relative tolerance. `PacketSuccess` with `m = 1` and `Shannon`
/// have no positive root and error out.
pub fn goodman_target_sinr(psi: &NetRate) -> Result<f64, BaselineError> {
    let h = |x: f64| -> f64 {
        match *psi {
            // x psi'/psi = m x / (e^x - 1)
            NetRate::PacketSuccess { m } => m as f64 * x / x.exp_m1() - 1.0,
            NetRate::Outage { c } => c / x - 1.0,
            NetRate::Shannon => x / ((1.0 + x) * (1.0 + x).ln()) - 1.0,
        }
    };
    let mut lo = 1e-9;
    if h(lo) <= 0.0 {
        return Err(BaselineError::NoInteriorRoot);
    }
    let mut hi = 1.0;
    while h(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(BaselineError::NoInteriorRoot);
        }
    }
    while (hi - lo) > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fixed point of the target-SINR inversion dynamics. Each round, every
/// transmitter picks the band where the target is cheapest to reach and
/// sets `min(p_max, beta (noise + interference) / gain)` there. Returns the
/// power profile and whether the iteration converged (max change < 1e-9).
pub fn goodman_powers(
    scenario: &Scenario,
    gains: &[f64],
    beta: f64,
    max_iters: usize,
) -> (Vec<Vec<f64>>, bool) {
    let k = scenario.k();
    let b = scenario.bands();
    let mut powers = vec![vec![0.0; b]; k];
    for _ in 0..max_iters {
        let mut max_change: f64 = 0.0;
        for i in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for band in 0..b {
                let mut interference = 0.0;
                for j in 0..k {
                    if j != i {
                        interference += gains[scenario.link_index(j, i, band)] * powers[j][band];
                    }
                }
                let needed = beta * (scenario.noise() + interference)
                    / gains[scenario.link_index(i, i, band)];
                if best.map_or(true, |(_, p)| needed < p) {
                    best = Some((band, needed));
                }
            }
            let (band, needed) = best.expect("at least one band");
            let p = needed.min(scenario.p_max());
            for (bb, slot) in powers[i].iter_mut().enumerate() {
                let new = if bb == band { p } else { 0.0 };
                max_change = max_change.max((new - *slot).abs());
                *slot = new;
            }
        }
        if max_change < 1e-9 {
            return (powers, true);
        }
    }
    (powers, false)
}

/// Exact capped water-filling: allocates `budget` over bands with
/// noise-over-gain `costs`, each band limited to `cap`, by walking the
/// piecewise-linear water level.
pub fn water_fill(costs: &[f64], budget: f64, cap: f64) -> Vec<f64> {
    let b = costs.len();
    let target = budget.min(cap * b as f64);
    if target <= 0.0 {
        return vec![0.0; b];
    }
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * b);
    for &n in costs {
        events.push((n, 1.0));
        events.push((n + cap, -1.0));
    }
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut slope = 0.0;
    let mut level = events[0].0;
    let mut filled = 0.0;
    let mut mu = events[events.len() - 1].0;
    for &(m, ds) in &events {
        let df = slope * (m - level);
        if slope > 0.0 && filled + df >= target {
            mu = level + (target - filled) / slope;
            break;
        }
        filled += df;
        level = m;
        slope += ds;
    }
    let mut alloc: Vec<f64> = costs.iter().map(|&n| (mu - n).clamp(0.0, cap)).collect();
    let total: f64 = alloc.iter().sum();
    if total > budget && total > 0.0 {
        // shave float excess so the budget holds exactly
        let scale = budget / total;
        alloc.iter_mut().for_each(|a| *a *= scale);
    }
    alloc
}

/// Iterative water-filling: round-robin best responses where each
/// transmitter water-fills its budget against the measured per-band
/// interference. Returns the profile and a convergence flag.
pub fn iwfa_powers(
    scenario: &Scenario,
    gains: &[f64],
    max_rounds: usize,
) -> (Vec<Vec<f64>>, bool) {
    let k = scenario.k();
    let b = scenario.bands();
    let budget = scenario.p_total().min(scenario.p_max() * b as f64);
    let mut powers = vec![vec![0.0; b]; k];
    let mut costs = vec![0.0; b];
    for _ in 0..max_rounds {
        let mut max_change: f64 = 0.0;
        for i in 0..k {
            for (band, cost) in costs.iter_mut().enumerate() {
                let mut interference = 0.0;
                for j in 0..k {
                    if j != i {
                        interference += gains[scenario.link_index(j, i, band)] * powers[j][band];
                    }
                }
                *cost = (scenario.noise() + interference)
                    / gains[scenario.link_index(i, i, band)];
            }
            let new = water_fill(&costs, budget, scenario.p_max());
            for (slot, n) in powers[i].iter_mut().zip(&new) {
                max_change = max_change.max((n - *slot).abs());
                *slot = *n;
            }
        }
        if max_change < 1e-9 {
            return (powers, true);
        }
    }
    (powers, false)
}

/// Binary power control with channel selection: full power on the band with
/// the largest own gain (ties to the lowest band index), silence elsewhere.
pub fn bpc_cs_powers(scenario: &Scenario, gains: &[f64]) -> Vec<Vec<f64>> {
    let k = scenario.k();
    let b = scenario.bands();
    (0..k)
        .map(|i| {
            let mut best = 0usize;
            for band in 1..b {
                if gains[scenario.link_index(i, i, band)]
                    > gains[scenario.link_index(i, i, best)]
                {
                    best = band;
                }
            }
            let mut row = vec![0.0; b];
            row[best] = scenario.p_max();
            row
        })
        .collect()
}

/// Largest admissible uniform allocation: `min(p_max, p_total/B)` per band.
pub fn full_power_powers(scenario: &Scenario) -> Vec<Vec<f64>> {
    let per_band = scenario
        .p_max()
        .min(scenario.p_total() / scenario.bands() as f64);
    vec![vec![per_band; scenario.bands()]; scenario.k()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{symmetric_gain_means, ScenarioConfig, Topology, UtilityKind, UtilitySpec};
    use crate::model::{instantaneous_utility, uniform_power_grid};

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn scenario(k: usize, bands: usize, p_max: f64, noise: f64) -> Scenario {
        Scenario::new(ScenarioConfig {
            topology: Topology::Interference,
            k,
            bands,
            p_max,
            p_total: p_max,
            noise,
            p0: 0.0,
            r0: 1.0,
            gain_means: symmetric_gain_means(k, bands, 1.0, 0.5),
            power_levels: uniform_power_grid(4, p_max),
        })
        .unwrap()
    }

    // -------------------------------------------------------------- beta*

    #[test]
    fn packet_success_target_matches_scalar_root() {
        // independent oracle: bisection on the raw form M x e^-x = 1 - e^-x
        let beta = goodman_target_sinr(&NetRate::PacketSuccess { m: 100 }).unwrap();
        let g = |x: f64| 100.0 * x * (-x).exp() - (1.0 - (-x).exp());
        let (mut lo, mut hi) = (1.0, 20.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!(approx(beta, oracle, 1e-8), "beta {beta} oracle {oracle}");
        assert!((beta - 6.48).abs() < 0.01);
    }

    #[test]
    fn outage_target_is_the_constant() {
        for c in [0.3, 1.0, 2.5] {
            let beta = goodman_target_sinr(&NetRate::Outage { c }).unwrap();
            assert!(approx(beta, c, 1e-9));
        }
    }

    #[test]
    fn degenerate_psi_errors() {
        assert!(goodman_target_sinr(&NetRate::PacketSuccess { m: 1 }).is_err());
        assert!(goodman_target_sinr(&NetRate::Shannon).is_err());
    }

    // ------------------------------------------------------------- goodman

    #[test]
    fn single_user_inversion_formula() {
        let sc = scenario(1, 1, 0.1, 0.01);
        let (p, converged) = goodman_powers(&sc, &[1.0], 1.0, 100);
        assert!(converged);
        assert!(approx(p[0][0], 0.01, 1e-9));
    }

    #[test]
    fn symmetric_users_get_symmetric_powers() {
        let sc = scenario(2, 1, 0.5, 0.01);
        let gains = [1.0, 0.25, 0.25, 1.0];
        let (p, converged) = goodman_powers(&sc, &gains, 2.0, 1000);
        assert!(converged);
        assert!(approx(p[0][0], p[1][0], 1e-9));
    }

    #[test]
    fn two_user_fixed_point_matches_long_iteration() {
        let sc = scenario(2, 1, 1.0, 0.02);
        let gains = [0.9, 0.2, 0.35, 1.4];
        let beta = 1.7;
        let (fast, _) = goodman_powers(&sc, &gains, beta, 200);
        // high-precision oracle: plain fixed-point iteration, many rounds
        let mut a = [0.0f64; 2];
        for _ in 0..10_000 {
            for i in 0..2 {
                let j = 1 - i;
                let interference = gains[sc.link_index(j, i, 0)] * a[j];
                a[i] = (beta * (sc.noise() + interference) / gains[sc.link_index(i, i, 0)])
                    .min(sc.p_max());
            }
        }
        assert!(approx(fast[0][0], a[0], 1e-8));
        assert!(approx(fast[1][0], a[1], 1e-8));
    }

    #[test]
    fn goodman_powers_nondecreasing_in_noise() {
        let gains = [1.0, 0.3, 0.3, 1.0];
        let mut prev = vec![0.0; 2];
        for noise in [0.005, 0.01, 0.02, 0.04] {
            let sc = scenario(2, 1, 10.0, noise);
            let (p, _) = goodman_powers(&sc, &gains, 1.5, 1000);
            assert!(p[0][0] >= prev[0] && p[1][0] >= prev[1]);
            prev = vec![p[0][0], p[1][0]];
        }
    }

    // ----------------------------------------------------------------- iwfa

    #[test]
    fn single_user_equal_gains_split_evenly() {
        let sc = scenario(1, 2, 1.0, 0.1);
        let gains = [1.0, 1.0];
        let (p, converged) = iwfa_powers(&sc, &gains, 10);
        assert!(converged);
        assert!(approx(p[0][0], 0.5, 1e-9));
        assert!(approx(p[0][1], 0.5, 1e-9));
    }

    #[test]
    fn weak_band_below_water_level_gets_nothing() {
        let sc = scenario(1, 2, 1.0, 0.5);
        // band 1 cost = 0.5/0.01 = 50, way above any credible water level
        let gains = [1.0, 0.01];
        let (p, _) = iwfa_powers(&sc, &gains, 10);
        assert!(approx(p[0][0], 1.0, 1e-9));
        assert_eq!(p[0][1], 0.0);
    }

    #[test]
    fn two_user_two_band_kkt_residual() {
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::Interference,
            k: 2,
            bands: 2,
            p_max: 1.0,
            p_total: 1.5,
            noise: 0.05,
            p0: 0.0,
            r0: 1.0,
            gain_means: symmetric_gain_means(2, 2, 1.0, 0.4),
            power_levels: uniform_power_grid(4, 1.0),
        })
        .unwrap();
        let gains = [0.9, 1.3, 0.5, 0.3, 0.45, 0.2, 1.1, 0.8];
        let (p, converged) = iwfa_powers(&sc, &gains, 500);
        assert!(converged);
        for i in 0..2 {
            let total: f64 = p[i].iter().sum();
            assert!(approx(total, 1.5, 1e-8), "budget not exhausted: {total}");
            // capped KKT: a common water level over active unsaturated bands,
            // and inactive bands must price above it
            let costs: Vec<f64> = (0..2)
                .map(|band| {
                    let j = 1 - i;
                    let interference = gains[sc.link_index(j, i, band)] * p[j][band];
                    (sc.noise() + interference) / gains[sc.link_index(i, i, band)]
                })
                .collect();
            let levels: Vec<f64> = (0..2)
                .filter(|&band| p[i][band] > 1e-12 && p[i][band] < sc.p_max() - 1e-12)
                .map(|band| p[i][band] + costs[band])
                .collect();
            for w in levels.windows(2) {
                assert!((w[0] - w[1]).abs() < 1e-8, "water level uneven: {levels:?}");
            }
            if let Some(&mu) = levels.first() {
                for band in 0..2 {
                    if p[i][band] <= 1e-12 {
                        assert!(costs[band] >= mu - 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn iwfa_own_rate_never_drops_within_a_round() {
        // one user's water-filling update cannot hurt that user given fixed
        // others; checked numerically along the iteration
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::Interference,
            k: 2,
            bands: 2,
            p_max: 1.0,
            p_total: 1.0,
            noise: 0.05,
            p0: 0.0,
            r0: 1.0,
            gain_means: symmetric_gain_means(2, 2, 1.0, 0.6),
            power_levels: uniform_power_grid(3, 1.0),
        })
        .unwrap();
        let gains = [1.2, 0.7, 0.6, 0.35, 0.3, 0.52, 0.95, 1.05];
        let spec = UtilitySpec::sum_objective(UtilityKind::ShannonRate, NetRate::Shannon, 2);
        let mut powers = vec![vec![0.2, 0.2], vec![0.9, 0.1]];
        let budget = sc.p_total().min(sc.p_max() * 2.0);
        for _ in 0..6 {
            for i in 0..2 {
                let refs: Vec<&[f64]> = powers.iter().map(|r| r.as_slice()).collect();
                let before = instantaneous_utility(&spec, &sc, &gains, &refs, i);
                let costs: Vec<f64> = (0..2)
                    .map(|band| {
                        let j = 1 - i;
                        let interference = gains[sc.link_index(j, i, band)] * powers[j][band];
                        (sc.noise() + interference) / gains[sc.link_index(i, i, band)]
                    })
                    .collect();
                powers[i] = water_fill(&costs, budget, sc.p_max());
                let refs: Vec<&[f64]> = powers.iter().map(|r| r.as_slice()).collect();
                let after = instantaneous_utility(&spec, &sc, &gains, &refs, i);
                assert!(after >= before - 1e-9);
            }
        }
    }

    // --------------------------------------------------------------- bpc/fp

    #[test]
    fn bpc_selects_strongest_band() {
        let sc = scenario(1, 2, 1.0, 0.1);
        let p = bpc_cs_powers(&sc, &[0.2, 0.9]);
        assert_eq!(p[0], vec![0.0, 1.0]);
    }

    #[test]
    fn bpc_single_band_full_power() {
        let sc = scenario(1, 1, 0.7, 0.1);
        let p = bpc_cs_powers(&sc, &[0.4]);
        assert_eq!(p[0], vec![0.7]);
    }

    #[test]
    fn bpc_tie_breaks_to_lowest_band() {
        let sc = scenario(1, 2, 1.0, 0.1);
        let p = bpc_cs_powers(&sc, &[0.5, 0.5]);
        assert_eq!(p[0], vec![1.0, 0.0]);
    }

    #[test]
    fn all_baselines_respect_power_constraints() {
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::MultipleAccess,
            k: 3,
            bands: 2,
            p_max: 10.0,
            p_total: 10.0,
            noise: 0.01,
            p0: 0.01,
            r0: 1e6,
            gain_means: vec![0.5; 6],
            power_levels: uniform_power_grid(4, 10.0),
        })
        .unwrap();
        let gains = [0.7, 0.2, 1.5, 0.9, 0.05, 2.2];
        let profiles = [
            goodman_powers(&sc, &gains, 6.48, 500).0,
            iwfa_powers(&sc, &gains, 500).0,
            bpc_cs_powers(&sc, &gains),
            full_power_powers(&sc),
        ];
        for p in &profiles {
            for row in p {
                for &v in row {
                    assert!(v >= 0.0 && v <= sc.p_max() + 1e-12);
                }
                let total: f64 = row.iter().sum();
                assert!(total <= sc.p_total() + 1e-9);
            }
        }
    }
}
