//! Property tests over randomized scenario parameters.

use powcoord::model::{
    instantaneous_utility, sinr, uniform_power_grid, weighted_utility, ActionAlphabet, NetRate,
    Scenario, ScenarioConfig, Topology, UtilityKind, UtilitySpec,
};
use proptest::prelude::*;

fn arb_scenario() -> impl Strategy<Value = Scenario> {
    (
        1usize..=3,                  // k
        1usize..=3,                  // bands
        2usize..=6,                  // power levels
        0.05f64..2.0,                // p_max
        1.0f64..3.0,                 // p_total multiplier
        1e-4f64..0.1,                // noise
        proptest::bool::ANY,         // mac topology
        0.05f64..3.0,                // direct mean
        0.05f64..3.0,                // cross mean
    )
        .prop_map(
            |(k, bands, levels, p_max, p_mult, noise, mac, direct, cross)| {
                let topology = if mac {
                    Topology::MultipleAccess
                } else {
                    Topology::Interference
                };
                let gain_means = match topology {
                    Topology::Interference => {
                        powcoord::model::symmetric_gain_means(k, bands, direct, cross)
                    }
                    Topology::MultipleAccess => vec![direct; k * bands],
                };
                Scenario::new(ScenarioConfig {
                    topology,
                    k,
                    bands,
                    p_max,
                    p_total: p_max * p_mult,
                    noise,
                    p0: 0.0,
                    r0: 1.0,
                    gain_means,
                    power_levels: uniform_power_grid(levels, p_max),
                })
                .unwrap()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Every enumerated action satisfies both the per-band cap and the
    /// total budget, with no duplicate vectors.
    #[test]
    fn action_enumeration_respects_power_constraints(sc in arb_scenario()) {
        let alphabet = ActionAlphabet::enumerate(&sc);
        prop_assert!(alphabet.len() >= 1);
        for idx in 0..alphabet.len() {
            let a = alphabet.action(idx);
            prop_assert_eq!(a.len(), sc.bands());
            for &p in a {
                prop_assert!(p >= 0.0 && p <= sc.p_max() + 1e-9 * sc.p_max());
            }
            let total: f64 = a.iter().sum();
            prop_assert!(total <= sc.p_total() + 1e-9 * sc.p_max());
        }
        for i in 0..alphabet.len() {
            for j in (i + 1)..alphabet.len() {
                prop_assert_ne!(alphabet.action(i), alphabet.action(j));
            }
        }
    }

    /// The weighted utility is linear in the weight vector.
    #[test]
    fn weighted_utility_linear_in_weights(
        sc in arb_scenario(),
        alpha in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let gains: Vec<f64> = (0..sc.n_links()).map(|_| 0.01 + rng.gen::<f64>()).collect();
        let alphabet = ActionAlphabet::enumerate(&sc);
        let powers: Vec<&[f64]> = (0..sc.k())
            .map(|_| alphabet.action(rng.gen_range(0..alphabet.len())))
            .collect();
        let simplex = |r: &mut rand_chacha::ChaCha12Rng| -> Vec<f64> {
            let mut w: Vec<f64> = (0..sc.k()).map(|_| r.gen::<f64>() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            w
        };
        let la = simplex(&mut rng);
        let lb = simplex(&mut rng);
        let mix: Vec<f64> = la.iter().zip(&lb).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let mk = |w: Vec<f64>| UtilitySpec::new(
            UtilityKind::EnergyEfficiency,
            NetRate::Outage { c: 1.0 },
            w,
        ).unwrap();
        let wa = weighted_utility(&mk(la), &sc, &gains, &powers);
        let wb = weighted_utility(&mk(lb), &sc, &gains, &powers);
        let wm = weighted_utility(&mk(mix), &sc, &gains, &powers);
        let expect = alpha * wa + (1.0 - alpha) * wb;
        prop_assert!((wm - expect).abs() <= 1e-10 * expect.abs().max(1.0));
    }

    /// SINR rises with own power and falls with any interferer's power;
    /// utilities stay finite on the whole action grid.
    #[test]
    fn sinr_monotonicity_and_finiteness(sc in arb_scenario(), seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let gains: Vec<f64> = (0..sc.n_links()).map(|_| 0.01 + rng.gen::<f64>()).collect();
        let alphabet = ActionAlphabet::enumerate(&sc);
        let base_idx: Vec<usize> =
            (0..sc.k()).map(|_| rng.gen_range(0..alphabet.len())).collect();
        let spec = UtilitySpec::sum_objective(
            UtilityKind::EnergyEfficiency,
            NetRate::PacketSuccess { m: 3 },
            sc.k(),
        );
        for i in 0..sc.k() {
            let powers: Vec<&[f64]> = base_idx.iter().map(|&a| alphabet.action(a)).collect();
            prop_assert!(instantaneous_utility(&spec, &sc, &gains, &powers, i).is_finite());
            for b in 0..sc.bands() {
                let s0 = sinr(&sc, &gains, &powers, i, b);
                for cand in 0..alphabet.len() {
                    let own_up = alphabet.action(cand)[b] >= powers[i][b];
                    let mut powers2 = powers.clone();
                    powers2[i] = alphabet.action(cand);
                    let s1 = sinr(&sc, &gains, &powers2, i, b);
                    if own_up {
                        prop_assert!(s1 >= s0 - 1e-12);
                    }
                }
                for j in 0..sc.k() {
                    if j == i {
                        continue;
                    }
                    for cand in 0..alphabet.len() {
                        if alphabet.action(cand)[b] >= powers[j][b] {
                            let mut powers2 = powers.clone();
                            powers2[j] = alphabet.action(cand);
                            prop_assert!(sinr(&sc, &gains, &powers2, i, b) <= s0 + 1e-12);
                        }
                    }
                }
            }
        }
    }
}
