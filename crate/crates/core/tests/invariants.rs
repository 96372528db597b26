//! Property tests over model trajectories and estimator outputs.

mod common;

use proptest::prelude::*;

use evometric::engine::simulate;
use evometric::environment::{RandomStream, Seed};
use evometric::metric::{wasserstein_penalties, Discount, MetricReport, ObservationTimes, SeedPair};
use evometric::models::engine::{self as eng, AttackConfig, EngineParams, Side};
use evometric::models::three_tanks::{self as tanks, Scenario, ThreeTanksParams};
use evometric::robustness::{xi_from_variations, VariationRecord};

fn attack(kind: u8, strength: f64) -> Option<AttackConfig> {
    match kind {
        0 => None,
        1 => Some(AttackConfig::Act { side: Side::L, ac: 1.2 + strength }),
        2 => Some(AttackConfig::Sen { side: Side::L, tf: strength }),
        _ => Some(AttackConfig::Saw {
            side: Side::L,
            tf: strength,
            awml: 1000.0,
            window: Some((10.0, 150.0)),
        }),
    }
}

fn engine_run(kind: u8, strength: f64, seed: u64, steps: usize) -> Vec<Vec<f64>> {
    let mut p = EngineParams::default();
    if let Some(a) = attack(kind, strength) {
        p = p.with_attack(a);
    }
    let c = eng::configuration(&p).unwrap();
    let t = simulate(&c, steps, &mut Seed(seed).stream(0)).unwrap();
    t.states().map(|d| d.values().to_vec()).collect()
}

fn index(p: &EngineParams, name: &str) -> usize {
    eng::space(p).unwrap().require(name).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_indicators_stay_in_the_unit_interval(kind in 0u8..4, strength in 0.1f64..1.5, seed in any::<u64>()) {
        let p = EngineParams::default();
        let run = engine_run(kind, strength, seed, 400);
        for name in ["fn_L", "fp_L", "stress_L"] {
            let i = index(&p, name);
            prop_assert!(run.iter().all(|d| (0.0..=1.0).contains(&d[i])), "{} left [0, 1]", name);
        }
    }

    #[test]
    fn engine_history_shifts_by_one_each_step(kind in 0u8..4, seed in any::<u64>()) {
        let p = EngineParams::default();
        let run = engine_run(kind, 0.6, seed, 200);
        let temp = index(&p, "temp_L");
        let hist: Vec<usize> = (1..=6).map(|k| index(&p, &format!("p{k}_L"))).collect();
        for w in run.windows(2) {
            prop_assert_eq!(w[1][hist[0]], w[0][temp]);
            for k in 1..6 {
                prop_assert_eq!(w[1][hist[k]], w[0][hist[k - 1]]);
            }
        }
    }

    // A hot warning read at step t+1 reflects the state at t, whose cooling
    // flag was written at t-1. With AC above the largest one-step rise the
    // attack's write never lands on a state above the maximum.
    #[test]
    fn act_attack_writes_never_raise_the_ids_condition(ac_extra in 0.0f64..1.5, seed in any::<u64>()) {
        let p = EngineParams::default();
        let ac = 1.2 + ac_extra;
        let run = engine_run(1, ac_extra, seed, 600);
        let temp = index(&p, "temp_L");
        let warning = index(&p, "ch_warning_L");
        for t in 1..run.len() - 1 {
            if run[t + 1][warning] == 1.0 {
                prop_assert!(run[t - 1][temp] >= p.max_temp - ac, "warning at {} after an attack write", t + 1);
            }
        }
    }

    #[test]
    fn tank_levels_follow_pump_flows(seed in any::<u64>(), scenario in 1u8..3, level in 0.0f64..12.0) {
        let params = ThreeTanksParams::default().with_scenario(Scenario::try_from(scenario).unwrap());
        let c = tanks::configuration(&params, level).unwrap();
        let t = simulate(&c, 150, &mut Seed(seed).stream(0)).unwrap();
        let states: Vec<Vec<f64>> = t.states().map(|d| d.values().to_vec()).collect();
        for w in states.windows(2) {
            let (before, after) = (&w[0], &w[1]);
            if after[3..6].iter().any(|l| *l <= params.l_min || *l >= params.l_max) {
                continue;
            }
            let stored: f64 = after[3..6].iter().sum::<f64>() - before[3..6].iter().sum::<f64>();
            let pumped = params.dt * (after[0] + after[1] - after[2]);
            prop_assert!((stored - pumped).abs() < 1e-9, "stored {} vs pumped {}", stored, pumped);
        }
    }

    #[test]
    fn xi_is_non_increasing(curves in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 12), 1..6), gamma in 0.5f64..1.0) {
        let times = ObservationTimes::range(0, 11).unwrap();
        let records: Vec<VariationRecord> = curves
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let r = MetricReport::from_curve(&times, w, Discount::exponential(gamma).unwrap(), 1, 1, SeedPair::same(Seed(0)), "p");
                VariationRecord { attempt: i, state: vec![], filter_value: 0.0, discounted: r.discounted.clone(), suffix: r.suffix_curve() }
            })
            .collect();
        let xi = xi_from_variations(&records, times.len());
        prop_assert!(xi.windows(2).all(|w| w[0] >= w[1]));
        for r in &records {
            prop_assert!(r.suffix.iter().zip(&xi).all(|(s, x)| s <= x));
        }
    }

    // For ℓ > 1, repeating every left-hand sample ℓ times gives equal-size
    // uniform measures, so the exhaustive assignment still gives the optimum.
    #[test]
    fn scaled_wasserstein_matches_assignment(n in 1usize..4, scale in 1usize..3, seed in any::<u64>()) {
        let mut rng = RandomStream::new(Seed(seed));
        let omega: Vec<f64> = (0..n).map(|_| rng.uniform01()).collect();
        let nu: Vec<f64> = (0..n * scale).map(|_| rng.uniform01()).collect();
        let repeated: Vec<f64> = omega.iter().flat_map(|w| std::iter::repeat_n(*w, scale)).collect();
        let w = wasserstein_penalties(&omega, &nu).unwrap();
        prop_assert!((w - common::assignment_ot(&repeated, &nu)).abs() < 1e-12);
    }
}
