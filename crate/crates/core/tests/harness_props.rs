use inband::harness::{
    case_study_config, run_once, run_pairing, table2_config, RunMode, ScenarioConfig,
};
use proptest::prelude::*;

fn short_monitor(n: u32, poisson: bool) -> ScenarioConfig {
    let mut cfg = table2_config(1, 1);
    cfg.duration = 0.05;
    cfg.warmup = 0.01;
    cfg.traffic.n_background = n;
    if poisson {
        cfg.traffic.mode = inband::harness::TrafficKind::Poisson;
    }
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monitor_results_are_consistent(seed in 0u64..10_000, n in 1u32..12, poisson: bool) {
        let mut cfg = short_monitor(n, poisson);
        cfg.base_seed = seed;
        let a = run_once(&cfg, 0).unwrap();
        prop_assert_eq!(a.len(), cfg.detection.m.len());
        for r in &a {
            prop_assert_eq!(r.n_tx, r.n_success + r.n_collision);
            prop_assert_eq!(r.alarm, r.alarm_rule.is_some());
            prop_assert!(r.max_consecutive_collisions as u64 <= r.n_collision);
            prop_assert_eq!(r.seed, seed);
        }
        // a larger threshold never alarms where a smaller one did not
        for w in a.windows(2) {
            prop_assert!(!w[1].alarm || w[0].alarm);
        }
        prop_assert_eq!(a, run_once(&cfg, 0).unwrap());
    }

    #[test]
    fn clean_pairings_agree(seed in 0u64..10_000) {
        let cfg = case_study_config("none", 1, seed);
        prop_assert_eq!(cfg.mode, RunMode::Pairing);
        let rep = run_pairing(&cfg, 0, seed).unwrap();
        prop_assert!(rep.result.keys_match);
        prop_assert!(!rep.result.alarm);
        prop_assert_eq!(rep.alice_key, rep.bob_key);
    }

    #[test]
    fn attacks_never_yield_matching_keys(seed in 0u64..10_000, k in 0usize..4) {
        let strategy = ["type1", "type2", "long_jam", "partial_jam"][k];
        let cfg = case_study_config(strategy, 1, seed);
        let rep = run_pairing(&cfg, 0, seed).unwrap();
        prop_assert!(rep.result.alarm);
        prop_assert!(!rep.result.keys_match);
    }
}
