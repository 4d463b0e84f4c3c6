use munchkin_core::callgraph::{build_callgraph, DistanceCache};
use munchkin_core::executor::{run_concrete, DEFAULT_STEP_LIMIT};
use munchkin_core::generator::{generate_program, ground_truth_for, GenParams, TABLE1_GRID};
use munchkin_core::ir::count_branches;
use munchkin_core::orchestrator::{run_sf, run_symex_only, HybridConfig, Mode};
use munchkin_core::symex::{symex_campaign, symex_campaign_with, Solver, SymexConfig, SymexLimits, Termination};
use proptest::prelude::*;

fn limits() -> SymexLimits {
    SymexLimits {
        max_states: 100_000,
        max_queries: 100_000,
    }
}

/// Every branch of a generated program is feasible on both sides, so the
/// exhaustive search asks exactly two fresh queries per branch.
#[test]
fn baseline_query_count_matches_branch_count() {
    for (b, d) in TABLE1_GRID {
        let p = generate_program(&GenParams::new(b, d)).unwrap();
        let r = symex_campaign(&p, &SymexConfig::baseline(limits())).unwrap();
        assert_eq!(count_branches(&p) as u64, u64::from(b).pow(d) + 1);
        assert_eq!(r.stats.queries, 2 * count_branches(&p) as u64, "b={b} d={d}");
        assert_eq!(r.termination, Termination::Exhausted);
        assert_eq!(r.coverage.functions().len(), p.num_functions());
    }
}

#[test]
fn tests_reproduce_leaf_inputs() {
    let params = GenParams::new(3, 2);
    let p = generate_program(&params).unwrap();
    let r = symex_campaign(&p, &SymexConfig::baseline(limits())).unwrap();
    for t in &r.test_cases {
        let v = i64::from(t.input.get(0));
        let truth = ground_truth_for(&params, v);
        assert!(t.covering.is_subset(&truth) && truth.is_subset(&t.covering));
    }
}

#[test]
fn shared_distances_match_fresh() {
    let p = generate_program(&GenParams::new(3, 3)).unwrap();
    let cache = DistanceCache::new(&p);
    for target in ["leaf_26", "node_9_17", "leaf_0"] {
        let cfg = SymexConfig::sonar(target, limits());
        let a = symex_campaign(&p, &cfg).unwrap();
        let mut solver = Solver::new();
        let b = symex_campaign_with(&p, &cfg, &mut solver, Some(&cache)).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.test_cases, b.test_cases);
        assert!(a.target_reached());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Directed search never needs more queries than exhaustive search to
    /// first enter a target.
    #[test]
    fn sonar_reaches_targets_no_later(b in 2u32..4, d in 1u32..4, pick in any::<prop::sample::Index>(), seed in 0u64..1000) {
        let p = generate_program(&GenParams::new(b, d)).unwrap();
        let cg = build_callgraph(&p);
        let targets: Vec<&str> = cg.reachable().filter(|f| *f != "main").collect();
        let target = targets[pick.index(targets.len())];
        let base = symex_campaign(&p, &SymexConfig { rng_seed: seed, ..SymexConfig::baseline(limits()) }).unwrap();
        let sonar = symex_campaign(&p, &SymexConfig::sonar(target, limits())).unwrap();
        prop_assert!(sonar.target_reached());
        prop_assert!(sonar.first_entry_queries[target] <= base.first_entry_queries[target]);
    }

    #[test]
    fn emitted_tests_replay(b in 2u32..4, d in 1u32..4, salt in 0u64..50, seed in any::<u64>(), budget in 1u64..40) {
        let p = generate_program(&GenParams::new(b, d).with_seed(salt)).unwrap();
        let cfg = SymexConfig {
            rng_seed: seed,
            ..SymexConfig::baseline(SymexLimits { max_states: 1_000, max_queries: budget })
        };
        let r = symex_campaign(&p, &cfg).unwrap();
        prop_assert!(r.stats.queries <= budget);
        for t in &r.test_cases {
            let replay = run_concrete(&p, &t.input, DEFAULT_STEP_LIMIT);
            prop_assert!(t.covering.is_subset(replay.coverage.functions()));
        }
    }

    #[test]
    fn sf_extends_its_symex_phase(b in 2u32..4, d in 1u32..4, queries in 1u64..30, fuzz in 0u64..200, seed in 0u64..100) {
        let p = generate_program(&GenParams::new(b, d)).unwrap();
        let cfg = HybridConfig {
            mode: Mode::Sf,
            fuzz_budget: fuzz,
            rng_seed: seed,
            symex_limits: SymexLimits { max_states: 1_000, max_queries: queries },
            ..HybridConfig::default()
        };
        let sf = run_sf(&p, &cfg).unwrap();
        let symex = run_symex_only(&p, &cfg).unwrap();
        prop_assert!(symex.coverage.functions().is_subset(sf.coverage.functions()));
    }
}
