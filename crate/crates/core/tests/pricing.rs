//! Pricing backends against each other and structural properties of the
//! pricing relaxation.

use bary_core::bench::pricing_duals;
use bary_core::generate::{random_duals, random_instance, random_instance_with_sizes};
use bary_core::master::reduced_cost;
use bary_core::pricing::{
    argmax_incumbent, branch_and_bound, build_gen_lp, enumerate_best, enumerate_best_parallel, BbConfig,
};
use bary_core::{BranchingStrategy, Combination, Instance};
use proptest::prelude::*;

fn shifted(inst: &Instance) -> Instance {
    inst.shift_to_positive_orthant().0
}

#[test]
fn branch_and_bound_matches_enumeration_with_master_duals() {
    for seed in 0..12u64 {
        let sizes: Vec<usize> = (0..3 + seed as usize % 3).map(|i| 2 + (i + seed as usize) % 3).collect();
        let inst = shifted(&random_instance_with_sizes(&sizes, 2, seed));
        let y = pricing_duals(&inst).unwrap();
        let best = enumerate_best(&inst, &y, None).unwrap();
        let model = build_gen_lp(&inst, &y).unwrap();
        for strategy in BranchingStrategy::ALL {
            let mut cfg = BbConfig::new(strategy);
            cfg.check_invariants = true;
            let (r, stats) = branch_and_bound(&model, &cfg, argmax_incumbent(&inst, &y).unwrap()).unwrap();
            assert!((r.reduced_cost - best.reduced_cost).abs() <= 1e-7, "seed {seed} {strategy}");
            assert!((reduced_cost(&inst, &y, &r.combination) - r.reduced_cost).abs() <= 1e-9);
            assert!(stats.min_rule_max_violation <= 1e-8);
            assert_eq!(stats.lemma4_violations, 0);
            assert_eq!(stats.fix_one_violations, 0);
            assert!(stats.max_depth + 3 <= inst.total_support());
        }
    }
}

#[test]
fn parallel_backends_agree_with_serial() {
    let inst = shifted(&random_instance(5, 3, 2, 77));
    let y = pricing_duals(&inst).unwrap();
    let serial = enumerate_best(&inst, &y, None).unwrap();
    for workers in [2, 3, 7] {
        assert_eq!(enumerate_best_parallel(&inst, &y, None, workers).unwrap(), serial);
    }
    let model = build_gen_lp(&inst, &y).unwrap();
    let inc = argmax_incumbent(&inst, &y).unwrap();
    let one = branch_and_bound(&model, &BbConfig::new(BranchingStrategy::MostRepeated), inc.clone()).unwrap();
    let mut cfg = BbConfig::new(BranchingStrategy::MostRepeated);
    cfg.workers = 3;
    let many = branch_and_bound(&model, &cfg, inc).unwrap();
    assert!((one.0.reduced_cost - many.0.reduced_cost).abs() <= 1e-9);
    assert!((one.0.reduced_cost - serial.reduced_cost).abs() <= 1e-7);
}

#[test]
fn single_worker_search_is_reproducible() {
    let inst = shifted(&random_instance(5, 4, 2, 5));
    let y = pricing_duals(&inst).unwrap();
    let model = build_gen_lp(&inst, &y).unwrap();
    let cfg = BbConfig::new(BranchingStrategy::IndexOrder);
    let a = branch_and_bound(&model, &cfg, argmax_incumbent(&inst, &y).unwrap()).unwrap();
    let b = branch_and_bound(&model, &cfg, argmax_incumbent(&inst, &y).unwrap()).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn exclusion_skips_the_best_combination() {
    let inst = random_instance(3, 3, 2, 4);
    let y = random_duals(&inst, 500.0, 9);
    let best = enumerate_best(&inst, &y, None).unwrap();
    let excluded = [best.combination.clone()].into_iter().collect();
    let second = enumerate_best(&inst, &y, Some(&excluded)).unwrap();
    assert_ne!(second.combination, best.combination);
    assert!(second.reduced_cost <= best.reduced_cost);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_points_evaluate_to_reduced_cost(seed in 0u64..10_000, n in 2usize..5, p in 1usize..4, picks in prop::collection::vec(0usize..4, 4)) {
        let inst = shifted(&random_instance(n, p, 2, seed));
        let y = random_duals(&inst, 1000.0, seed ^ 0x5eed);
        let model = build_gen_lp(&inst, &y).unwrap();
        let s = Combination((0..n).map(|i| picks[i] % p).collect());
        let z = model.encode(&s);
        let direct = reduced_cost(&inst, &y, &s);
        prop_assert!((model.objective_value(&z) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        prop_assert_eq!(model.decode(&z[..model.num_z1()], 1e-6), Some(s));
    }

    #[test]
    fn pricing_value_is_shift_invariant(seed in 0u64..10_000, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let inst = random_instance(3, 3, 2, seed);
        let y = random_duals(&inst, 1000.0, seed + 1);
        let moved = Instance::new(
            inst.measures()
                .iter()
                .map(|m| bary_core::DiscreteMeasure::new(
                    m.points.iter().map(|p| vec![p[0] + dx, p[1] + dy]).collect(),
                    m.masses.clone(),
                ))
                .collect(),
            Some(inst.weights().to_vec()),
            bary_core::LoadOptions::default(),
        ).unwrap();
        let a = enumerate_best(&inst, &y, None).unwrap();
        let b = enumerate_best(&moved, &y, None).unwrap();
        prop_assert!((a.reduced_cost - b.reduced_cost).abs() <= 1e-7 * (1.0 + a.reduced_cost.abs()));
    }
}
