//! Column generation against the full barycenter LP, plus invariances and
//! file round trips.

use bary_core::generate::{random_instance, random_instance_with_sizes};
use bary_core::lp::{solve_lp, LpProblem, LpStatus, Relation, Sense};
use bary_core::{
    run, DiscreteMeasure, Instance, LoadOptions, PricingBackend, SolverConfig, Termination,
};

/// Every combination in odometer order.
fn all_combinations(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut s = vec![0; sizes.len()];
    loop {
        out.push(s.clone());
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            s[i] += 1;
            if s[i] < sizes[i] {
                break;
            }
            s[i] = 0;
        }
    }
}

/// `sum_i lambda_i |mean - x_i|^2` for the weighted mean of the selected points.
fn transport_cost(inst: &Instance, s: &[usize]) -> f64 {
    let lam = inst.weights();
    let d = inst.dimension();
    let mut mean = vec![0.0; d];
    for (i, &k) in s.iter().enumerate() {
        for (m, v) in mean.iter_mut().zip(&inst.measure(i).points[k]) {
            *m += lam[i] * v;
        }
    }
    s.iter()
        .enumerate()
        .map(|(i, &k)| {
            let p = &inst.measure(i).points[k];
            lam[i] * p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum()
}

/// Optimal value of the barycenter LP over all combinations.
fn full_lp_optimum(inst: &Instance) -> f64 {
    let sizes = inst.sizes();
    let combos = all_combinations(&sizes);
    let costs: Vec<f64> = combos.iter().map(|s| transport_cost(inst, s)).collect();
    let mut prob = LpProblem::new(Sense::Minimize, costs);
    for (i, m) in inst.measures().iter().enumerate() {
        for k in 0..sizes[i] {
            let terms = combos
                .iter()
                .enumerate()
                .filter(|(_, s)| s[i] == k)
                .map(|(h, _)| (h, 1.0))
                .collect();
            prob.add_constraint(terms, Relation::Eq, m.masses[k]);
        }
    }
    let out = solve_lp(&prob, None).unwrap();
    assert_eq!(out.status, LpStatus::Optimal);
    out.objective
}

fn solve(inst: &Instance, pricing: PricingBackend, sort: bool) -> f64 {
    let cfg = SolverConfig {
        pricing,
        sort_measures: sort,
        ..SolverConfig::default()
    };
    let (bary, report) = run(inst, &cfg).unwrap();
    assert_eq!(report.terminated, Termination::Optimal);
    assert!((bary.total_mass() - 1.0).abs() <= 1e-9);
    assert!((bary.cost - report.final_cost).abs() <= 1e-12);
    report.final_cost
}

#[test]
fn both_backends_reach_the_full_lp_optimum() {
    for seed in 0..8u64 {
        let sizes: Vec<usize> = (0..3 + seed as usize % 2).map(|i| 2 + (i * 7 + seed as usize) % 3).collect();
        let inst = random_instance_with_sizes(&sizes, 2, 40 + seed);
        let reference = full_lp_optimum(&inst);
        for pricing in [PricingBackend::Classic, PricingBackend::Mip] {
            let got = solve(&inst, pricing, false);
            assert!((got - reference).abs() <= 1e-8 * (1.0 + reference), "seed {seed} {pricing}: {got} vs {reference}");
        }
    }
}

/// Optimum of `random_instance(3, 3, 2, 1)`, computed with the full LP
/// oracle above and frozen.
const FROZEN_N3P3_SEED1: f64 = 355.479_196_583_729_3;

#[test]
fn frozen_optimum() {
    let inst = random_instance(3, 3, 2, 1);
    assert!((full_lp_optimum(&inst) - FROZEN_N3P3_SEED1).abs() <= 1e-8);
    let got = solve(&inst, PricingBackend::Mip, false);
    assert!((got - FROZEN_N3P3_SEED1).abs() <= 1e-8);
}

#[test]
fn cost_is_invariant_under_translation_and_measure_order() {
    let inst = random_instance_with_sizes(&[4, 2, 3, 3], 2, 12);
    let base = solve(&inst, PricingBackend::Mip, false);
    let moved = Instance::new(
        inst.measures()
            .iter()
            .map(|m| {
                DiscreteMeasure::new(
                    m.points.iter().map(|p| vec![p[0] - 250.0, p[1] + 3.5]).collect(),
                    m.masses.clone(),
                )
            })
            .collect(),
        None,
        LoadOptions::default(),
    )
    .unwrap();
    let reversed = inst.permuted(&[3, 2, 1, 0]);
    for other in [
        solve(&moved, PricingBackend::Mip, false),
        solve(&reversed, PricingBackend::Mip, false),
        solve(&inst, PricingBackend::Mip, true),
        solve(&inst, PricingBackend::Classic, true),
    ] {
        assert!((other - base).abs() <= 1e-8 * (1.0 + base));
    }
}

#[test]
fn barycenter_points_are_means_in_caller_coordinates() {
    let inst = random_instance_with_sizes(&[3, 2, 4], 2, 3);
    let cfg = SolverConfig {
        sort_measures: true,
        ..SolverConfig::default()
    };
    let (bary, _) = run(&inst, &cfg).unwrap();
    for e in &bary.support {
        let (s, _) = &e.sources[0];
        let mean = bary_core::master::weighted_mean(&inst, s);
        assert!(e.point.iter().zip(&mean).all(|(a, b)| (a - b).abs() <= 1e-9));
        assert!(e.mass > 0.0);
    }
    let json = bary.to_json_value();
    assert_eq!(json["support"].as_array().unwrap().len(), bary.support.len());
}

#[test]
fn instance_files_round_trip() {
    let inst = random_instance_with_sizes(&[3, 1, 2], 3, 8);
    let json = inst.to_json_string();
    assert_eq!(Instance::from_json_str(&json, None, LoadOptions::default()).unwrap(), inst);
    let csv = inst.to_csv_string();
    let weights = bary_core::instance::parse_weights_csv(&inst.weights_csv_string()).unwrap();
    assert_eq!(Instance::from_csv_str(&csv, Some(weights), LoadOptions::default()).unwrap(), inst);
}

#[test]
fn uneven_weights_are_respected() {
    let inst = random_instance(3, 2, 2, 21);
    let weighted = Instance::new(inst.measures().to_vec(), Some(vec![0.5, 0.3, 0.2]), LoadOptions::default()).unwrap();
    let reference = full_lp_optimum(&weighted);
    let got = solve(&weighted, PricingBackend::Mip, false);
    assert!((got - reference).abs() <= 1e-8 * (1.0 + reference));
}
