//! Best-bound branch-and-bound over the selection variables of the pricing
//! relaxation.
//!
//! Every expanded node branches on one fractional `z_ik` and solves both
//! children immediately, each warm-started from the parent basis with the
//! fixing applied as a bound change. Open children enter a max-heap keyed on
//! their own LP bound; on equal bounds the earlier insertion wins and the
//! fix-to-one child is inserted first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Condvar, Mutex};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{Basis, LpOutcome, LpStatus, SimplexEngine};

use super::branching::{fractionality_stats, is_fractional, select_branch_variable, BranchingStrategy, BUCKET, INT_TOL};
use super::genlp::{GenLpModel, Var};
use super::PricingResult;

/// Margin by which a node bound or a new integral value must beat the
/// incumbent.
pub const IMPROVE_TOL: f64 = 1e-9;
const LEMMA4_TOL: f64 = BUCKET;

#[derive(Clone, Debug)]
pub struct BbConfig {
    pub strategy: BranchingStrategy,
    pub workers: usize,
    pub int_tol: f64,
    /// Record structural checks on every node LP in [`RunStats`].
    pub check_invariants: bool,
}

impl BbConfig {
    pub fn new(strategy: BranchingStrategy) -> Self {
        Self {
            strategy,
            workers: 1,
            int_tol: INT_TOL,
            check_invariants: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub nodes_processed: usize,
    pub max_depth: usize,
    pub root_fraction_pct: f64,
    pub root_unique_fractional: usize,
    pub lp_solves: usize,
    pub lp_iterations: usize,
    /// Largest `|z_ijkm − min(z_ik, z_jm)|` over all optimal node LPs.
    pub min_rule_max_violation: f64,
    /// Optimal node solutions with at least one fractional selection value.
    pub fractional_vertices: usize,
    /// Fractional solutions without two equal fractional values in
    /// different measures.
    pub lemma4_violations: usize,
    /// Node solutions where a fixed-to-one variable left another selection
    /// in its measure nonzero.
    pub fix_one_violations: usize,
}

/// A node of the search tree. Fixings are flat selection indices.
#[derive(Clone, Debug)]
pub struct BbNode {
    pub fixed_zero: Vec<usize>,
    pub fixed_one: Vec<usize>,
    /// Objective of this node's own LP relaxation.
    pub bound: f64,
    pub depth: usize,
    basis: Option<Basis>,
    z1: Vec<f64>,
}

impl BbNode {
    pub fn root() -> Self {
        Self {
            fixed_zero: Vec::new(),
            fixed_one: Vec::new(),
            bound: f64::INFINITY,
            depth: 0,
            basis: None,
            z1: Vec::new(),
        }
    }

    fn child(&self, var: usize, one: bool) -> Self {
        let mut c = Self {
            fixed_zero: self.fixed_zero.clone(),
            fixed_one: self.fixed_one.clone(),
            bound: self.bound,
            depth: self.depth + 1,
            basis: None,
            z1: Vec::new(),
        };
        if one {
            c.fixed_one.push(var);
        } else {
            c.fixed_zero.push(var);
        }
        c
    }
}

fn node_error(model: &GenLpModel, node: &BbNode, source: crate::lp::LpError) -> Error {
    let pairs = |v: &[usize]| -> Vec<(usize, usize)> {
        v.iter()
            .map(|&t| match model.var(t) {
                Var::Select { i, k } => (i + 1, k + 1),
                Var::Product { .. } => unreachable!("only selections are fixed"),
            })
            .collect()
    };
    Error::NodeLp {
        depth: node.depth,
        fixed_zero: pairs(&node.fixed_zero),
        fixed_one: pairs(&node.fixed_one),
        source,
    }
}

fn apply_fixings(engine: &mut SimplexEngine, model: &GenLpModel, node: &BbNode) {
    for j in 0..model.num_z1() {
        engine.set_bounds(j, 0.0, 1.0);
    }
    for &j in &node.fixed_zero {
        engine.set_bounds(j, 0.0, 0.0);
    }
    for &j in &node.fixed_one {
        engine.set_bounds(j, 1.0, 1.0);
    }
}

fn solve_with(
    engine: &mut SimplexEngine,
    model: &GenLpModel,
    node: &BbNode,
    warm: Option<&Basis>,
) -> Result<LpOutcome> {
    apply_fixings(engine, model, node);
    match warm {
        Some(b) => engine.load_basis(b),
        None => {
            engine.set_slack_basis();
            Ok(())
        }
    }
    .and_then(|_| engine.solve())
    .map_err(|e| node_error(model, node, e))
}

/// Solves the relaxation with the node's fixings applied as bounds.
pub fn solve_node(model: &GenLpModel, node: &BbNode, warm_start: Option<&Basis>) -> Result<LpOutcome> {
    let mut engine = SimplexEngine::new(model.lp())?;
    solve_with(&mut engine, model, node, warm_start)
}

struct HeapEntry {
    seq: u64,
    node: BbNode,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.node
            .bound
            .total_cmp(&other.node.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

struct State {
    heap: BinaryHeap<HeapEntry>,
    seq: u64,
    incumbent: PricingResult,
    stats: RunStats,
    active: usize,
    error: Option<Error>,
}

impl State {
    /// Records a solved node: updates the incumbent on integral solutions and
    /// queues fractional ones that beat it.
    fn absorb(&mut self, model: &GenLpModel, cfg: &BbConfig, mut node: BbNode, out: LpOutcome) -> Result<()> {
        self.stats.lp_solves += 1;
        self.stats.lp_iterations += out.iterations;
        self.stats.max_depth = self.stats.max_depth.max(node.depth);
        match out.status {
            LpStatus::Infeasible => return Ok(()),
            LpStatus::Unbounded => {
                return Err(node_error(
                    model,
                    &node,
                    crate::lp::LpError::Numerical("bounded relaxation reported unbounded".into()),
                ))
            }
            LpStatus::Optimal => {}
        }
        if cfg.check_invariants {
            inspect(model, cfg, &node, &out.primal, &mut self.stats);
        }
        let z1 = &out.primal[..model.num_z1()];
        if let Some(s) = model.decode(z1, cfg.int_tol) {
            let value = model.exact_value(&s);
            if value > self.incumbent.reduced_cost + IMPROVE_TOL {
                self.incumbent = PricingResult {
                    combination: s,
                    reduced_cost: value,
                };
            }
            return Ok(());
        }
        if out.objective <= self.incumbent.reduced_cost + IMPROVE_TOL {
            return Ok(());
        }
        node.bound = out.objective;
        node.z1 = z1.to_vec();
        node.basis = Some(out.basis);
        self.heap.push(HeapEntry { seq: self.seq, node });
        self.seq += 1;
        Ok(())
    }
}

fn inspect(model: &GenLpModel, cfg: &BbConfig, node: &BbNode, z: &[f64], stats: &mut RunStats) {
    let nz1 = model.num_z1();
    for t in nz1..model.num_vars() {
        let (a, b) = model.parents(t);
        let v = (z[t] - z[a].min(z[b])).abs();
        stats.min_rule_max_violation = stats.min_rule_max_violation.max(v);
    }
    let mut frac: Vec<(f64, usize)> = (0..nz1)
        .filter(|&t| is_fractional(z[t], cfg.int_tol))
        .map(|t| match model.var(t) {
            Var::Select { i, .. } => (z[t], i),
            Var::Product { .. } => unreachable!(),
        })
        .collect();
    if !frac.is_empty() {
        stats.fractional_vertices += 1;
        frac.sort_by(|a, b| a.0.total_cmp(&b.0));
        let paired = (0..frac.len()).any(|a| {
            frac[a + 1..]
                .iter()
                .take_while(|b| b.0 - frac[a].0 <= LEMMA4_TOL)
                .any(|b| b.1 != frac[a].1)
        });
        if !paired {
            stats.lemma4_violations += 1;
        }
    }
    for &f in &node.fixed_one {
        let Var::Select { i, k } = model.var(f) else { unreachable!() };
        let others = (0..model.sizes()[i]).filter(|&l| l != k);
        if others.map(|l| z[model.z1_index(i, l)]).any(|v| v > cfg.int_tol) {
            stats.fix_one_violations += 1;
        }
    }
}

/// Maximizes the pricing objective over integral selections, starting from
/// a known feasible combination and its reduced cost.
pub fn branch_and_bound(
    model: &GenLpModel,
    cfg: &BbConfig,
    initial_incumbent: PricingResult,
) -> Result<(PricingResult, RunStats)> {
    let mut engine = SimplexEngine::new(model.lp())?;
    let root = BbNode::root();
    let out = solve_with(&mut engine, model, &root, None)?;
    if out.status != LpStatus::Optimal {
        return Err(node_error(
            model,
            &root,
            crate::lp::LpError::Numerical(format!("root relaxation reported {:?}", out.status)),
        ));
    }
    let (pct, unique) = fractionality_stats(&out.primal[..model.num_z1()], cfg.int_tol);
    let mut state = State {
        heap: BinaryHeap::new(),
        seq: 0,
        incumbent: initial_incumbent,
        stats: RunStats {
            nodes_processed: 1,
            root_fraction_pct: pct,
            root_unique_fractional: unique,
            ..RunStats::default()
        },
        active: 0,
        error: None,
    };
    state.absorb(model, cfg, root, out)?;

    let shared = (Mutex::new(state), Condvar::new());
    let workers = cfg.workers.max(1);
    if workers == 1 {
        worker(model, cfg, &shared, engine);
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let engine = engine.clone();
                let shared = &shared;
                scope.spawn(move || worker(model, cfg, shared, engine));
            }
        });
    }
    let state = shared.0.into_inner().expect("search state lock poisoned");
    if let Some(e) = state.error {
        return Err(e);
    }
    Ok((state.incumbent, state.stats))
}

fn worker(model: &GenLpModel, cfg: &BbConfig, shared: &(Mutex<State>, Condvar), mut engine: SimplexEngine) {
    let (lock, cv) = shared;
    loop {
        let node = {
            let mut st = lock.lock().expect("search state lock poisoned");
            loop {
                if st.error.is_some() {
                    cv.notify_all();
                    return;
                }
                if let Some(e) = st.heap.pop() {
                    if e.node.bound <= st.incumbent.reduced_cost + IMPROVE_TOL {
                        continue;
                    }
                    st.active += 1;
                    if e.node.depth > 0 {
                        st.stats.nodes_processed += 1;
                    }
                    break e.node;
                }
                if st.active == 0 {
                    cv.notify_all();
                    return;
                }
                st = cv.wait(st).expect("search state lock poisoned");
            }
        };

        let result = expand(model, cfg, &mut engine, &node);
        let mut st = lock.lock().expect("search state lock poisoned");
        st.active -= 1;
        match result {
            Ok(children) => {
                for (child, out) in children {
                    if let Err(e) = st.absorb(model, cfg, child, out) {
                        st.error.get_or_insert(e);
                    }
                }
            }
            Err(e) => {
                st.error.get_or_insert(e);
            }
        }
        cv.notify_all();
    }
}

fn expand(
    model: &GenLpModel,
    cfg: &BbConfig,
    engine: &mut SimplexEngine,
    node: &BbNode,
) -> Result<Vec<(BbNode, LpOutcome)>> {
    let var = select_branch_variable(&node.z1, cfg.strategy, cfg.int_tol)?;
    match &node.basis {
        Some(b) => engine.load_basis(b),
        None => {
            engine.set_slack_basis();
            Ok(())
        }
    }
    .map_err(|e| node_error(model, node, e))?;
    engine.save().map_err(|e| node_error(model, node, e))?;
    let mut out = Vec::with_capacity(2);
    for one in [true, false] {
        let child = node.child(var, one);
        apply_fixings(engine, model, &child);
        engine.restore();
        let lp = engine.solve().map_err(|e| node_error(model, &child, e))?;
        out.push((child, lp));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_duals, random_instance, symmetric_instance};
    use crate::instance::Combination;
    use crate::pricing::{argmax_incumbent, build_gen_lp, enumerate_best};

    #[test]
    fn forced_assignment_single_node() {
        let inst = random_instance(2, 1, 2, 3).shift_to_positive_orthant().0;
        let y = [2.0, -1.0];
        let model = build_gen_lp(&inst, &y).unwrap();
        let out = solve_node(&model, &BbNode::root(), None).unwrap();
        let s = Combination(vec![0, 0]);
        assert!((out.objective - model.exact_value(&s)).abs() < 1e-9);
        let inc = argmax_incumbent(&inst, &y).unwrap();
        let (r, stats) = branch_and_bound(&model, &BbConfig::new(BranchingStrategy::IndexOrder), inc).unwrap();
        assert_eq!(stats.nodes_processed, 1);
        assert_eq!(r.combination, s);
    }

    #[test]
    fn fully_fixed_node_is_integral() {
        let inst = random_instance(3, 3, 2, 8).shift_to_positive_orthant().0;
        let y = random_duals(&inst, 1000.0, 1);
        let model = build_gen_lp(&inst, &y).unwrap();
        let mut node = BbNode::root();
        node.fixed_one = vec![model.z1_index(0, 2), model.z1_index(1, 0), model.z1_index(2, 1)];
        let out = solve_node(&model, &node, None).unwrap();
        let s = Combination(vec![2, 0, 1]);
        assert!((out.objective - model.exact_value(&s)).abs() < 1e-9);
    }

    #[test]
    fn matches_enumeration_on_random_duals() {
        for seed in 0..6 {
            let inst = random_instance(3 + seed as usize % 3, 3, 2, seed).shift_to_positive_orthant().0;
            let y = random_duals(&inst, 2000.0, seed + 100);
            let model = build_gen_lp(&inst, &y).unwrap();
            let best = enumerate_best(&inst, &y, None).unwrap();
            for strategy in BranchingStrategy::ALL {
                let mut cfg = BbConfig::new(strategy);
                cfg.check_invariants = true;
                let inc = argmax_incumbent(&inst, &y).unwrap();
                let (r, stats) = branch_and_bound(&model, &cfg, inc).unwrap();
                assert!((r.reduced_cost - best.reduced_cost).abs() < 1e-7, "{strategy} seed {seed}");
                assert!(stats.min_rule_max_violation <= 1e-8);
                assert_eq!(stats.lemma4_violations, 0);
                assert_eq!(stats.fix_one_violations, 0);
                assert!(stats.max_depth + 3 <= inst.total_support());
            }
        }
    }

    #[test]
    fn symmetric_root_is_fractional_and_search_is_exact() {
        let inst = symmetric_instance(3, 3);
        let y = vec![0.0; 9];
        let model = build_gen_lp(&inst, &y).unwrap();
        let inc = argmax_incumbent(&inst, &y).unwrap();
        let (r, stats) = branch_and_bound(&model, &BbConfig::new(BranchingStrategy::MostRepeated), inc).unwrap();
        let best = enumerate_best(&inst, &y, None).unwrap();
        assert!((r.reduced_cost - best.reduced_cost).abs() < 1e-7);
        assert_eq!(stats.root_fraction_pct, 100.0);
        assert_eq!(stats.root_unique_fractional, 1);
    }

    #[test]
    fn parallel_value_matches_serial() {
        let inst = random_instance(5, 4, 2, 21).shift_to_positive_orthant().0;
        let y = random_duals(&inst, 3000.0, 4);
        let model = build_gen_lp(&inst, &y).unwrap();
        let inc = argmax_incumbent(&inst, &y).unwrap();
        let mut cfg = BbConfig::new(BranchingStrategy::ClosestToInteger);
        let (serial, _) = branch_and_bound(&model, &cfg, inc.clone()).unwrap();
        cfg.workers = 4;
        let (par, _) = branch_and_bound(&model, &cfg, inc).unwrap();
        assert!((serial.reduced_cost - par.reduced_cost).abs() < 1e-9);
    }
}
