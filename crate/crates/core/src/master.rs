//! Restricted master problem over a working set of combinations, and
//! reconstruction of the barycenter from its solution.
//!
//! Rows of the master are indexed measure-major: row `offsets[i] + k` holds
//! the mass balance of point `k` in measure `i`. Dual vectors use the same
//! order.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Combination, Instance};
use crate::lp::{solve_lp, Basis, LpProblem, LpStatus, Relation, Sense};

/// Mass below which a master column is treated as unused.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Per-coordinate tolerance for merging coinciding support points.
pub const MERGE_TOL: f64 = 1e-9;
/// Remaining mass treated as exhausted by the greedy start.
const GREEDY_RESIDUAL: f64 = 1e-14;

/// `Σ_{i<j} λ_i λ_j ||x_i − x_j||²` for the points selected by `s`.
pub fn combination_cost(inst: &Instance, s: &Combination) -> f64 {
    let lambda = inst.weights();
    let n = inst.n();
    let mut total = 0.0;
    for i in 0..n {
        let xi = inst.point(i, s.0[i]);
        for j in i + 1..n {
            let xj = inst.point(j, s.0[j]);
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            total += lambda[i] * lambda[j] * d2;
        }
    }
    total
}

/// `y^T A_s`: the sum of the duals of the points selected by `s`.
pub fn dual_sum(inst: &Instance, y: &[f64], s: &Combination) -> f64 {
    let off = inst.offsets();
    s.0.iter().enumerate().map(|(i, &k)| y[off[i] + k]).sum()
}

/// `y^T A_s − c_s`.
pub fn reduced_cost(inst: &Instance, y: &[f64], s: &Combination) -> f64 {
    dual_sum(inst, y, s) - combination_cost(inst, s)
}

/// `λ`-weighted mean of the points selected by `s`.
pub fn weighted_mean(inst: &Instance, s: &Combination) -> Vec<f64> {
    let mut mean = vec![0.0; inst.dimension()];
    for (i, (&k, &l)) in s.0.iter().zip(inst.weights()).enumerate() {
        for (m, x) in mean.iter_mut().zip(inst.point(i, k)) {
            *m += l * x;
        }
    }
    mean
}

/// Ordered, duplicate-free list of combinations with their costs.
#[derive(Clone, Debug, Default)]
pub struct WorkingSet {
    combinations: Vec<Combination>,
    costs: Vec<f64>,
    members: HashSet<Combination>,
}

impl WorkingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_combinations(inst: &Instance, combos: impl IntoIterator<Item = Combination>) -> Result<Self> {
        let mut ws = Self::new();
        for s in combos {
            ws.add_column(inst, s)?;
        }
        Ok(ws)
    }

    pub fn len(&self) -> usize {
        self.combinations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combinations.is_empty()
    }

    pub fn combinations(&self) -> &[Combination] {
        &self.combinations
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn contains(&self, s: &Combination) -> bool {
        self.members.contains(s)
    }

    pub fn members(&self) -> &HashSet<Combination> {
        &self.members
    }

    /// Appends `s` with its cost; existing columns keep their positions.
    pub fn add_column(&mut self, inst: &Instance, s: Combination) -> Result<()> {
        if !inst.is_valid_combination(&s) {
            return Err(Error::InvalidInstance(format!(
                "combination {s} does not fit the instance"
            )));
        }
        if self.members.contains(&s) {
            return Err(Error::DuplicateColumn(s.one_based()));
        }
        self.costs.push(combination_cost(inst, &s));
        self.members.insert(s.clone());
        self.combinations.push(s);
        Ok(())
    }
}

/// Optimal master masses, duals and objective, plus the basis for warm starts.
#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
}

/// The restricted master `min c^T w, A w = d, w >= 0`.
pub fn build_master_lp(inst: &Instance, ws: &WorkingSet) -> LpProblem {
    let off = inst.offsets();
    let mut prob = LpProblem::new(Sense::Minimize, ws.costs().to_vec());
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.total_support()];
    for (h, s) in ws.combinations().iter().enumerate() {
        for (i, &k) in s.0.iter().enumerate() {
            rows[off[i] + k].push((h, 1.0));
        }
    }
    for (i, m) in inst.measures().iter().enumerate() {
        for (k, &mass) in m.masses.iter().enumerate() {
            let terms = std::mem::take(&mut rows[off[i] + k]);
            prob.add_constraint(terms, Relation::Eq, mass);
        }
    }
    prob
}

pub fn build_and_solve_master(
    inst: &Instance,
    ws: &WorkingSet,
    warm_start: Option<&Basis>,
) -> Result<MasterSolution> {
    let prob = build_master_lp(inst, ws);
    let out = solve_lp(&prob, warm_start)?;
    match out.status {
        LpStatus::Optimal => Ok(MasterSolution {
            w: out.primal,
            y: out.dual,
            objective: out.objective,
            basis: out.basis,
        }),
        _ => Err(Error::InfeasibleMaster { columns: ws.len() }),
    }
}

/// Free-function form of [`WorkingSet::add_column`].
pub fn add_column(ws: &mut WorkingSet, inst: &Instance, s: Combination) -> Result<()> {
    ws.add_column(inst, s)
}

/// Greedy feasible start: repeatedly combine the first point with remaining
/// mass in every measure and ship the smallest remaining mass among them.
pub fn greedy_initial(inst: &Instance) -> (WorkingSet, Vec<f64>) {
    let mut remaining: Vec<Vec<f64>> = inst.measures().iter().map(|m| m.masses.clone()).collect();
    let mut cursor = vec![0usize; inst.n()];
    let mut exhausted = vec![false; inst.n()];
    let mut ws = WorkingSet::new();
    let mut w: Vec<f64> = Vec::new();
    while exhausted.iter().any(|e| !e) {
        let mass = (0..inst.n())
            .filter(|&i| !exhausted[i])
            .map(|i| remaining[i][cursor[i]])
            .fold(f64::INFINITY, f64::min);
        let s = Combination(cursor.clone());
        if ws.combinations().last() == Some(&s) {
            *w.last_mut().unwrap() += mass;
        } else {
            ws.add_column(inst, s).expect("greedy combinations are distinct");
            w.push(mass);
        }
        for i in 0..inst.n() {
            if exhausted[i] {
                continue;
            }
            let k = cursor[i];
            let left = remaining[i][k] - mass;
            if left <= GREEDY_RESIDUAL {
                remaining[i][k] = 0.0;
                if k + 1 < remaining[i].len() {
                    cursor[i] = k + 1;
                } else {
                    exhausted[i] = true;
                }
            } else {
                remaining[i][k] = left;
            }
        }
    }
    (ws, w)
}

/// One support point of the barycenter with the combinations that place
/// mass there.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportEntry {
    pub point: Vec<f64>,
    pub mass: f64,
    pub sources: Vec<(Combination, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Barycenter {
    pub support: Vec<SupportEntry>,
    pub cost: f64,
}

#[derive(Serialize)]
struct SupportJson<'a> {
    point: &'a [f64],
    mass: f64,
    combination: Vec<usize>,
}

#[derive(Serialize)]
struct BarycenterJson<'a> {
    cost: f64,
    support: Vec<SupportJson<'a>>,
}

impl Barycenter {
    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|e| e.mass).sum()
    }

    /// Solution JSON; each entry reports its heaviest source combination,
    /// 1-based.
    pub fn to_json_value(&self) -> serde_json::Value {
        let support = self
            .support
            .iter()
            .map(|e| {
                let main = e
                    .sources
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .map(|s| s.0.one_based())
                    .unwrap_or_default();
                SupportJson {
                    point: &e.point,
                    mass: e.mass,
                    combination: main,
                }
            })
            .collect();
        serde_json::to_value(BarycenterJson {
            cost: self.cost,
            support,
        })
        .expect("barycenter serializes")
    }
}

pub fn extract_barycenter(inst: &Instance, ws: &WorkingSet, sol: &MasterSolution) -> Barycenter {
    let mut support: Vec<SupportEntry> = Vec::new();
    for (s, &w) in ws.combinations().iter().zip(&sol.w) {
        if w <= SUPPORT_TOL {
            continue;
        }
        let point = weighted_mean(inst, s);
        let existing = support.iter_mut().find(|e| {
            e.point
                .iter()
                .zip(&point)
                .all(|(a, b)| (a - b).abs() <= MERGE_TOL)
        });
        match existing {
            Some(e) => {
                e.mass += w;
                e.sources.push((s.clone(), w));
            }
            None => support.push(SupportEntry {
                point,
                mass: w,
                sources: vec![(s.clone(), w)],
            }),
        }
    }
    Barycenter {
        support,
        cost: sol.objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{DiscreteMeasure, LoadOptions};

    fn inst(measures: Vec<(Vec<Vec<f64>>, Vec<f64>)>) -> Instance {
        Instance::new(
            measures
                .into_iter()
                .map(|(p, m)| DiscreteMeasure::new(p, m))
                .collect(),
            None,
            LoadOptions::default(),
        )
        .unwrap()
    }

    fn two_singletons() -> Instance {
        inst(vec![
            (vec![vec![0.0, 0.0]], vec![1.0]),
            (vec![vec![2.0, 0.0]], vec![1.0]),
        ])
    }

    #[test]
    fn cost_examples() {
        assert_eq!(combination_cost(&two_singletons(), &Combination(vec![0, 0])), 1.0);
        let tri = inst(vec![
            (vec![vec![0.0, 0.0]], vec![1.0]),
            (vec![vec![3.0, 0.0]], vec![1.0]),
            (vec![vec![0.0, 3.0]], vec![1.0]),
        ]);
        assert!((combination_cost(&tri, &Combination(vec![0, 0, 0])) - 4.0).abs() < 1e-12);
        let same = inst(vec![
            (vec![vec![1.5, 2.0]], vec![1.0]),
            (vec![vec![1.5, 2.0]], vec![1.0]),
        ]);
        assert_eq!(combination_cost(&same, &Combination(vec![0, 0])), 0.0);
    }

    #[test]
    fn single_column_master_and_barycenter() {
        let inst = two_singletons();
        let ws = WorkingSet::from_combinations(&inst, [Combination(vec![0, 0])]).unwrap();
        let sol = build_and_solve_master(&inst, &ws, None).unwrap();
        assert!((sol.w[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        let bary = extract_barycenter(&inst, &ws, &sol);
        assert_eq!(bary.support.len(), 1);
        assert_eq!(bary.support[0].point, vec![1.0, 0.0]);
        assert!((bary.support[0].mass - 1.0).abs() < 1e-12);
        assert_eq!(bary.cost, sol.objective);
        let json = bary.to_json_value();
        assert_eq!(json["support"][0]["combination"], serde_json::json!([1, 1]));
    }

    #[test]
    fn duplicate_column_rejected() {
        let inst = two_singletons();
        let mut ws = WorkingSet::new();
        add_column(&mut ws, &inst, Combination(vec![0, 0])).unwrap();
        assert_eq!(ws.len(), 1);
        assert!(matches!(
            add_column(&mut ws, &inst, Combination(vec![0, 0])),
            Err(Error::DuplicateColumn(_))
        ));
    }

    #[test]
    fn greedy_trace() {
        let inst = inst(vec![
            (vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]),
            (vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]),
        ]);
        let (ws, w) = greedy_initial(&inst);
        let combos: Vec<Vec<usize>> = ws.combinations().iter().map(|c| c.one_based()).collect();
        assert_eq!(combos, vec![vec![1, 1], vec![1, 2], vec![2, 2]]);
        let expect = [0.3, 0.2, 0.5];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_columns_dropped() {
        let inst = inst(vec![
            (vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]),
            (vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]),
        ]);
        let ws = WorkingSet::from_combinations(
            &inst,
            [Combination(vec![0, 0]), Combination(vec![1, 1]), Combination(vec![0, 1]), Combination(vec![1, 0])],
        )
        .unwrap();
        let sol = build_and_solve_master(&inst, &ws, None).unwrap();
        assert!(sol.objective.abs() < 1e-12);
        let bary = extract_barycenter(&inst, &ws, &sol);
        assert_eq!(bary.support.len(), 2);
        assert!((bary.total_mass() - 1.0).abs() < 1e-9);
    }
}
