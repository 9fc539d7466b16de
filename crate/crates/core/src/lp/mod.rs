//! Linear programming kernel: problem description, bounded-variable simplex
//! and an LP-format writer for debugging.

mod lu;
mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::{SimplexEngine, FEAS_TOL, OPT_TOL, PIVOT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A sparse row `terms · x (relation) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("iteration limit {0} exceeded")]
    IterationLimit(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Position of a variable relative to the basis. `Free` marks a nonbasic
/// variable without finite bounds, held at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// Basis statuses for structural columns and row logicals. Columns may be
/// appended (as nonbasic) between solves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub columns: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

impl Basis {
    /// Extends the basis with nonbasic columns at their lower bound.
    pub fn push_column(&mut self) {
        self.columns.push(VarStatus::AtLower);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One multiplier per constraint, with the sign convention of the
    /// problem's own sense.
    pub dual: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub iterations: usize,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpProblem {
    /// An unconstrained problem with `x >= 0`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            terms,
            relation,
            rhs,
        });
    }

    pub fn add_dense_constraint(&mut self, row: &[f64], relation: Relation, rhs: f64) {
        let terms = row
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        self.add_constraint(terms, relation, rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    /// Dense copy of the constraint matrix.
    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.constraints
            .iter()
            .map(|c| {
                let mut row = vec![0.0; self.num_vars()];
                for &(j, v) in &c.terms {
                    row[j] += v;
                }
                row
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(format!(
                "{} objective entries but {} lower and {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("invalid bounds [{l}, {u}] on x{j}")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("non-finite rhs in row {i}")));
            }
            for &(j, v) in &c.terms {
                if j >= n {
                    return Err(LpError::Malformed(format!(
                        "row {i} references x{j}, problem has {n} variables"
                    )));
                }
                if !v.is_finite() {
                    return Err(LpError::Malformed(format!("non-finite coefficient in row {i}")));
                }
            }
        }
        Ok(())
    }

    /// Writes the problem in CPLEX LP format.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::new();
        s.push_str(match self.sense {
            Sense::Minimize => "Minimize\n",
            Sense::Maximize => "Maximize\n",
        });
        s.push_str(" obj:");
        write_terms(&mut s, self.objective.iter().copied().enumerate());
        s.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(s, " c{i}:");
            write_terms(&mut s, c.terms.iter().copied());
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(s, " {rel} {:?}", c.rhs);
        }
        s.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) if l == u => {
                    let _ = writeln!(s, " x{j} = {l:?}");
                }
                (true, true) => {
                    let _ = writeln!(s, " {l:?} <= x{j} <= {u:?}");
                }
                (true, false) if l == 0.0 => {}
                (true, false) => {
                    let _ = writeln!(s, " x{j} >= {l:?}");
                }
                (false, true) => {
                    let _ = writeln!(s, " -inf <= x{j} <= {u:?}");
                }
                (false, false) => {
                    let _ = writeln!(s, " x{j} free");
                }
            }
        }
        s.push_str("End\n");
        s
    }
}

fn write_terms(s: &mut String, terms: impl Iterator<Item = (usize, f64)>) {
    let mut any = false;
    for (j, v) in terms {
        if v == 0.0 {
            continue;
        }
        let sign = if v < 0.0 { '-' } else { '+' };
        let _ = write!(s, " {sign} {:?} x{j}", v.abs());
        any = true;
    }
    if !any {
        s.push_str(" 0 x0");
    }
}

/// Solves `prob`, optionally starting from a previously returned basis.
pub fn solve_lp(prob: &LpProblem, warm_start: Option<&Basis>) -> Result<LpOutcome, LpError> {
    let mut engine = SimplexEngine::new(prob)?;
    if let Some(b) = warm_start {
        let mut b = b.clone();
        b.columns.resize(prob.num_vars(), VarStatus::AtLower);
        b.rows.resize(prob.num_constraints(), VarStatus::Basic);
        engine.load_basis(&b)?;
    }
    engine.solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9
    }

    #[test]
    fn dominance_example() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, 2.0]);
        p.add_dense_constraint(&[1.0, 1.0], Relation::Eq, 1.0);
        let out = solve_lp(&p, None).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!(approx(out.primal[0], 1.0) && approx(out.primal[1], 0.0));
        assert!(approx(out.objective, 1.0));
        assert!(approx(out.dual[0], 1.0));
    }

    #[test]
    fn empty_feasible_set() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0]);
        p.add_dense_constraint(&[1.0], Relation::Le, -1.0);
        assert_eq!(solve_lp(&p, None).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 1.0]);
        p.add_dense_constraint(&[1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&p, None).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn maximize_with_ge_rows_and_duals() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 7, x <= 3
        let mut p = LpProblem::new(Sense::Maximize, vec![3.0, 2.0]);
        p.add_dense_constraint(&[1.0, 1.0], Relation::Le, 4.0);
        p.add_dense_constraint(&[1.0, 3.0], Relation::Le, 7.0);
        p.set_bounds(0, 0.0, 3.0);
        let out = solve_lp(&p, None).unwrap();
        assert!(approx(out.objective, 11.0));
        assert!(approx(out.primal[0], 3.0) && approx(out.primal[1], 1.0));
        assert!(approx(out.dual[0], 2.0) && approx(out.dual[1], 0.0));

        // min x + y, x + 2y >= 2, 3x + y >= 3
        let mut q = LpProblem::new(Sense::Minimize, vec![1.0, 1.0]);
        q.add_dense_constraint(&[1.0, 2.0], Relation::Ge, 2.0);
        q.add_dense_constraint(&[3.0, 1.0], Relation::Ge, 3.0);
        let out = solve_lp(&q, None).unwrap();
        assert!(approx(out.objective, 1.4));
        let dual_obj: f64 = out.dual.iter().zip([2.0, 3.0]).map(|(y, b)| y * b).sum();
        assert!(approx(dual_obj, 1.4));
    }

    #[test]
    fn free_and_negative_bounds() {
        // min x - y with x free, -2 <= y <= 5, x >= y - 1, x + y = 0
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, -1.0]);
        p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        p.set_bounds(1, -2.0, 5.0);
        p.add_dense_constraint(&[1.0, -1.0], Relation::Ge, -1.0);
        p.add_dense_constraint(&[1.0, 1.0], Relation::Eq, 0.0);
        let out = solve_lp(&p, None).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!(approx(out.objective, -1.0));
        assert!(approx(out.primal[0], -0.5) && approx(out.primal[1], 0.5));
    }

    #[test]
    fn warm_start_after_bound_change() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 1.0, 1.0]);
        p.add_dense_constraint(&[1.0, 2.0, 1.0], Relation::Le, 4.0);
        p.add_dense_constraint(&[2.0, 1.0, 3.0], Relation::Le, 5.0);
        let first = solve_lp(&p, None).unwrap();
        p.set_bounds(0, 0.0, 0.5);
        let warm = solve_lp(&p, Some(&first.basis)).unwrap();
        let cold = solve_lp(&p, None).unwrap();
        assert!(approx(warm.objective, cold.objective));
    }

    #[test]
    fn lp_format_output() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, -2.5]);
        p.add_dense_constraint(&[1.0, 1.0], Relation::Eq, 1.0);
        p.set_bounds(1, 0.0, 1.0);
        let s = p.to_lp_format();
        assert!(s.starts_with("Minimize\n obj: + 1.0 x0 - 2.5 x1\n"));
        assert!(s.contains(" c0: + 1.0 x0 + 1.0 x1 = 1.0\n"));
        assert!(s.contains(" 0.0 <= x1 <= 1.0\n"));
        assert!(s.ends_with("End\n"));
    }

    #[test]
    fn malformed_rejected() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0]);
        p.add_constraint(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&p, None), Err(LpError::Malformed(_))));
    }
}
