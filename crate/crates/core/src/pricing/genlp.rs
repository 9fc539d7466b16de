//! LP relaxation of the pricing MIP.
//!
//! Variables are the selections `z_ik` (measure-major) followed by the
//! products `z_ijkm`, `i < j`, in pair-lexicographic order. Rows are the `n`
//! selection equalities `Σ_k z_ik = 1`, then for every product the pair
//! `z_ijkm − z_ik <= 0`, `z_ijkm − z_jm <= 0`. All variables lie in `[0, 1]`.

use crate::error::{Error, Result};
use crate::instance::{Combination, Instance};
use crate::lp::{LpProblem, Relation, Sense};
use crate::master::reduced_cost;

use super::check_duals;

/// A model variable in 0-based indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Select { i: usize, k: usize },
    Product { i: usize, j: usize, k: usize, m: usize },
}

#[derive(Clone, Debug)]
struct PairBlock {
    i: usize,
    j: usize,
    start: usize,
}

#[derive(Clone, Debug)]
pub struct GenLpModel {
    instance: Instance,
    duals: Vec<f64>,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    pairs: Vec<PairBlock>,
    num_z2: usize,
    lp: LpProblem,
}

/// Builds the relaxation for duals `y`. Requires strictly positive
/// coordinates so that every product coefficient is positive.
pub fn build_gen_lp(inst: &Instance, y: &[f64]) -> Result<GenLpModel> {
    check_duals(inst, y)?;
    for (i, m) in inst.measures().iter().enumerate() {
        for (k, p) in m.points.iter().enumerate() {
            if let Some(&value) = p.iter().find(|&&v| v <= 0.0) {
                return Err(Error::NonPositiveCoordinate {
                    measure: i + 1,
                    point: k + 1,
                    value,
                });
            }
        }
    }
    let n = inst.n();
    let sizes = inst.sizes();
    let offsets = inst.offsets();
    let lambda = inst.weights();
    let num_z1 = offsets[n];

    let mut pairs = Vec::new();
    let mut num_z2 = 0;
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(PairBlock { i, j, start: num_z2 });
            num_z2 += sizes[i] * sizes[j];
        }
    }

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut objective = Vec::with_capacity(num_z1 + num_z2);
    for i in 0..n {
        let others: f64 = (0..n).filter(|&j| j != i).map(|j| lambda[j]).sum();
        for k in 0..sizes[i] {
            let x = inst.point(i, k);
            objective.push(y[offsets[i] + k] - lambda[i] * others * dot(x, x));
        }
    }
    for b in &pairs {
        for k in 0..sizes[b.i] {
            for m in 0..sizes[b.j] {
                let c = 2.0 * lambda[b.i] * lambda[b.j] * dot(inst.point(b.i, k), inst.point(b.j, m));
                objective.push(c);
            }
        }
    }

    let mut lp = LpProblem::new(Sense::Maximize, objective);
    for j in 0..num_z1 + num_z2 {
        lp.set_bounds(j, 0.0, 1.0);
    }
    for i in 0..n {
        lp.add_constraint(
            (offsets[i]..offsets[i + 1]).map(|v| (v, 1.0)).collect(),
            Relation::Eq,
            1.0,
        );
    }
    for b in &pairs {
        for k in 0..sizes[b.i] {
            for m in 0..sizes[b.j] {
                let t = num_z1 + b.start + k * sizes[b.j] + m;
                lp.add_constraint(vec![(t, 1.0), (offsets[b.i] + k, -1.0)], Relation::Le, 0.0);
                lp.add_constraint(vec![(t, 1.0), (offsets[b.j] + m, -1.0)], Relation::Le, 0.0);
            }
        }
    }

    Ok(GenLpModel {
        instance: inst.clone(),
        duals: y.to_vec(),
        sizes,
        offsets,
        pairs,
        num_z2,
        lp,
    })
}

impl GenLpModel {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn duals(&self) -> &[f64] {
        &self.duals
    }

    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_z1(&self) -> usize {
        self.offsets[self.n()]
    }

    pub fn num_z2(&self) -> usize {
        self.num_z2
    }

    pub fn num_vars(&self) -> usize {
        self.num_z1() + self.num_z2
    }

    /// Selection equalities plus two linking rows per product variable.
    pub fn num_main_constraints(&self) -> usize {
        self.lp.num_constraints()
    }

    pub fn lp(&self) -> &LpProblem {
        &self.lp
    }

    pub fn objective(&self) -> &[f64] {
        &self.lp.objective
    }

    pub fn z1_index(&self, i: usize, k: usize) -> usize {
        assert!(k < self.sizes[i], "point {k} out of range for measure {i}");
        self.offsets[i] + k
    }

    /// Index of `z_ijkm`; the pair is normalized to `i < j`.
    pub fn z2_index(&self, i: usize, j: usize, k: usize, m: usize) -> usize {
        let (i, j, k, m) = if i < j { (i, j, k, m) } else { (j, i, m, k) };
        assert!(i != j && j < self.n(), "invalid measure pair ({i}, {j})");
        let b = &self.pairs[self.pair_position(i, j)];
        self.num_z1() + b.start + k * self.sizes[j] + m
    }

    fn pair_position(&self, i: usize, j: usize) -> usize {
        let n = self.n();
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Rows `(z_ijkm <= z_ik, z_ijkm <= z_jm)` of product variable `t`.
    pub fn link_rows(&self, t: usize) -> (usize, usize) {
        let q = t - self.num_z1();
        (self.n() + 2 * q, self.n() + 2 * q + 1)
    }

    pub fn var(&self, index: usize) -> Var {
        let nz1 = self.num_z1();
        if index < nz1 {
            let i = self.offsets.partition_point(|&o| o <= index) - 1;
            return Var::Select {
                i,
                k: index - self.offsets[i],
            };
        }
        let q = index - nz1;
        let b = self
            .pairs
            .iter()
            .rev()
            .find(|b| b.start <= q)
            .expect("index within model");
        let r = q - b.start;
        Var::Product {
            i: b.i,
            j: b.j,
            k: r / self.sizes[b.j],
            m: r % self.sizes[b.j],
        }
    }

    /// The two selection variables a product variable links.
    pub fn parents(&self, t: usize) -> (usize, usize) {
        match self.var(t) {
            Var::Product { i, j, k, m } => (self.offsets[i] + k, self.offsets[j] + m),
            Var::Select { .. } => panic!("variable {t} is not a product"),
        }
    }

    /// Full 0/1 vector encoding `s` with products set to `z_ik z_jm`.
    pub fn encode(&self, s: &Combination) -> Vec<f64> {
        let mut z = vec![0.0; self.num_vars()];
        for (i, &k) in s.0.iter().enumerate() {
            z[self.offsets[i] + k] = 1.0;
        }
        for b in &self.pairs {
            let t = self.z2_index(b.i, b.j, s.0[b.i], s.0[b.j]);
            z[t] = 1.0;
        }
        z
    }

    /// Rounds the selection part of `z` to a combination if it is within
    /// `tol` of a 0/1 point satisfying the selection equalities.
    pub fn decode(&self, z1: &[f64], tol: f64) -> Option<Combination> {
        let mut out = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let block = &z1[self.offsets[i]..self.offsets[i + 1]];
            if block.iter().any(|&v| v > tol && v < 1.0 - tol) {
                return None;
            }
            let ones: Vec<usize> = (0..block.len()).filter(|&k| block[k] >= 1.0 - tol).collect();
            if ones.len() != 1 {
                return None;
            }
            out.push(ones[0]);
        }
        Some(Combination(out))
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective().iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Reduced cost of `s` evaluated directly from the instance and duals.
    pub fn exact_value(&self, s: &Combination) -> f64 {
        reduced_cost(&self.instance, &self.duals, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_duals, random_instance, symmetric_instance};

    #[test]
    fn size_examples() {
        let m = build_gen_lp(&symmetric_instance(2, 2), &[0.0; 4]).unwrap();
        assert_eq!((m.num_z1(), m.num_z2(), m.num_main_constraints()), (4, 4, 10));
        let m = build_gen_lp(&symmetric_instance(3, 2), &[0.0; 6]).unwrap();
        assert_eq!((m.num_z1(), m.num_z2(), m.num_main_constraints()), (6, 12, 27));
    }

    #[test]
    fn index_maps_round_trip() {
        let inst = random_instance(4, 3, 2, 1).shift_to_positive_orthant().0;
        let m = build_gen_lp(&inst, &vec![0.0; 12]).unwrap();
        for t in 0..m.num_vars() {
            match m.var(t) {
                Var::Select { i, k } => assert_eq!(m.z1_index(i, k), t),
                Var::Product { i, j, k, m: mm } => {
                    assert_eq!(m.z2_index(i, j, k, mm), t);
                    assert_eq!(m.z2_index(j, i, mm, k), t);
                    let (r1, r2) = m.link_rows(t);
                    let (a, b) = m.parents(t);
                    assert!(m.lp().constraints[r1].terms.contains(&(a, -1.0)));
                    assert!(m.lp().constraints[r2].terms.contains(&(b, -1.0)));
                }
            }
        }
    }

    #[test]
    fn integral_objective_is_reduced_cost() {
        let inst = random_instance(3, 3, 2, 4).shift_to_positive_orthant().0;
        let y = random_duals(&inst, 500.0, 2);
        let m = build_gen_lp(&inst, &y).unwrap();
        let s = Combination(vec![2, 0, 1]);
        let z = m.encode(&s);
        assert!((m.objective_value(&z) - m.exact_value(&s)).abs() < 1e-9);
        assert_eq!(m.decode(&z[..m.num_z1()], 1e-6), Some(s));
    }

    #[test]
    fn nonpositive_coordinates_rejected() {
        let inst = random_instance(2, 2, 2, 4);
        let shifted = inst.shift_to_positive_orthant().0;
        assert!(build_gen_lp(&shifted, &[0.0; 4]).is_ok());
        let origin = crate::instance::Instance::from_json_str(
            r#"{"measures":[{"points":[[0,1]],"masses":[1]},{"points":[[1,1]],"masses":[1]}]}"#,
            None,
            Default::default(),
        )
        .unwrap();
        assert!(matches!(
            build_gen_lp(&origin, &[0.0; 2]),
            Err(Error::NonPositiveCoordinate { .. })
        ));
    }
}
