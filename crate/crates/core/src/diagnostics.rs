//! Structural checks on the pricing relaxation: active-constraint rank at a
//! point, and a 5×5 submatrix with determinant −2 showing the constraint
//! matrix is not totally unimodular.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::Relation;
use crate::pricing::GenLpModel;

/// Diagonal magnitude of the pivoted QR factor below which a row is
/// considered dependent.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RankCertificate {
    pub active_rows: usize,
    pub rank: usize,
    pub dimension: usize,
    pub is_vertex: bool,
}

/// Numerical rank by column-pivoted QR.
pub fn matrix_rank(rows: &[Vec<f64>], cols: usize) -> usize {
    if rows.is_empty() || cols == 0 {
        return 0;
    }
    // factor the transpose so the factored matrix is never wider than tall
    let a = DMatrix::from_fn(cols, rows.len(), |r, c| rows[c][r]);
    let r = a.col_piv_qr().r();
    (0..r.nrows().min(r.ncols()))
        .filter(|&i| r[(i, i)].abs() > RANK_TOL)
        .count()
}

/// Rank of the constraints active at `z`: all equalities, inequalities with
/// slack at most `tol`, and nonnegativity bounds with value at most `tol`.
pub fn vertex_rank(model: &GenLpModel, z: &[f64], tol: f64) -> Result<RankCertificate> {
    let dim = model.num_vars();
    if z.len() != dim {
        return Err(Error::InfeasiblePoint(format!("expected {dim} values, got {}", z.len())));
    }
    if let Some(j) = (0..dim).find(|&j| z[j] < -tol) {
        return Err(Error::InfeasiblePoint(format!("variable {j} is negative ({})", z[j])));
    }
    let mut active: Vec<Vec<f64>> = Vec::new();
    for (r, c) in model.lp().constraints.iter().enumerate() {
        let lhs: f64 = c.terms.iter().map(|&(j, v)| v * z[j]).sum();
        let slack = match c.relation {
            Relation::Le => c.rhs - lhs,
            Relation::Ge => lhs - c.rhs,
            Relation::Eq => -(lhs - c.rhs).abs(),
        };
        if slack < -tol {
            return Err(Error::InfeasiblePoint(format!("row {r} violated by {}", -slack)));
        }
        if c.relation == Relation::Eq || slack <= tol {
            let mut row = vec![0.0; dim];
            for &(j, v) in &c.terms {
                row[j] += v;
            }
            active.push(row);
        }
    }
    for (j, &v) in z.iter().enumerate() {
        if v <= tol {
            let mut row = vec![0.0; dim];
            row[j] = 1.0;
            active.push(row);
        }
    }
    let rank = matrix_rank(&active, dim);
    Ok(RankCertificate {
        active_rows: active.len(),
        rank,
        dimension: dim,
        is_vertex: rank == dim,
    })
}

/// The point with `z_ik = 1/|P_i|` and every product at the minimum of its
/// two parents.
pub fn uniform_point(model: &GenLpModel) -> Vec<f64> {
    let mut z = vec![0.0; model.num_vars()];
    for (i, &p) in model.sizes().iter().enumerate() {
        for k in 0..p {
            z[model.z1_index(i, k)] = 1.0 / p as f64;
        }
    }
    for t in model.num_z1()..model.num_vars() {
        let (a, b) = model.parents(t);
        z[t] = z[a].min(z[b]);
    }
    z
}

/// Variables `z_11, z_12, z_21, z_1211, z_1221` of the witness, 0-based.
pub fn witness_columns(model: &GenLpModel) -> Result<[usize; 5]> {
    let sizes = model.sizes();
    if sizes.len() < 2 {
        return Err(Error::WitnessTooSmall("n ≥ 2".into()));
    }
    if sizes[0] < 2 || sizes[1] < 2 {
        return Err(Error::WitnessTooSmall("p ≥ 2".into()));
    }
    Ok([
        model.z1_index(0, 0),
        model.z1_index(0, 1),
        model.z1_index(1, 0),
        model.z2_index(0, 1, 0, 0),
        model.z2_index(0, 1, 1, 0),
    ])
}

/// The witness submatrix: the first selection row, then the linking rows
/// `z_1211 <= z_11`, `z_1211 <= z_21`, `z_1221 <= z_12`, `z_1221 <= z_21`,
/// restricted to [`witness_columns`].
pub fn witness_matrix(model: &GenLpModel) -> Result<[[f64; 5]; 5]> {
    let cols = witness_columns(model)?;
    let (r1, r2) = model.link_rows(cols[3]);
    let (r3, r4) = model.link_rows(cols[4]);
    let rows = [0, r1, r2, r3, r4];
    let mut u = [[0.0; 5]; 5];
    for (a, &r) in rows.iter().enumerate() {
        for &(j, v) in &model.lp().constraints[r].terms {
            if let Some(b) = cols.iter().position(|&c| c == j) {
                u[a][b] += v;
            }
        }
    }
    Ok(u)
}

/// Determinant of [`witness_matrix`], rounded to the integer it equals.
pub fn non_tu_witness(model: &GenLpModel) -> Result<i64> {
    let u = witness_matrix(model)?;
    let m = DMatrix::from_fn(5, 5, |r, c| u[r][c]);
    Ok(m.lu().determinant().round() as i64)
}
