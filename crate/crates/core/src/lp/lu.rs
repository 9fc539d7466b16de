//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Elimination is right-looking with Markowitz pivot selection under a
//! threshold test. Bases of the pricing relaxation are dominated by slack and
//! product columns, so almost every pivot is a singleton and the factors stay
//! as sparse as the basis itself.

const ABS_PIVOT_TOL: f64 = 1e-10;
const REL_PIVOT_TOL: f64 = 0.01;
const DROP_TOL: f64 = 1e-14;

/// Rows and basis positions left unpivoted by a failed factorization.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub rows: Vec<usize>,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_pos: Vec<usize>,
    piv_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

/// Scratch space for [`LuFactors::refactor`], kept between calls so that
/// repeated factorizations do not allocate.
#[derive(Debug, Clone, Default)]
pub(crate) struct FactorWork {
    rows: Vec<Vec<(usize, f64)>>,
    col_rows: Vec<Vec<usize>>,
    row_done: Vec<bool>,
    col_done: Vec<bool>,
    col_single: Vec<usize>,
    row_single: Vec<usize>,
    marker: Vec<usize>,
    others: Vec<usize>,
    prow: Vec<(usize, f64)>,
}

impl LuFactors {
    /// Factorizes the `m x m` matrix whose column `c` holds `cols[c]` as
    /// `(row, value)` pairs.
    #[cfg(test)]
    pub fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut f = LuFactors::default();
        f.refactor(m, |c| cols[c].iter().copied(), &mut FactorWork::default())?;
        Ok(f)
    }

    /// Replaces the factors by those of the matrix whose column `c` is
    /// produced by `column(c)`.
    pub fn refactor<I, F>(&mut self, m: usize, column: F, w: &mut FactorWork) -> Result<(), Singular>
    where
        F: Fn(usize) -> I,
        I: Iterator<Item = (usize, f64)>,
    {
        w.rows.resize_with(m, Vec::new);
        w.col_rows.resize_with(m, Vec::new);
        w.rows.iter_mut().for_each(Vec::clear);
        w.col_rows.iter_mut().for_each(Vec::clear);
        for c in 0..m {
            for (r, v) in column(c) {
                if v != 0.0 {
                    w.rows[r].push((c, v));
                    w.col_rows[c].push(r);
                }
            }
        }
        let FactorWork {
            rows,
            col_rows,
            row_done,
            col_done,
            col_single,
            row_single,
            marker,
            others,
            prow,
        } = w;
        row_done.clear();
        row_done.resize(m, false);
        col_done.clear();
        col_done.resize(m, false);
        col_single.clear();
        col_single.extend((0..m).filter(|&c| col_rows[c].len() == 1));
        row_single.clear();
        row_single.extend((0..m).filter(|&r| rows[r].len() == 1));
        marker.clear();
        marker.resize(m, usize::MAX);

        self.m = m;
        self.piv_row.clear();
        self.piv_pos.clear();
        self.piv_val.clear();
        self.l_start.clear();
        self.l_start.push(0);
        self.l_idx.clear();
        self.l_val.clear();
        self.u_start.clear();
        self.u_start.push(0);
        self.u_idx.clear();
        self.u_val.clear();
        self.etas.clear();
        self.eta_nnz = 0;

        for _ in 0..m {
            let pivot = next_singleton_col(col_single, col_rows, col_done, rows)
                .or_else(|| next_singleton_row(row_single, rows, row_done, col_rows))
                .or_else(|| markowitz(rows, col_rows, col_done));
            let Some((r, c)) = pivot else {
                return Err(Singular {
                    rows: (0..m).filter(|&r| !row_done[r]).collect(),
                    positions: (0..m).filter(|&c| !col_done[c]).collect(),
                });
            };

            prow.clear();
            prow.append(&mut rows[r]);
            let pval = prow.iter().find(|e| e.0 == c).map(|e| e.1).unwrap();
            self.piv_row.push(r);
            self.piv_pos.push(c);
            self.piv_val.push(pval);
            for &(c2, v) in prow.iter() {
                if c2 != c {
                    self.u_idx.push(c2);
                    self.u_val.push(v);
                }
            }
            self.u_start.push(self.u_idx.len());

            // Eliminate column c from the other active rows.
            others.clear();
            others.extend(col_rows[c].iter().copied().filter(|&r2| r2 != r));
            for &r2 in others.iter() {
                let row2 = &mut rows[r2];
                let at = row2.iter().position(|e| e.0 == c).unwrap();
                let l = row2[at].1 / pval;
                row2.swap_remove(at);
                self.l_idx.push(r2);
                self.l_val.push(l);
                for (i, e) in row2.iter().enumerate() {
                    marker[e.0] = i;
                }
                for &(c2, u) in prow.iter() {
                    if c2 == c {
                        continue;
                    }
                    let mi = marker[c2];
                    if mi != usize::MAX && mi < row2.len() && row2[mi].0 == c2 {
                        row2[mi].1 -= l * u;
                    } else {
                        row2.push((c2, -l * u));
                        col_rows[c2].push(r2);
                    }
                }
                for e in row2.iter() {
                    marker[e.0] = usize::MAX;
                }
                if row2.len() == 1 {
                    row_single.push(r2);
                }
            }
            self.l_start.push(self.l_idx.len());

            for &(c2, _) in prow.iter() {
                if c2 == c {
                    continue;
                }
                let list = &mut col_rows[c2];
                if let Some(at) = list.iter().position(|&x| x == r) {
                    list.swap_remove(at);
                }
                if list.len() == 1 {
                    col_single.push(c2);
                }
            }
            col_rows[c].clear();
            row_done[r] = true;
            col_done[c] = true;
        }
        Ok(())
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn update_fill(&self) -> usize {
        self.eta_nnz
    }

    /// Nonzeros of `L`, `U` and the pivots.
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Records the replacement of basis column `pos` by a column whose
    /// representation in the current basis is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }

    /// Solves `B x = b` in place: `b` is indexed by rows on entry and by basis
    /// positions on exit.
    pub fn ftran(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for t in 0..m {
            let v = b[self.piv_row[t]];
            if v != 0.0 {
                for k in self.l_start[t]..self.l_start[t + 1] {
                    b[self.l_idx[k]] -= self.l_val[k] * v;
                }
            }
        }
        work.resize(m, 0.0);
        for t in (0..m).rev() {
            let mut s = b[self.piv_row[t]];
            for k in self.u_start[t]..self.u_start[t + 1] {
                s -= self.u_val[k] * work[self.u_idx[k]];
            }
            work[self.piv_pos[t]] = s / self.piv_val[t];
        }
        for eta in &self.etas {
            let xp = work[eta.pos] / eta.pivot;
            work[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    work[i] -= a * xp;
                }
            }
        }
        b.copy_from_slice(work);
    }

    /// Solves `B^T y = c` in place: `c` is indexed by basis positions on
    /// entry and by rows on exit.
    pub fn btran(&self, c: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        work.resize(m, 0.0);
        for t in 0..m {
            let wt = c[self.piv_pos[t]] / self.piv_val[t];
            work[self.piv_row[t]] = wt;
            if wt != 0.0 {
                for k in self.u_start[t]..self.u_start[t + 1] {
                    c[self.u_idx[k]] -= self.u_val[k] * wt;
                }
            }
        }
        for t in (0..m).rev() {
            let r = self.piv_row[t];
            let mut s = work[r];
            for k in self.l_start[t]..self.l_start[t + 1] {
                s -= self.l_val[k] * work[self.l_idx[k]];
            }
            work[r] = s;
        }
        c.copy_from_slice(work);
    }
}

fn col_max(c: usize, rows: &[Vec<(usize, f64)>], col_rows: &[Vec<usize>]) -> f64 {
    col_rows[c]
        .iter()
        .map(|&r| value_at(&rows[r], c).abs())
        .fold(0.0, f64::max)
}

fn value_at(row: &[(usize, f64)], c: usize) -> f64 {
    row.iter().find(|e| e.0 == c).map(|e| e.1).unwrap_or(0.0)
}

fn next_singleton_col(
    stack: &mut Vec<usize>,
    col_rows: &[Vec<usize>],
    col_done: &[bool],
    rows: &[Vec<(usize, f64)>],
) -> Option<(usize, usize)> {
    while let Some(c) = stack.pop() {
        if col_done[c] || col_rows[c].len() != 1 {
            continue;
        }
        let r = col_rows[c][0];
        if value_at(&rows[r], c).abs() > ABS_PIVOT_TOL {
            return Some((r, c));
        }
    }
    None
}

fn next_singleton_row(
    stack: &mut Vec<usize>,
    rows: &[Vec<(usize, f64)>],
    row_done: &[bool],
    col_rows: &[Vec<usize>],
) -> Option<(usize, usize)> {
    while let Some(r) = stack.pop() {
        if row_done[r] || rows[r].len() != 1 {
            continue;
        }
        let (c, v) = rows[r][0];
        if v.abs() > ABS_PIVOT_TOL && v.abs() >= REL_PIVOT_TOL * col_max(c, rows, col_rows) {
            return Some((r, c));
        }
    }
    None
}

fn markowitz(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    col_done: &[bool],
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for c in 0..col_rows.len() {
        if col_done[c] || col_rows[c].is_empty() {
            continue;
        }
        let cc = col_rows[c].len() - 1;
        if let Some((_, _, cost, _)) = best {
            if cc == 0 && cost == 0 {
                break;
            }
        }
        let cmax = col_max(c, rows, col_rows);
        for &r in &col_rows[c] {
            let v = value_at(&rows[r], c).abs();
            if v <= ABS_PIVOT_TOL || v < REL_PIVOT_TOL * cmax {
                continue;
            }
            let cost = cc * (rows[r].len() - 1);
            let better = match best {
                None => true,
                Some((_, _, bc, bv)) => cost < bc || (cost == bc && v > bv),
            };
            if better {
                best = Some((r, c, cost, v));
            }
        }
    }
    best.map(|(r, c, _, _)| (r, c))
}
