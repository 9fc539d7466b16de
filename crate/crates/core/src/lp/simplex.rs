//! Bounded-variable revised simplex.
//!
//! Every row `i` gets a logical variable `s_i` with `a_i x + s_i = b_i`, bounded
//! by `[0, inf)` for `<=`, `(-inf, 0]` for `>=` and `[0, 0]` for `=`. The engine
//! minimizes internally; maximization negates the costs on the way in and the
//! duals on the way out.
//!
//! A solve runs the dual simplex while the basis is dual feasible (cold starts
//! on boxed problems, re-solves after bound changes) and finishes with the
//! primal simplex, whose phase 1 minimizes the sum of bound violations. The
//! dual ratio test passes over breakpoints of boxed variables by flipping them
//! to their opposite bound while the leaving row stays infeasible.

use log::trace;

use super::lu::{FactorWork, LuFactors};
use super::{Basis, LpError, LpOutcome, LpProblem, LpStatus, Relation, Sense, VarStatus};

pub const FEAS_TOL: f64 = 1e-9;
pub const OPT_TOL: f64 = 1e-9;
pub const PIVOT_TOL: f64 = 1e-10;

const MAX_UPDATES: usize = 100;
const DEGENERATE_LIMIT: usize = 60;
const NONE: usize = usize::MAX;

enum PrimalStep {
    Flip { t: f64 },
    Pivot { pos: usize, t: f64, target: f64 },
}

#[derive(Clone, Debug, Default)]
struct Saved {
    status: Vec<VarStatus>,
    head: Vec<usize>,
    pos: Vec<usize>,
    lu: LuFactors,
}

/// A reusable solver instance bound to one problem. Bounds may be changed
/// and bases loaded between solves.
#[derive(Clone, Debug)]
pub struct SimplexEngine {
    m: usize,
    n: usize,
    sense: Sense,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<(usize, f64)>>,
    orig_obj: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    pos: Vec<usize>,
    x: Vec<f64>,
    /// Reduced costs, maintained during the dual simplex.
    d: Vec<f64>,
    lu: LuFactors,
    fw: FactorWork,
    factored: bool,
    saved: Option<Saved>,
    work: Vec<f64>,
    col_buf: Vec<f64>,
    row_buf: Vec<f64>,
    alpha_r: Vec<f64>,
    /// Dual Devex weights by basis position.
    dw: Vec<f64>,
    touched: Vec<usize>,
    iterations: usize,
    solve_start: usize,
    iteration_limit: usize,
    degenerate_run: usize,
    bland: bool,
}

impl SimplexEngine {
    pub fn new(prob: &LpProblem) -> Result<Self, LpError> {
        prob.validate()?;
        let n = prob.num_vars();
        let m = prob.num_constraints();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, c) in prob.constraints.iter().enumerate() {
            for &(j, v) in &c.terms {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
            merge_duplicates(col);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                rows[i].push((j, v));
            }
        }
        let sign = match prob.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost: Vec<f64> = prob.objective.iter().map(|c| sign * c).collect();
        cost.resize(n + m, 0.0);
        let mut lower = prob.lower.clone();
        let mut upper = prob.upper.clone();
        for c in &prob.constraints {
            let (lo, hi) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut eng = Self {
            m,
            n,
            sense: prob.sense,
            cols,
            rows,
            orig_obj: prob.objective.clone(),
            cost,
            lower,
            upper,
            rhs: prob.constraints.iter().map(|c| c.rhs).collect(),
            status: vec![VarStatus::AtLower; n + m],
            head: (n..n + m).collect(),
            pos: vec![NONE; n + m],
            x: vec![0.0; n + m],
            d: vec![0.0; n + m],
            lu: LuFactors::default(),
            fw: FactorWork::default(),
            factored: false,
            saved: None,
            work: Vec::with_capacity(m),
            col_buf: vec![0.0; m],
            row_buf: vec![0.0; m],
            alpha_r: vec![0.0; n + m],
            dw: vec![1.0; m],
            touched: Vec::new(),
            iterations: 0,
            solve_start: 0,
            iteration_limit: 50_000 + 50 * (n + m),
            degenerate_run: 0,
            bland: false,
        };
        eng.set_slack_basis();
        Ok(eng)
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    /// All logicals basic, structurals at the bound that favours dual
    /// feasibility.
    pub fn set_slack_basis(&mut self) {
        for j in 0..self.n {
            let (l, u, c) = (self.lower[j], self.upper[j], self.cost[j]);
            self.status[j] = if l == u {
                VarStatus::AtLower
            } else if c < 0.0 && u.is_finite() {
                VarStatus::AtUpper
            } else if l.is_finite() {
                VarStatus::AtLower
            } else if u.is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::Free
            };
            self.pos[j] = NONE;
        }
        for i in 0..self.m {
            self.status[self.n + i] = VarStatus::Basic;
            self.head[i] = self.n + i;
            self.pos[self.n + i] = i;
        }
        self.factored = false;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self.normalize_status(j);
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn basis(&self) -> Basis {
        Basis {
            columns: self.status[..self.n].to_vec(),
            rows: self.status[self.n..].to_vec(),
        }
    }

    /// Installs a basis. Mismatched basic counts are repaired with logicals;
    /// singular bases are repaired at the next factorization.
    pub fn load_basis(&mut self, basis: &Basis) -> Result<(), LpError> {
        if basis.columns.len() != self.n || basis.rows.len() != self.m {
            return Err(LpError::Malformed(format!(
                "basis has {}+{} entries, problem has {}+{}",
                basis.columns.len(),
                basis.rows.len(),
                self.n,
                self.m
            )));
        }
        let mut st: Vec<VarStatus> = basis.columns.iter().chain(&basis.rows).copied().collect();
        let mut basic: Vec<usize> = (0..self.n + self.m)
            .filter(|&j| st[j] == VarStatus::Basic)
            .collect();
        while basic.len() > self.m {
            let j = basic.pop().unwrap();
            st[j] = VarStatus::AtLower;
        }
        let mut i = 0;
        while basic.len() < self.m && i < self.m {
            if st[self.n + i] != VarStatus::Basic {
                st[self.n + i] = VarStatus::Basic;
                basic.push(self.n + i);
            }
            i += 1;
        }
        basic.sort_unstable();
        self.status = st;
        self.pos.iter_mut().for_each(|p| *p = NONE);
        for (p, &j) in basic.iter().enumerate() {
            self.head[p] = j;
            self.pos[j] = p;
        }
        for j in 0..self.n + self.m {
            self.normalize_status(j);
        }
        self.factored = false;
        Ok(())
    }

    /// Factorizes the current basis and keeps a copy for [`restore`].
    ///
    /// [`restore`]: SimplexEngine::restore
    pub fn save(&mut self) -> Result<(), LpError> {
        if !self.factored || self.lu.num_updates() > 0 {
            self.refactor()?;
        }
        let saved = self.saved.get_or_insert_with(Saved::default);
        saved.status.clone_from(&self.status);
        saved.head.clone_from(&self.head);
        saved.pos.clone_from(&self.pos);
        saved.lu.clone_from(&self.lu);
        Ok(())
    }

    /// Reinstates the basis kept by the last [`save`] under the current
    /// bounds. Returns `false` when nothing was saved.
    ///
    /// [`save`]: SimplexEngine::save
    pub fn restore(&mut self) -> bool {
        let Some(saved) = &self.saved else {
            return false;
        };
        self.status.clone_from(&saved.status);
        self.head.clone_from(&saved.head);
        self.pos.clone_from(&saved.pos);
        self.lu.clone_from(&saved.lu);
        self.factored = true;
        for j in 0..self.n + self.m {
            self.normalize_status(j);
        }
        true
    }

    fn normalize_status(&mut self, j: usize) {
        let (l, u) = (self.lower[j], self.upper[j]);
        let s = self.status[j];
        self.status[j] = match s {
            VarStatus::Basic => VarStatus::Basic,
            _ if l == u => VarStatus::AtLower,
            VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
            VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
            VarStatus::Free if !l.is_finite() && !u.is_finite() => VarStatus::Free,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if u.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        };
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => self.x[j],
        }
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        column_of(&self.cols, self.n, j)
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(r, v)| v * y[r]).sum()
        } else {
            y[j - self.n]
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        for _attempt in 0..=self.m {
            let (cols, head, n) = (&self.cols, &self.head, self.n);
            let res = self.lu.refactor(self.m, |p| column_of(cols, n, head[p]), &mut self.fw);
            match res {
                Ok(()) => {
                    self.factored = true;
                    return Ok(());
                }
                Err(sing) => {
                    self.factored = false;
                    trace!("singular basis, repairing {} positions", sing.positions.len());
                    for (&p, &r) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[p];
                        let logical = self.n + r;
                        if self.pos[logical] != NONE {
                            return Err(LpError::Numerical(
                                "basis repair found a basic logical in a dependent row".into(),
                            ));
                        }
                        self.status[out] = VarStatus::AtLower;
                        self.pos[out] = NONE;
                        self.normalize_status(out);
                        self.head[p] = logical;
                        self.pos[logical] = p;
                        self.status[logical] = VarStatus::Basic;
                    }
                }
            }
        }
        Err(LpError::Numerical("basis repair did not converge".into()))
    }

    fn compute_primal(&mut self) {
        let mut b = std::mem::take(&mut self.col_buf);
        b.copy_from_slice(&self.rhs);
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                for (r, a) in self.column(j) {
                    b[r] -= a * v;
                }
            }
        }
        self.lu.ftran(&mut b, &mut self.work);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = b[p];
        }
        self.col_buf = b;
    }

    /// `B^{-1} a_j` into `col_buf`.
    fn ftran_column(&mut self, j: usize) {
        let mut a = std::mem::take(&mut self.col_buf);
        a.iter_mut().for_each(|v| *v = 0.0);
        for (r, v) in self.column(j) {
            a[r] = v;
        }
        self.lu.ftran(&mut a, &mut self.work);
        self.col_buf = a;
    }

    /// Simplex multipliers for basic costs `cb` (indexed by position).
    fn duals_for(&mut self, mut cb: Vec<f64>) -> Vec<f64> {
        self.lu.btran(&mut cb, &mut self.work);
        cb
    }

    fn real_duals(&mut self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.duals_for(cb)
    }

    fn compute_reduced_costs(&mut self) {
        let pi = self.real_duals();
        for j in 0..self.n + self.m {
            self.d[j] = if self.status[j] == VarStatus::Basic {
                0.0
            } else {
                self.cost[j] - self.dot_column(j, &pi)
            };
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        (self.lower[j] - x).max(x - self.upper[j]).max(0.0)
    }

    fn primal_infeasible(&self) -> bool {
        self.head.iter().any(|&j| self.infeasibility(j) > FEAS_TOL)
    }

    fn dual_ok(&self, j: usize) -> bool {
        let d = self.d[j];
        match self.status[j] {
            VarStatus::Basic => true,
            _ if self.is_fixed(j) => true,
            VarStatus::AtLower => d >= -OPT_TOL,
            VarStatus::AtUpper => d <= OPT_TOL,
            VarStatus::Free => d.abs() <= OPT_TOL,
        }
    }

    fn dual_feasible(&self) -> bool {
        (0..self.n + self.m).all(|j| self.dual_ok(j))
    }

    fn tick(&mut self) -> Result<(), LpError> {
        self.iterations += 1;
        if self.iterations - self.solve_start > self.iteration_limit {
            return Err(LpError::IterationLimit(self.iteration_limit));
        }
        Ok(())
    }

    fn note_step(&mut self, t: f64) {
        if t <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run > DEGENERATE_LIMIT {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    /// Basis change at `pos`; `col_buf` must hold `B^{-1} a_entering`.
    /// Returns whether the basis was refactorized, which also recomputes `x`.
    fn pivot(&mut self, pos: usize, entering: usize, target: f64) -> Result<bool, LpError> {
        let leaving = self.head[pos];
        self.x[leaving] = target;
        self.status[leaving] = if target == self.lower[leaving] {
            VarStatus::AtLower
        } else {
            VarStatus::AtUpper
        };
        self.pos[leaving] = NONE;
        self.normalize_status(leaving);
        self.head[pos] = entering;
        self.pos[entering] = pos;
        self.status[entering] = VarStatus::Basic;
        self.lu.update(pos, &self.col_buf);
        if self.lu.num_updates() >= MAX_UPDATES
            || self.lu.update_fill() > 2 * self.lu.factor_nnz() + 4 * self.m
        {
            self.refactor()?;
            self.compute_primal();
            return Ok(true);
        }
        Ok(false)
    }

    /// Runs the simplex method from the current basis and bounds.
    pub fn solve(&mut self) -> Result<LpOutcome, LpError> {
        let start = self.iterations;
        self.solve_start = start;
        for j in 0..self.n {
            if self.lower[j] > self.upper[j] {
                return Ok(self.outcome(LpStatus::Infeasible, start));
            }
        }
        if !self.factored {
            self.refactor()?;
        }
        self.compute_primal();
        if self.primal_infeasible() {
            self.compute_reduced_costs();
            if self.dual_feasible() && self.dual_simplex()? == LpStatus::Infeasible {
                return Ok(self.outcome(LpStatus::Infeasible, start));
            }
        }
        let status = self.primal_simplex()?;
        self.compute_primal();
        Ok(self.outcome(status, start))
    }

    fn primal_simplex(&mut self) -> Result<LpStatus, LpError> {
        self.degenerate_run = 0;
        self.bland = false;
        loop {
            let phase1 = self.primal_infeasible();
            let cb: Vec<f64> = self
                .head
                .iter()
                .map(|&j| {
                    if !phase1 {
                        self.cost[j]
                    } else if self.x[j] < self.lower[j] - FEAS_TOL {
                        -1.0
                    } else if self.x[j] > self.upper[j] + FEAS_TOL {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let pi = self.duals_for(cb);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n + self.m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.is_fixed(j) {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_column(j, &pi);
                let eligible = match st {
                    VarStatus::AtLower => d < -OPT_TOL,
                    VarStatus::AtUpper => d > OPT_TOL,
                    VarStatus::Free => d.abs() > OPT_TOL,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, bd)| d.abs() > bd.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(if phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                });
            };
            self.tick()?;
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            self.ftran_column(q);
            match self.primal_ratio(q, dir) {
                None => {
                    if phase1 {
                        return Err(LpError::Numerical(
                            "unbounded ray while minimizing infeasibility".into(),
                        ));
                    }
                    return Ok(LpStatus::Unbounded);
                }
                Some(PrimalStep::Flip { t }) => {
                    self.shift_basics(-dir * t);
                    self.status[q] = match self.status[q] {
                        VarStatus::AtLower => VarStatus::AtUpper,
                        _ => VarStatus::AtLower,
                    };
                    self.x[q] = self.nonbasic_value(q);
                    self.note_step(t);
                }
                Some(PrimalStep::Pivot { pos, t, target }) => {
                    self.shift_basics(-dir * t);
                    self.x[q] += dir * t;
                    self.pivot(pos, q, target)?;
                    self.note_step(t);
                }
            }
        }
    }

    /// `x_B += scale * col_buf`.
    fn shift_basics(&mut self, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for (p, &a) in self.col_buf.iter().enumerate() {
            if a != 0.0 {
                self.x[self.head[p]] += scale * a;
            }
        }
    }

    /// Harris two-pass ratio test for the primal simplex; textbook minimum
    /// ratio with smallest-index ties while in Bland mode.
    fn primal_ratio(&self, q: usize, dir: f64) -> Option<PrimalStep> {
        let alpha = &self.col_buf;
        let flip = self.upper[q] - self.lower[q];
        let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new(); // pos, exact, relaxed, target
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let delta = -dir * a;
            let j = self.head[p];
            let (x, l, u) = (self.x[j], self.lower[j], self.upper[j]);
            let (target, relaxed) = if delta < 0.0 {
                if x > u + FEAS_TOL {
                    (u, (x - u) / -delta)
                } else if l.is_finite() && x >= l - FEAS_TOL {
                    (l, (x - l + FEAS_TOL) / -delta)
                } else {
                    continue;
                }
            } else if x < l - FEAS_TOL {
                (l, (l - x) / delta)
            } else if u.is_finite() && x <= u + FEAS_TOL {
                (u, (u - x + FEAS_TOL) / delta)
            } else {
                continue;
            };
            let exact = ((target - x) / delta).max(0.0);
            cands.push((p, exact, relaxed, target));
        }

        if self.bland {
            let mut best: Option<(usize, f64, f64)> = None;
            for &(p, exact, _, target) in &cands {
                let better = match best {
                    None => true,
                    Some((bp, bt, _)) => {
                        exact < bt - 1e-12 || (exact <= bt + 1e-12 && self.head[p] < self.head[bp])
                    }
                };
                if better {
                    best = Some((p, exact, target));
                }
            }
            return match best {
                Some((_, t, _)) if flip <= t => Some(PrimalStep::Flip { t: flip }),
                Some((pos, t, target)) => Some(PrimalStep::Pivot { pos, t, target }),
                None if flip.is_finite() => Some(PrimalStep::Flip { t: flip }),
                None => None,
            };
        }

        let tmax = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        if flip.is_finite() && flip <= tmax {
            return Some(PrimalStep::Flip { t: flip });
        }
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for &(p, exact, _, target) in &cands {
            if exact <= tmax {
                let mag = alpha[p].abs();
                if best.is_none_or(|b| mag > b.3) {
                    best = Some((p, exact, target, mag));
                }
            }
        }
        best.map(|(pos, t, target, _)| PrimalStep::Pivot { pos, t, target })
    }

    /// Row `p` of `B^{-1} [A I]` into `alpha_r`, its support in `touched`.
    fn pivot_row(&mut self, p: usize) {
        for &j in &self.touched {
            self.alpha_r[j] = 0.0;
        }
        self.touched.clear();
        let mut rho = std::mem::take(&mut self.row_buf);
        rho.iter_mut().for_each(|v| *v = 0.0);
        rho[p] = 1.0;
        self.lu.btran(&mut rho, &mut self.work);
        for (i, &r) in rho.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for &(j, a) in &self.rows[i] {
                if self.alpha_r[j] == 0.0 {
                    self.touched.push(j);
                }
                self.alpha_r[j] += r * a;
                if self.alpha_r[j] == 0.0 {
                    // keep the entry marked as touched
                    self.alpha_r[j] = f64::MIN_POSITIVE;
                }
            }
            let j = self.n + i;
            self.alpha_r[j] = r;
            self.touched.push(j);
        }
        self.row_buf = rho;
    }

    fn dual_simplex(&mut self) -> Result<LpStatus, LpError> {
        self.degenerate_run = 0;
        self.bland = false;
        let mut retried = false;
        let mut cands: Vec<(usize, f64, f64)> = Vec::new(); // var, ratio, |a|
        let mut flips: Vec<usize> = Vec::new();
        self.dw.clear();
        self.dw.resize(self.m, 1.0);
        loop {
            let mut leave: Option<(usize, f64, f64)> = None; // pos, infeasibility, score
            for (p, &j) in self.head.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf <= FEAS_TOL {
                    continue;
                }
                let score = inf * inf / self.dw[p];
                let better = match leave {
                    None => true,
                    Some((bp, _, bscore)) => {
                        if self.bland {
                            j < self.head[bp]
                        } else {
                            score > bscore
                        }
                    }
                };
                if better {
                    leave = Some((p, inf, score));
                }
            }
            let Some((p, infeas, _)) = leave else {
                return Ok(LpStatus::Optimal);
            };
            self.tick()?;
            let jl = self.head[p];
            let to_upper = self.x[jl] > self.upper[jl];
            let s = if to_upper { 1.0 } else { -1.0 };
            let target = if to_upper { self.upper[jl] } else { self.lower[jl] };

            self.pivot_row(p);
            cands.clear();
            for &j in &self.touched {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = s * self.alpha_r[j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let d = self.d[j];
                let ratio = match st {
                    VarStatus::AtLower if a > 0.0 => (d / a).max(0.0),
                    VarStatus::AtUpper if a < 0.0 => (d / a).max(0.0),
                    VarStatus::Free => d.abs() / a.abs(),
                    _ => continue,
                };
                cands.push((j, ratio, a.abs()));
            }
            if cands.is_empty() {
                return Ok(LpStatus::Infeasible);
            }
            cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

            // Pass breakpoints of boxed variables while the row stays infeasible.
            flips.clear();
            let mut first = 0;
            if !self.bland {
                let mut slope = infeas;
                while first + 1 < cands.len() {
                    let (j, _, a) = cands[first];
                    let range = self.upper[j] - self.lower[j];
                    if !range.is_finite() || slope - a * range <= 0.0 {
                        break;
                    }
                    slope -= a * range;
                    first += 1;
                }
            }
            let rest = &cands[first..];
            let (q, step) = if self.bland {
                let tmin = rest[0].1;
                rest.iter()
                    .filter(|c| c.1 <= tmin + 1e-12)
                    .min_by_key(|c| c.0)
                    .map(|c| (c.0, c.1))
                    .unwrap()
            } else {
                let tmax = rest
                    .iter()
                    .map(|c| c.1 + OPT_TOL / c.2)
                    .fold(f64::INFINITY, f64::min);
                rest.iter()
                    .filter(|c| c.1 <= tmax)
                    .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
                    .map(|c| (c.0, c.1))
                    .unwrap()
            };
            flips.extend(cands[..first].iter().map(|c| c.0));

            self.ftran_column(q);
            let arow = self.alpha_r[q];
            let acol = self.col_buf[p];
            if (acol - arow).abs() > 1e-7 * (1.0 + arow.abs()) || acol.abs() <= PIVOT_TOL {
                if retried {
                    return Err(LpError::Numerical(format!(
                        "pivot mismatch in dual simplex: column {acol} vs row {arow}"
                    )));
                }
                retried = true;
                self.refactor()?;
                self.compute_primal();
                self.compute_reduced_costs();
                continue;
            }
            retried = false;

            // Devex reference weights.
            let wr = self.dw[p];
            for (i, &a) in self.col_buf.iter().enumerate() {
                if a != 0.0 && i != p {
                    let r = a / acol;
                    self.dw[i] = self.dw[i].max(r * r * wr);
                }
            }
            self.dw[p] = (wr / (acol * acol)).max(1.0);

            let theta = self.d[q] / arow;
            for &j in &self.touched {
                if self.status[j] != VarStatus::Basic {
                    self.d[j] -= theta * self.alpha_r[j];
                }
            }
            self.d[q] = 0.0;
            self.d[jl] = -theta;

            if !flips.is_empty() {
                let mut delta_b = std::mem::take(&mut self.row_buf);
                delta_b.iter_mut().for_each(|v| *v = 0.0);
                for &j in &flips {
                    let (from, to, st) = match self.status[j] {
                        VarStatus::AtLower => (self.lower[j], self.upper[j], VarStatus::AtUpper),
                        _ => (self.upper[j], self.lower[j], VarStatus::AtLower),
                    };
                    self.status[j] = st;
                    self.x[j] = to;
                    for (r, a) in self.column(j) {
                        delta_b[r] += a * (to - from);
                    }
                }
                self.lu.ftran(&mut delta_b, &mut self.work);
                for (pp, &v) in delta_b.iter().enumerate() {
                    if v != 0.0 {
                        self.x[self.head[pp]] -= v;
                    }
                }
                self.row_buf = delta_b;
            }
            let delta = (self.x[jl] - target) / acol;
            self.shift_basics(-delta);
            self.x[q] += delta;
            if self.pivot(p, q, target)? {
                self.compute_reduced_costs();
            }
            self.note_step(step);
        }
    }

    fn outcome(&mut self, status: LpStatus, start: usize) -> LpOutcome {
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let primal: Vec<f64> = self.x[..self.n].to_vec();
        let (dual, reduced_costs) = if status == LpStatus::Optimal {
            let pi = self.real_duals();
            let rc: Vec<f64> = (0..self.n)
                .map(|j| sign * (self.cost[j] - self.dot_column(j, &pi)))
                .collect();
            (pi.iter().map(|v| sign * v).collect(), rc)
        } else {
            (vec![0.0; self.m], vec![0.0; self.n])
        };
        let objective = match status {
            LpStatus::Optimal => self.orig_obj.iter().zip(&primal).map(|(c, x)| c * x).sum(),
            LpStatus::Infeasible => f64::NAN,
            LpStatus::Unbounded => sign * f64::NEG_INFINITY,
        };
        LpOutcome {
            status,
            primal,
            dual,
            reduced_costs,
            objective,
            basis: self.basis(),
            iterations: self.iterations - start,
        }
    }
}

fn column_of(cols: &[Vec<(usize, f64)>], n: usize, j: usize) -> ColumnIter<'_> {
    if j < n {
        ColumnIter::Structural(cols[j].iter())
    } else {
        ColumnIter::Logical(Some(j - n))
    }
}

enum ColumnIter<'a> {
    Structural(std::slice::Iter<'a, (usize, f64)>),
    Logical(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            ColumnIter::Structural(it) => it.next().copied(),
            ColumnIter::Logical(r) => r.take().map(|r| (r, 1.0)),
        }
    }
}

fn merge_duplicates(col: &mut Vec<(usize, f64)>) {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(col.len());
    for &(r, v) in col.iter() {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 += v,
            _ => out.push((r, v)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    *col = out;
}
