//! Bounded dual simplex.
//!
//! Every row `a.x in [lo, hi]` gets a logical `s = -a.x` with `s in [-hi, -lo]`,
//! so the constraint matrix is `[A | I]` with right-hand side zero. Structural
//! variables are always boxed (infinite bounds are replaced by a large
//! artificial box), which makes the all-logical basis dual feasible and lets the
//! dual simplex start from scratch or from any stored basis.
//!
//! Long degenerate runs are broken by perturbing costs, and reduced costs that
//! drift to the wrong sign are absorbed by shifting costs. Either way the true
//! costs come back before a solve returns, and a short primal simplex pass
//! makes the final basis optimal for them.

use std::rc::Rc;

use log::trace;

use crate::error::{LpError, Result};
use crate::factor::EtaFile;
use crate::problem::{Problem, Row};

/// Replacement for infinite structural bounds.
pub(crate) const ARTIFICIAL_BOUND: f64 = 1e9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-7;
const REL_PIVOT_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 50;
/// Cost perturbation rounds per solve before falling back to Bland's rule.
const MAX_PERTURB_ROUNDS: usize = 3;
const PERTURB_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values (meaningful when optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest bound or row violation of `x` against the original problem.
    pub max_residual: f64,
}

/// Solves the linear relaxation of `problem`, optionally overriding the
/// variable bounds.
pub fn solve_lp(problem: &Problem, bounds: Option<&[(f64, f64)]>) -> Result<LpSolution> {
    let mut lp = DualSimplex::new(problem)?;
    if let Some(b) = bounds {
        let (lo, hi): (Vec<f64>, Vec<f64>) = b.iter().copied().unzip();
        lp.set_bounds(&lo, &hi);
    }
    let status = lp.solve()?;
    let x = lp.structural_values();
    let objective = match status {
        LpStatus::Optimal => problem.objective_value(&x),
        LpStatus::Infeasible => f64::INFINITY,
        LpStatus::Unbounded => f64::NEG_INFINITY,
    };
    let max_residual = problem.max_violation(&x);
    Ok(LpSolution { status, x, objective, iterations: lp.iterations, max_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
}

/// A stored basis, shared between sibling branch-and-bound nodes.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    head: Vec<usize>,
    state: Vec<VarState>,
}

pub(crate) struct DualSimplex {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Whether a structural bound is the artificial box.
    art_lo: Vec<bool>,
    art_hi: Vec<bool>,
    /// Structural `j` is stored as `x_j / col_scale[j]`.
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    head: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    d: Vec<f64>,
    eta: EtaFile,
    /// The eta file describes `head`.
    factor_ok: bool,
    /// Basis updates since the last reinversion.
    updates: usize,
    /// Primal and dual values match the current bounds.
    values_ok: bool,
    pub iterations: usize,
    /// Original costs while a perturbation or shift is active.
    true_cost: Option<Vec<f64>>,
    // scratch
    alpha: Vec<f64>,
    touched: Vec<usize>,
}

impl DualSimplex {
    pub fn new(problem: &Problem) -> Result<Self> {
        problem.check()?;
        let n = problem.num_vars();
        let (row_scale, col_scale) = scale_factors(n, &problem.rows);
        let mut cost = vec![0.0; n];
        for &(j, c) in &problem.objective {
            cost[j] += c * col_scale[j];
        }
        let mut lp = DualSimplex {
            n,
            m: 0,
            col_start: vec![0; n + 1],
            col_idx: Vec::new(),
            col_val: Vec::new(),
            row_start: vec![0],
            row_idx: Vec::new(),
            row_val: Vec::new(),
            cost,
            lo: vec![0.0; n],
            hi: vec![0.0; n],
            art_lo: vec![false; n],
            art_hi: vec![false; n],
            col_scale,
            row_scale,
            head: Vec::new(),
            state: vec![VarState::Lower; n],
            x: vec![0.0; n],
            d: vec![0.0; n],
            eta: EtaFile::default(),
            factor_ok: false,
            updates: 0,
            values_ok: false,
            iterations: 0,
            true_cost: None,
            alpha: vec![0.0; n],
            touched: Vec::new(),
        };
        let (lo, hi): (Vec<f64>, Vec<f64>) = problem.variables.iter().map(|v| (v.lower, v.upper)).unzip();
        lp.set_bounds(&lo, &hi);
        lp.append_rows(&problem.rows);
        lp.slack_basis();
        Ok(lp)
    }

    fn append_rows(&mut self, rows: &[Row]) {
        let n = self.n;
        for row in rows {
            let i = self.m;
            let mut terms: Vec<(usize, f64)> = Vec::with_capacity(row.terms.len());
            for &(j, a) in &row.terms {
                if a == 0.0 {
                    continue;
                }
                match terms.iter_mut().find(|(k, _)| *k == j) {
                    Some(t) => t.1 += a,
                    None => terms.push((j, a)),
                }
            }
            terms.sort_by_key(|&(j, _)| j);
            let rs = self.row_scale[i];
            for t in terms.iter_mut() {
                t.1 *= rs * self.col_scale[t.0];
            }
            for &(j, a) in &terms {
                self.row_idx.push(j);
                self.row_val.push(a);
            }
            self.row_start.push(self.row_idx.len());
            let (rlo, rhi) = row.range();
            let (rlo, rhi) = (rlo * rs, rhi * rs);
            // logical s = -a.x
            self.lo.push(-rhi);
            self.hi.push(-rlo);
            self.cost.push(0.0);
            self.state.push(VarState::Basic);
            self.head.push(n + i);
            let act: f64 = terms.iter().map(|&(j, a)| a * self.x[j]).sum();
            self.x.push(-act);
            self.d.push(0.0);
            self.alpha.push(0.0);
            self.m += 1;
        }
        self.rebuild_columns();
    }

    fn rebuild_columns(&mut self) {
        let n = self.n;
        let mut counts = vec![0usize; n];
        for &j in &self.row_idx {
            counts[j] += 1;
        }
        let mut start = vec![0usize; n + 1];
        for j in 0..n {
            start[j + 1] = start[j] + counts[j];
        }
        let mut fill = start.clone();
        let nnz = self.row_idx.len();
        let mut idx = vec![0usize; nnz];
        let mut val = vec![0.0; nnz];
        for i in 0..self.m {
            for k in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_idx[k];
                idx[fill[j]] = i;
                val[fill[j]] = self.row_val[k];
                fill[j] += 1;
            }
        }
        self.col_start = start;
        self.col_idx = idx;
        self.col_val = val;
    }

    /// All-logical basis with structurals at the bound favoured by their cost.
    pub fn slack_basis(&mut self) {
        for j in 0..self.n {
            self.state[j] = if self.cost[j] < 0.0 { VarState::Upper } else { VarState::Lower };
        }
        for i in 0..self.m {
            self.head[i] = self.n + i;
            self.state[self.n + i] = VarState::Basic;
        }
        self.factor_ok = false;
        self.values_ok = false;
    }

    /// Overrides structural bounds (infinite values become the artificial box).
    pub fn set_bounds(&mut self, lo: &[f64], hi: &[f64]) {
        for j in 0..self.n {
            self.art_lo[j] = !lo[j].is_finite();
            self.art_hi[j] = !hi[j].is_finite();
            let cs = self.col_scale[j];
            self.lo[j] = if lo[j].is_finite() { lo[j] / cs } else { -ARTIFICIAL_BOUND };
            self.hi[j] = if hi[j].is_finite() { hi[j] / cs } else { ARTIFICIAL_BOUND };
        }
        self.values_ok = false;
    }

    pub fn basis(&self) -> Rc<Basis> {
        Rc::new(Basis { head: self.head.clone(), state: self.state.clone() })
    }

    /// Whether the current basis is `basis`.
    pub fn holds(&self, basis: &Basis) -> bool {
        self.head[..basis.head.len()] == basis.head[..] && self.state[..basis.state.len()] == basis.state[..]
    }

    pub fn load_basis(&mut self, basis: &Basis) {
        // Rows appended after the snapshot keep their logicals basic.
        let m0 = basis.head.len();
        self.head[..m0].copy_from_slice(&basis.head);
        self.state[..basis.state.len()].copy_from_slice(&basis.state);
        for i in m0..self.m {
            self.head[i] = self.n + i;
            self.state[self.n + i] = VarState::Basic;
        }
        self.factor_ok = false;
        self.values_ok = false;
    }

    pub fn structural_values(&self) -> Vec<f64> {
        self.x[..self.n].iter().zip(&self.col_scale).map(|(x, s)| x * s).collect()
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                out[self.col_idx[k]] = self.col_val[k];
            }
        } else {
            out[j - self.n] = 1.0;
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1]).map(|k| self.col_val[k] * y[self.col_idx[k]]).sum()
        } else {
            y[j - self.n]
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lo[j],
            VarState::Upper => self.hi[j],
            VarState::Basic => 0.0,
        }
    }

    /// Rebuilds the eta file from scratch for the current `head`, dropping
    /// structurals that would make the basis singular.
    fn reinvert(&mut self) {
        let (n, m) = (self.n, self.m);
        self.eta.clear();
        let mut new_head = vec![usize::MAX; m];
        let mut structurals = Vec::new();
        for &j in &self.head {
            if j >= n {
                new_head[j - n] = j;
            } else {
                structurals.push(j);
            }
        }
        structurals.sort_by_key(|&j| (self.col_start[j + 1] - self.col_start[j], j));
        let mut open: Vec<bool> = new_head.iter().map(|&h| h == usize::MAX).collect();
        let mut col = vec![0.0; m];
        for j in structurals {
            self.column(j, &mut col);
            self.eta.ftran(&mut col);
            let mut best = None;
            let mut best_abs = 0.0;
            for p in 0..m {
                if open[p] && col[p].abs() > best_abs {
                    best_abs = col[p].abs();
                    best = Some(p);
                }
            }
            match best {
                Some(p) if best_abs > 1e-8 => {
                    self.eta.push(p, &col);
                    new_head[p] = j;
                    open[p] = false;
                }
                _ => {
                    trace!("reinvert: dropping dependent column {j}");
                    self.state[j] = if (self.x[j] - self.lo[j]).abs() <= (self.hi[j] - self.x[j]).abs() {
                        VarState::Lower
                    } else {
                        VarState::Upper
                    };
                }
            }
        }
        for p in 0..m {
            if new_head[p] == usize::MAX {
                new_head[p] = n + p;
                self.state[n + p] = VarState::Basic;
            }
        }
        self.head = new_head;
        self.factor_ok = true;
        self.updates = 0;
    }

    fn compute_primal(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_idx[k]] -= self.col_val[k] * v;
                }
            } else {
                rhs[j - self.n] -= v;
            }
        }
        self.eta.ftran(&mut rhs);
        for p in 0..m {
            self.x[self.head[p]] = rhs[p];
        }
    }

    fn compute_dual(&mut self) {
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.eta.btran(&mut y);
        for j in 0..self.n + self.m {
            self.d[j] = if self.state[j] == VarState::Basic { 0.0 } else { self.cost[j] - self.col_dot(j, &y) };
        }
    }

    /// Restores dual feasibility: boxed nonbasics with a wrong-signed reduced
    /// cost move to their other bound, the rest get their cost shifted until
    /// the reduced cost is zero (undone by the primal cleanup).
    fn repair_dual(&mut self) {
        let mut flipped = false;
        for j in 0..self.n + self.m {
            if self.lo[j] == self.hi[j] {
                continue;
            }
            let (wrong, other) = match self.state[j] {
                VarState::Lower => (self.d[j] < -DUAL_TOL, self.hi[j]),
                VarState::Upper => (self.d[j] > DUAL_TOL, self.lo[j]),
                VarState::Basic => (false, 0.0),
            };
            if !wrong {
                continue;
            }
            if other.is_finite() {
                self.state[j] = if self.state[j] == VarState::Lower { VarState::Upper } else { VarState::Lower };
                flipped = true;
            } else {
                self.true_cost.get_or_insert_with(|| self.cost.clone());
                self.cost[j] -= self.d[j];
                self.d[j] = 0.0;
            }
        }
        if flipped {
            self.compute_primal();
        }
    }

    /// Recomputes primal and dual values, reinverting first when the factor is
    /// stale or `force` is set.
    fn refresh(&mut self, force: bool) {
        if !self.factor_ok || (force && self.updates > 0) {
            self.reinvert();
        }
        self.compute_dual();
        self.repair_dual();
        self.compute_primal();
        self.values_ok = true;
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let lo = self.lo[j];
        let hi = self.hi[j];
        if v < lo - PRIMAL_TOL * (1.0 + lo.abs()) {
            lo - v
        } else if v > hi + PRIMAL_TOL * (1.0 + hi.abs()) {
            v - hi
        } else {
            0.0
        }
    }

    fn select_leaving(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for p in 0..self.m {
            let j = self.head[p];
            let inf = self.primal_infeasibility(j);
            if inf <= 0.0 {
                continue;
            }
            best = match best {
                None => Some((p, inf)),
                Some((bp, binf)) => {
                    let better = if bland { j < self.head[bp] } else { inf > binf };
                    if better {
                        Some((p, inf))
                    } else {
                        Some((bp, binf))
                    }
                }
            };
        }
        best.map(|(p, _)| p)
    }

    /// Runs the dual simplex from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus> {
        let status = self.run_dual();
        if let Some(cost) = self.true_cost.take() {
            self.cost = cost;
            self.values_ok = false;
        }
        status
    }

    fn run_dual(&mut self) -> Result<LpStatus> {
        if !self.values_ok || !self.factor_ok {
            self.refresh(false);
        }
        let cap = 50 * (self.n + self.m) + 10_000;
        let start_iter = self.iterations;
        let mut degenerate_run = 0usize;
        let mut perturb_rounds = 0usize;
        let mut rho = vec![0.0; self.m];
        let mut col = vec![0.0; self.m];
        loop {
            if self.iterations - start_iter > cap {
                return Err(LpError::Stalled {
                    iterations: self.iterations - start_iter,
                    detail: format!("{} rows, {} columns", self.m, self.n),
                });
            }
            if degenerate_run >= DEGENERATE_SWITCH && perturb_rounds < MAX_PERTURB_ROUNDS {
                trace!("perturbing costs after {degenerate_run} degenerate pivots");
                perturb_rounds += 1;
                self.perturb_costs(perturb_rounds);
                degenerate_run = 0;
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let Some(r) = self.select_leaving(bland) else {
                if self.updates > 0 {
                    // confirm optimality on a clean factorization
                    self.refresh(true);
                    if self.select_leaving(false).is_some() {
                        continue;
                    }
                }
                if let Some(cost) = self.true_cost.take() {
                    self.cost = cost;
                    self.compute_dual();
                    let budget = cap.saturating_sub(self.iterations - start_iter);
                    if !self.primal_cleanup(budget)? {
                        return Ok(LpStatus::Unbounded);
                    }
                    if self.select_leaving(false).is_some() {
                        degenerate_run = 0;
                        continue;
                    }
                }
                return Ok(self.finish_optimal());
            };
            let leaving = self.head[r];
            let to_lower = self.x[leaving] < self.lo[leaving];
            let target = if to_lower { self.lo[leaving] } else { self.hi[leaving] };

            rho.iter_mut().for_each(|v| *v = 0.0);
            rho[r] = 1.0;
            self.eta.btran(&mut rho);
            self.price_row(&rho);

            let Some(q) = self.ratio_test(to_lower, bland) else {
                self.clear_alpha();
                if self.updates > 0 {
                    self.refresh(true);
                    continue;
                }
                return Ok(LpStatus::Infeasible);
            };
            let alpha_rq = self.alpha[q];

            self.column(q, &mut col);
            self.eta.ftran(&mut col);
            if (col[r] - alpha_rq).abs() > 1e-6 * (1.0 + col[r].abs()) && self.updates > 0 {
                trace!("pivot mismatch {} vs {}, refactoring", col[r], alpha_rq);
                self.clear_alpha();
                self.refresh(true);
                continue;
            }

            let infeasibility = (self.x[leaving] - target).abs();
            // primal step
            let delta = (self.x[leaving] - target) / col[r];
            for p in 0..self.m {
                if col[p] != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= col[p] * delta;
                }
            }
            self.x[q] += delta;
            self.x[leaving] = target;

            // dual step; a slightly wrong-signed d_q (Harris) is shifted to zero
            // so the dual objective never goes backwards
            let wrong_sign = match self.state[q] {
                VarState::Lower => self.d[q] < 0.0,
                VarState::Upper => self.d[q] > 0.0,
                VarState::Basic => false,
            };
            if wrong_sign {
                self.true_cost.get_or_insert_with(|| self.cost.clone());
                self.cost[q] -= self.d[q];
                self.d[q] = 0.0;
            }
            let theta = self.d[q] / alpha_rq;
            for &j in &self.touched {
                if self.state[j] != VarState::Basic {
                    self.d[j] -= theta * self.alpha[j];
                }
            }
            self.d[q] = 0.0;
            self.d[leaving] = -theta;
            // dual objective gain of this step, relative to the objective
            let gain = (theta * infeasibility).abs();
            let scale = 1.0 + self.cost.iter().zip(&self.x).map(|(c, x)| (c * x).abs()).sum::<f64>();
            if gain <= 1e-9 * scale {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.clear_alpha();

            self.state[q] = VarState::Basic;
            self.state[leaving] = if to_lower { VarState::Lower } else { VarState::Upper };
            if self.lo[leaving] == self.hi[leaving] {
                self.state[leaving] = VarState::Lower;
            }
            self.head[r] = q;
            self.eta.push(r, &col);
            self.updates += 1;
            self.iterations += 1;

            if self.updates >= REFACTOR_EVERY {
                self.refresh(true);
            }
        }
    }

    /// Pushes the reduced costs of nonbasic columns away from zero, which
    /// breaks the ties behind long runs of degenerate dual pivots. The true
    /// costs are kept in `true_cost`.
    fn perturb_costs(&mut self, round: usize) {
        if self.true_cost.is_none() {
            self.true_cost = Some(self.cost.clone());
        }
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let u = unit_hash((j as u64) << 8 | round as u64);
            let shift = PERTURB_SCALE * (1.0 + self.cost[j].abs()) * (1.0 + u);
            let shift = if self.state[j] == VarState::Lower { shift } else { -shift };
            self.cost[j] += shift;
            self.d[j] += shift;
        }
    }

    /// Primal simplex from a primal feasible basis until no reduced cost has
    /// the wrong sign. Runs after a cost perturbation is removed, when only a
    /// few such columns are left. Returns false if the objective is unbounded.
    fn primal_cleanup(&mut self, budget: usize) -> Result<bool> {
        let m = self.m;
        let mut col = vec![0.0; m];
        let mut degenerate_run = 0usize;
        let mut steps = 0usize;
        loop {
            if steps > budget {
                return Err(LpError::Stalled {
                    iterations: steps,
                    detail: format!("primal cleanup, {} rows, {} columns", self.m, self.n),
                });
            }
            steps += 1;
            if self.updates >= REFACTOR_EVERY {
                self.reinvert();
                self.compute_primal();
                self.compute_dual();
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n + m {
                if self.state[j] == VarState::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let gain = if self.state[j] == VarState::Lower { -self.d[j] } else { self.d[j] };
                if gain <= DUAL_TOL {
                    continue;
                }
                if entering.is_none_or(|(_, g)| !bland && gain > g) {
                    entering = Some((j, gain));
                }
            }
            let Some((q, gain)) = entering else { return Ok(true) };
            let dir = if self.state[q] == VarState::Lower { 1.0 } else { -1.0 };
            self.column(q, &mut col);
            self.eta.ftran(&mut col);

            // basic j moves at rate -col[p] * dir; Harris two-pass ratio test
            let room = |p: usize, slack: f64| -> Option<(f64, f64)> {
                let a = col[p];
                if a.abs() < PIVOT_TOL {
                    return None;
                }
                let j = self.head[p];
                let rate = -a * dir;
                let (gap, bound) = if rate < 0.0 {
                    (self.x[j] - self.lo[j], self.lo[j])
                } else {
                    (self.hi[j] - self.x[j], self.hi[j])
                };
                if !bound.is_finite() {
                    return None;
                }
                let tol = if slack > 0.0 { PRIMAL_TOL * (1.0 + bound.abs()) } else { 0.0 };
                Some(((gap.max(0.0) + tol) / rate.abs(), a.abs()))
            };
            let t_max = (0..m).filter_map(|p| room(p, 1.0)).map(|(t, _)| t).fold(f64::INFINITY, f64::min);
            let mut leave: Option<(usize, f64, f64)> = None;
            for p in 0..m {
                let Some((t, a)) = room(p, 0.0) else { continue };
                if t > t_max {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((bp, bt, _)) if bland => t < bt || (t == bt && self.head[p] < self.head[bp]),
                    Some((_, _, ba)) => a > ba,
                };
                if better {
                    leave = Some((p, t, a));
                }
            }
            let range = self.hi[q] - self.lo[q];
            let step = leave.map_or(f64::INFINITY, |(_, t, _)| t);
            if range <= step {
                if !range.is_finite() {
                    return Ok(false);
                }
                // bound flip, the basis stays
                for p in 0..m {
                    self.x[self.head[p]] -= col[p] * dir * range;
                }
                self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                self.x[q] = self.nonbasic_value(q);
                degenerate_run = 0;
                continue;
            }
            let (r, t, _) = leave.expect("finite step");
            let leaving = self.head[r];
            let to_lower = -col[r] * dir < 0.0;
            for p in 0..m {
                self.x[self.head[p]] -= col[p] * dir * t;
            }
            self.x[q] += dir * t;
            self.state[leaving] = if to_lower || self.lo[leaving] == self.hi[leaving] {
                VarState::Lower
            } else {
                VarState::Upper
            };
            self.x[leaving] = self.nonbasic_value(leaving);
            self.state[q] = VarState::Basic;
            self.head[r] = q;
            self.eta.push(r, &col);
            self.updates += 1;
            self.iterations += 1;
            self.compute_dual();
            if t * gain <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }

    fn price_row(&mut self, rho: &[f64]) {
        let n = self.n;
        for i in 0..self.m {
            let ri = rho[i];
            if ri == 0.0 {
                continue;
            }
            for k in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_idx[k];
                if self.alpha[j] == 0.0 {
                    self.touched.push(j);
                }
                self.alpha[j] += ri * self.row_val[k];
                if self.alpha[j] == 0.0 {
                    // keep it marked as touched
                    self.alpha[j] = f64::MIN_POSITIVE;
                }
            }
            let j = n + i;
            if self.alpha[j] == 0.0 {
                self.touched.push(j);
            }
            self.alpha[j] = ri;
        }
    }

    fn clear_alpha(&mut self) {
        for &j in &self.touched {
            self.alpha[j] = 0.0;
        }
        self.touched.clear();
    }

    /// Dual ratio test with a Harris two-pass tolerance (or strict smallest
    /// index under Bland's rule).
    fn ratio_test(&self, to_lower: bool, bland: bool) -> Option<usize> {
        // Leaving below its lower bound must increase: entering at lower needs
        // alpha < 0, at upper alpha > 0. Mirrored otherwise.
        let eligible = |j: usize| -> Option<f64> {
            if self.state[j] == VarState::Basic || self.lo[j] == self.hi[j] {
                return None;
            }
            let a = self.alpha[j];
            if a.abs() < PIVOT_TOL {
                return None;
            }
            let a = if to_lower { a } else { -a };
            let ok = match self.state[j] {
                VarState::Lower => a < 0.0,
                VarState::Upper => a > 0.0,
                VarState::Basic => false,
            };
            ok.then_some(a.abs())
        };
        let dabs = |j: usize| -> f64 {
            match self.state[j] {
                VarState::Lower => self.d[j].max(0.0),
                VarState::Upper => (-self.d[j]).max(0.0),
                _ => self.d[j].abs(),
            }
        };
        // pivots far below the largest candidate make the basis ill-conditioned
        let amax = self.touched.iter().filter_map(|&j| eligible(j)).fold(0.0, f64::max);
        let floor = REL_PIVOT_TOL * amax;
        let eligible = |j: usize| eligible(j).filter(|&a| a >= floor);
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for &j in &self.touched {
                let Some(a) = eligible(j) else { continue };
                let ratio = dabs(j) / a;
                let better = match best {
                    None => true,
                    Some((bj, br)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && j < bj),
                };
                if better {
                    best = Some((j, ratio));
                }
            }
            return best.map(|(j, _)| j);
        }
        let mut theta_max = f64::INFINITY;
        for &j in &self.touched {
            if let Some(a) = eligible(j) {
                theta_max = theta_max.min((dabs(j) + DUAL_TOL) / a);
            }
        }
        if !theta_max.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.touched {
            let Some(a) = eligible(j) else { continue };
            if dabs(j) / a <= theta_max {
                best = match best {
                    Some((bj, ba)) if ba > a || (ba == a && bj < j) => Some((bj, ba)),
                    _ => Some((j, a)),
                };
            }
        }
        best.map(|(j, _)| j)
    }

    fn finish_optimal(&mut self) -> LpStatus {
        let unbounded = (0..self.n).any(|j| {
            (self.art_lo[j] && self.x[j] <= -ARTIFICIAL_BOUND * (1.0 - 1e-9))
                || (self.art_hi[j] && self.x[j] >= ARTIFICIAL_BOUND * (1.0 - 1e-9))
        });
        if unbounded {
            LpStatus::Unbounded
        } else {
            LpStatus::Optimal
        }
    }
}

/// Deterministic value in `[0, 1)` (splitmix64 finaliser).
fn unit_hash(seed: u64) -> f64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Row and column factors, powers of two, from a few rounds of geometric
/// scaling: every entry of the scaled matrix moves towards magnitude 1.
fn scale_factors(n: usize, rows: &[Row]) -> (Vec<f64>, Vec<f64>) {
    let pow2 = |v: f64| if v.is_finite() && v > 0.0 { v.log2().round().exp2() } else { 1.0 };
    let mut rs = vec![1.0; rows.len()];
    let mut cs = vec![1.0; n];
    for _ in 0..4 {
        for (i, row) in rows.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(j, a) in row.terms.iter().filter(|t| t.1 != 0.0) {
                let v = (a * cs[j]).abs();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            rs[i] = pow2(1.0 / (lo * hi).sqrt());
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row.terms.iter().filter(|t| t.1 != 0.0) {
                let v = (a * rs[i]).abs();
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        for j in 0..n {
            cs[j] = pow2(1.0 / (lo[j] * hi[j]).sqrt());
        }
    }
    (rs, cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Sense, VarKind};

    #[test]
    fn covering_row_is_tight() {
        let mut p = Problem::new();
        let x = p.add_var("x", VarKind::Continuous, 0.0, 1.0);
        let y = p.add_var("y", VarKind::Continuous, 0.0, 1.0);
        p.objective = vec![(x, 1.0), (y, 1.0)];
        p.add_row(Row::new("cover", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.0));
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(sol.max_residual <= 1e-7);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = Problem::new();
        let x = p.add_var("x", VarKind::Continuous, 0.0, 10.0);
        p.objective = vec![(x, 1.0)];
        p.add_row(Row::new("lo", vec![(x, 1.0)], Sense::Ge, 2.0));
        p.add_row(Row::new("hi", vec![(x, 1.0)], Sense::Le, 1.0));
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn free_direction_reports_unbounded() {
        let mut p = Problem::new();
        let x = p.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY);
        p.objective = vec![(x, -1.0)];
        p.add_row(Row::new("r", vec![(x, 1.0)], Sense::Ge, 1.0));
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_system_with_negative_costs() {
        // max 3x + 2y s.t. x + y = 4, x + 3y <= 6, x <= 3
        let mut p = Problem::new();
        let x = p.add_var("x", VarKind::Continuous, 0.0, 3.0);
        let y = p.add_var("y", VarKind::Continuous, 0.0, 100.0);
        p.objective = vec![(x, -3.0), (y, -2.0)];
        p.add_row(Row::new("sum", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0));
        p.add_row(Row::new("mix", vec![(x, 1.0), (y, 3.0)], Sense::Le, 6.0));
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 11.0).abs() < 1e-9, "{}", sol.objective);
        assert!((sol.x[0] - 3.0).abs() < 1e-9 && (sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn big_m_rows_are_scaled() {
        // a time-propagation chain with big-M switches: t1 >= 3600 y,
        // t2 >= t1 + 7200 - 1e5 (1 - y), minimize t2 with y = 1 forced
        let mut p = Problem::new();
        let y = p.add_var("y", VarKind::Continuous, 0.0, 1.0);
        let t1 = p.add_var("t1", VarKind::Continuous, 0.0, 1e5);
        let t2 = p.add_var("t2", VarKind::Continuous, 0.0, 1e5);
        p.objective = vec![(t2, 1.0)];
        p.add_row(Row::new("on", vec![(y, 1.0)], Sense::Ge, 1.0));
        p.add_row(Row::new("first", vec![(t1, 1.0), (y, -3600.0)], Sense::Ge, 0.0));
        p.add_row(Row::new("second", vec![(t2, 1.0), (t1, -1.0), (y, -1e5)], Sense::Ge, 7200.0 - 1e5));
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 10800.0).abs() < 1e-6, "{}", sol.objective);
        assert!(sol.max_residual <= 1e-7);
    }

    #[test]
    fn scale_factors_are_powers_of_two() {
        let rows = vec![Row::new("r", vec![(0, 1e5), (1, 3.0)], Sense::Le, 1.0)];
        let (rs, cs) = scale_factors(2, &rows);
        for f in rs.iter().chain(&cs) {
            assert_eq!(f.log2().fract(), 0.0);
        }
        let scaled = [1e5 * rs[0] * cs[0], 3.0 * rs[0] * cs[1]];
        assert!(scaled.iter().all(|v| (0.25..=4.0).contains(v)), "{scaled:?}");
    }

    fn best_permutation(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(cost[row][j] + best_permutation(cost, row + 1, used));
                used[j] = false;
            }
        }
        best
    }

    #[test]
    fn perturbed_solve_returns_true_costs() {
        // costs in {0, 1, 2} with a zero permutation on the wrapped
        // anti-diagonal: the optimum is 0, reached only after long runs of
        // degenerate pivots
        for n in [20usize, 30] {
            let mut p = Problem::new();
            let mut var = vec![vec![0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    var[i][j] = p.add_var(format!("x_{i}_{j}"), VarKind::Continuous, 0.0, 1.0);
                    p.objective.push((var[i][j], (((i + j) % n) % 3) as f64));
                }
            }
            for i in 0..n {
                p.add_row(Row::new(format!("r{i}"), (0..n).map(|j| (var[i][j], 1.0)).collect(), Sense::Eq, 1.0));
                p.add_row(Row::new(format!("c{i}"), (0..n).map(|j| (var[j][i], 1.0)).collect(), Sense::Eq, 1.0));
            }
            let mut lp = DualSimplex::new(&p).unwrap();
            assert_eq!(lp.solve().unwrap(), LpStatus::Optimal);
            assert!(lp.iterations > DEGENERATE_SWITCH);
            assert!(lp.true_cost.is_none());
            let original: Vec<f64> = (0..n * n).map(|j| p.objective[j].1 * lp.col_scale[j]).collect();
            assert_eq!(&lp.cost[..n * n], &original[..]);
            assert!(lp.objective().abs() < 1e-9, "{}", lp.objective());
            assert!(p.max_violation(&lp.structural_values()) <= 1e-7);
        }
    }

    #[test]
    fn degenerate_assignment_matches_enumeration() {
        // many tied costs make almost every dual pivot degenerate
        let n = 8;
        let cost: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| ((i * 7 + j * 3) % 5) as f64).collect()).collect();
        let mut p = Problem::new();
        let mut var = vec![vec![0; n]; n];
        for i in 0..n {
            for j in 0..n {
                var[i][j] = p.add_var(format!("x_{i}_{j}"), VarKind::Continuous, 0.0, 1.0);
                p.objective.push((var[i][j], cost[i][j]));
            }
        }
        for i in 0..n {
            p.add_row(Row::new(format!("r{i}"), (0..n).map(|j| (var[i][j], 1.0)).collect(), Sense::Eq, 1.0));
            p.add_row(Row::new(format!("c{i}"), (0..n).map(|j| (var[j][i], 1.0)).collect(), Sense::Eq, 1.0));
        }
        let expected = best_permutation(&cost, 0, &mut vec![false; n]);
        let mut lp = DualSimplex::new(&p).unwrap();
        assert_eq!(lp.solve().unwrap(), LpStatus::Optimal);
        assert!(lp.true_cost.is_none());
        let x = lp.structural_values();
        assert!((p.objective_value(&x) - expected).abs() < 1e-9, "{} vs {expected}", p.objective_value(&x));
        assert!((lp.objective() - expected).abs() < 1e-9);
        assert!(p.max_violation(&x) <= 1e-7);
    }
}
