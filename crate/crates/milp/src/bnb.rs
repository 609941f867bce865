//! Best-bound branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use log::debug;

use crate::error::Result;
use crate::problem::{Problem, VarKind};
use crate::simplex::{Basis, DualSimplex, LpStatus};
use crate::INT_TOL;

/// Relative tolerance used when comparing objective values.
const OBJ_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub time_limit: Option<Duration>,
    /// Relative gap `(incumbent - bound) / max(1, |incumbent|)` at which the
    /// search stops.
    pub gap: f64,
    pub node_limit: Option<usize>,
    pub branching: BranchRule,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { time_limit: None, gap: 0.0, node_limit: None, branching: BranchRule::Reliability }
    }
}

/// How the branching variable is chosen. Both rules prefer binaries and
/// break ties by variable name, so results are reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BranchRule {
    MostFractional,
    /// Pseudocosts, initialized by strong branching.
    #[default]
    Reliability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub max_residual: f64,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        self.x.is_some()
    }
}

struct BoundChange {
    var: usize,
    lower: f64,
    upper: f64,
    parent: Option<Rc<BoundChange>>,
}

struct Node {
    id: u64,
    bound: f64,
    depth: u32,
    changes: Option<Rc<BoundChange>>,
    basis: Rc<Basis>,
    /// Parent LP value and the branching that created this node: variable,
    /// distance to the new bound, and whether it was the up branch.
    parent_value: f64,
    branched: Option<(usize, f64, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

fn cutoff(incumbent: f64, gap: f64) -> f64 {
    incumbent - gap.max(OBJ_TOL) * incumbent.abs().max(1.0)
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

/// Branching candidates ordered by name so ties break lexicographically.
fn name_order(problem: &Problem) -> Vec<usize> {
    let mut order: Vec<usize> = (0..problem.num_vars()).filter(|&j| problem.variables[j].kind.is_integral()).collect();
    order.sort_by(|&a, &b| problem.variables[a].name.cmp(&problem.variables[b].name).then(a.cmp(&b)));
    order
}

/// Observations per direction before a pseudocost is trusted.
const RELIABLE: u32 = 4;
/// Candidates strong-branched per node.
const STRONG_CANDIDATES: usize = 8;
const SCORE_EPS: f64 = 1e-6;
/// Score of a branch whose other side is infeasible.
const INFEASIBLE_GAIN: f64 = 1e12;

/// Average objective gain per unit of bound change, per direction.
#[derive(Clone, Copy, Default)]
struct Pseudocost {
    down: f64,
    n_down: u32,
    up: f64,
    n_up: u32,
}

impl Pseudocost {
    fn record(&mut self, up: bool, gain_per_unit: f64) {
        if up {
            self.up += gain_per_unit;
            self.n_up += 1;
        } else {
            self.down += gain_per_unit;
            self.n_down += 1;
        }
    }

    fn reliable(&self) -> bool {
        self.n_down.min(self.n_up) >= RELIABLE
    }
}

fn product_score(down: f64, up: f64) -> f64 {
    down.max(SCORE_EPS) * up.max(SCORE_EPS)
}

/// Fractional candidates in name order: binaries when any is fractional,
/// general integers otherwise.
fn candidates(problem: &Problem, order: &[usize], x: &[f64]) -> Vec<usize> {
    let frac = |j: usize| {
        let f = x[j] - x[j].floor();
        f.min(1.0 - f) > INT_TOL
    };
    let bin: Vec<usize> = order.iter().copied().filter(|&j| problem.variables[j].kind == VarKind::Binary && frac(j)).collect();
    if !bin.is_empty() {
        return bin;
    }
    order.iter().copied().filter(|&j| frac(j)).collect()
}

enum Branching {
    Integral,
    /// Both children are infeasible.
    Prune,
    /// Branch on `var`; child LP bounds when strong branching computed them,
    /// `INFINITY` for an infeasible child.
    On { var: usize, down: Option<f64>, up: Option<f64> },
}

fn select_most_fractional(problem: &Problem, order: &[usize], x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in candidates(problem, order, x) {
        let f = x[j] - x[j].floor();
        let dist = f.min(1.0 - f);
        if best.is_none_or(|(_, bd)| dist > bd + 1e-9) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Reliability branching: pseudocost product scores, with strong branching
/// on candidates whose pseudocosts have too few observations. Ties go to the
/// first candidate in name order.
#[allow(clippy::too_many_arguments)]
fn select_branch(
    problem: &Problem,
    lp: &mut DualSimplex,
    order: &[usize],
    x: &[f64],
    value: f64,
    lo: &[f64],
    hi: &[f64],
    basis: &Rc<Basis>,
    pseudo: &mut [Pseudocost],
    allow_strong: bool,
    rule: BranchRule,
) -> Result<Branching> {
    let cands = candidates(problem, order, x);
    if cands.is_empty() {
        return Ok(Branching::Integral);
    }
    if rule == BranchRule::MostFractional {
        let var = select_most_fractional(problem, order, x).expect("candidates exist");
        return Ok(Branching::On { var, down: None, up: None });
    }
    let mean = |up: bool| {
        let (s, n) = pseudo.iter().fold((0.0, 0u32), |(s, n), p| if up { (s + p.up, n + p.n_up) } else { (s + p.down, n + p.n_down) });
        if n == 0 {
            1.0
        } else {
            s / n as f64
        }
    };
    let (mean_down, mean_up) = (mean(false), mean(true));
    let estimate = |j: usize, pseudo: &[Pseudocost]| {
        let p = pseudo[j];
        let f = x[j] - x[j].floor();
        let pd = if p.n_down > 0 { p.down / p.n_down as f64 } else { mean_down };
        let pu = if p.n_up > 0 { p.up / p.n_up as f64 } else { mean_up };
        product_score(f * pd, (1.0 - f) * pu)
    };

    let mut strong: Vec<usize> = if allow_strong {
        cands.iter().copied().filter(|&j| !pseudo[j].reliable()).collect()
    } else {
        Vec::new()
    };
    // stable sort keeps name order among equal estimates
    strong.sort_by(|&a, &b| estimate(b, pseudo).total_cmp(&estimate(a, pseudo)));
    strong.truncate(STRONG_CANDIDATES);

    let mut best: Option<(usize, f64, Option<f64>, Option<f64>)> = None;
    let mut results: Vec<(usize, f64, f64)> = Vec::new();
    for &j in &strong {
        let f = x[j] - x[j].floor();
        let mut child = |lower: f64, upper: f64| -> Result<f64> {
            let mut l = lo.to_vec();
            let mut h = hi.to_vec();
            l[j] = lower;
            h[j] = upper;
            lp.set_bounds(&l, &h);
            lp.load_basis(basis);
            Ok(match lp.solve()? {
                LpStatus::Optimal => lp.objective() + problem.objective_offset,
                _ => f64::INFINITY,
            })
        };
        let down = child(lo[j], x[j].floor())?;
        let up = child(x[j].ceil(), hi[j])?;
        if down.is_finite() {
            pseudo[j].record(false, (down - value).max(0.0) / f);
        }
        if up.is_finite() {
            pseudo[j].record(true, (up - value).max(0.0) / (1.0 - f));
        }
        results.push((j, down, up));
    }
    if results.iter().any(|r| r.1.is_infinite() && r.2.is_infinite()) {
        return Ok(Branching::Prune);
    }
    let gain = |v: f64| if v.is_finite() { v - value } else { INFEASIBLE_GAIN };
    for &j in &cands {
        let (score, down, up) = match results.iter().find(|r| r.0 == j) {
            Some(&(_, d, u)) => (product_score(gain(d), gain(u)), Some(d), Some(u)),
            None => (estimate(j, pseudo), None, None),
        };
        if best.is_none_or(|b| score > b.1 * (1.0 + 1e-9)) {
            best = Some((j, score, down, up));
        }
    }
    let (var, _, down, up) = best.expect("at least one candidate");
    Ok(Branching::On { var, down, up })
}

fn node_bounds(root_lo: &[f64], root_hi: &[f64], changes: &Option<Rc<BoundChange>>, lo: &mut Vec<f64>, hi: &mut Vec<f64>) {
    lo.clear();
    lo.extend_from_slice(root_lo);
    hi.clear();
    hi.extend_from_slice(root_hi);
    let mut seen = vec![false; root_lo.len()];
    let mut cur = changes.as_ref();
    while let Some(c) = cur {
        if !seen[c.var] {
            seen[c.var] = true;
            lo[c.var] = c.lower;
            hi[c.var] = c.upper;
        }
        cur = c.parent.as_ref();
    }
}

/// Solves `problem` to the requested gap with best-bound search.
pub fn solve_milp(problem: &Problem, options: &MilpOptions) -> Result<MilpSolution> {
    let start = Instant::now();
    let mut lp = DualSimplex::new(problem)?;
    let order = name_order(problem);

    let mut root_lo: Vec<f64> = problem.variables.iter().map(|v| v.lower).collect();
    let mut root_hi: Vec<f64> = problem.variables.iter().map(|v| v.upper).collect();
    for &j in &order {
        root_lo[j] = root_lo[j].ceil();
        root_hi[j] = root_hi[j].floor();
    }
    let infeasible = |nodes, lp_iterations| MilpSolution {
        status: MilpStatus::Infeasible,
        x: None,
        objective: None,
        best_bound: f64::INFINITY,
        gap: 0.0,
        nodes,
        lp_iterations,
        wall_time: start.elapsed(),
        max_residual: 0.0,
    };
    if root_lo.iter().zip(&root_hi).any(|(l, h)| l > h) {
        return Ok(infeasible(0, 0));
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(Node {
        id: next_id,
        bound: f64::NEG_INFINITY,
        depth: 0,
        changes: None,
        basis: lp.basis(),
        parent_value: f64::NEG_INFINITY,
        branched: None,
    });
    next_id += 1;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut loaded: Option<Rc<Basis>> = None;
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut stopped: Option<MilpStatus> = None;
    let mut pseudo = vec![Pseudocost::default(); problem.num_vars()];

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= cutoff(*inc, options.gap) {
                continue;
            }
        }
        let limit_hit = if options.time_limit.is_some_and(|t| start.elapsed() >= t) {
            Some(MilpStatus::TimeLimit)
        } else if options.node_limit.is_some_and(|n| nodes >= n) {
            Some(MilpStatus::NodeLimit)
        } else {
            None
        };
        if let Some(status) = limit_hit {
            stopped = Some(status);
            heap.push(node);
            break;
        }

        node_bounds(&root_lo, &root_hi, &node.changes, &mut lo, &mut hi);
        lp.set_bounds(&lo, &hi);
        if !loaded.as_ref().is_some_and(|b| Rc::ptr_eq(b, &node.basis)) {
            lp.load_basis(&node.basis);
        }
        let status = lp.solve()?;
        nodes += 1;
        if nodes % 5000 == 0 {
            debug!(
                "bnb: {nodes} nodes, open {}, bound {:.6}, incumbent {:?}",
                heap.len(),
                node.bound,
                incumbent.as_ref().map(|(v, _)| *v)
            );
        }
        match status {
            LpStatus::Infeasible => {
                loaded = None;
                continue;
            }
            LpStatus::Unbounded => {
                if incumbent.is_none() && node.depth == 0 {
                    return Ok(MilpSolution {
                        status: MilpStatus::Unbounded,
                        x: None,
                        objective: None,
                        best_bound: f64::NEG_INFINITY,
                        gap: f64::INFINITY,
                        nodes,
                        lp_iterations: lp.iterations,
                        wall_time: start.elapsed(),
                        max_residual: 0.0,
                    });
                }
                loaded = None;
                continue;
            }
            LpStatus::Optimal => {}
        }
        let value = lp.objective() + problem.objective_offset;
        if let Some((j, dist, up)) = node.branched {
            if node.parent_value.is_finite() && dist > 0.0 {
                pseudo[j].record(up, (value - node.parent_value).max(0.0) / dist);
            }
        }
        let bound = value.max(node.bound);
        if let Some((inc, _)) = &incumbent {
            if bound >= cutoff(*inc, options.gap) {
                loaded = None;
                continue;
            }
        }
        let x = lp.structural_values();
        let basis = lp.basis();
        let allow_strong = options.time_limit.is_none_or(|t| start.elapsed() < t);
        match select_branch(problem, &mut lp, &order, &x, value, &lo, &hi, &basis, &mut pseudo, allow_strong, options.branching)? {
            Branching::Integral => {
                let (obj, sol) = polish(problem, &mut lp, &order, &lo, &hi, x);
                loaded = None;
                if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                    debug!("bnb: incumbent {obj:.6} at node {nodes}");
                    incumbent = Some((obj, sol));
                }
            }
            Branching::Prune => loaded = None,
            Branching::On { var: j, down, up } => {
                // strong branching may have moved the LP away from this basis
                loaded = if lp.holds(&basis) { Some(basis.clone()) } else { None };
                let v = x[j];
                let f = v - v.floor();
                let children = [
                    (lo[j], v.floor(), down, f, false),
                    (v.ceil(), hi[j], up, 1.0 - f, true),
                ];
                for (lower, upper, child_bound, dist, is_up) in children {
                    let child_bound = child_bound.map_or(bound, |b| b.max(bound));
                    if child_bound.is_infinite() {
                        continue;
                    }
                    if incumbent.as_ref().is_some_and(|(inc, _)| child_bound >= cutoff(*inc, options.gap)) {
                        continue;
                    }
                    let change = Rc::new(BoundChange { var: j, lower, upper, parent: node.changes.clone() });
                    heap.push(Node {
                        id: next_id,
                        bound: child_bound,
                        depth: node.depth + 1,
                        changes: Some(change),
                        basis: basis.clone(),
                        parent_value: value,
                        branched: Some((j, dist, is_up)),
                    });
                    next_id += 1;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let wall_time = start.elapsed();
    match incumbent {
        None => {
            if let Some(status) = stopped {
                Ok(MilpSolution {
                    status,
                    x: None,
                    objective: None,
                    best_bound: open_bound,
                    gap: f64::INFINITY,
                    nodes,
                    lp_iterations: lp.iterations,
                    wall_time,
                    max_residual: 0.0,
                })
            } else {
                let mut sol = infeasible(nodes, lp.iterations);
                sol.wall_time = wall_time;
                Ok(sol)
            }
        }
        Some((obj, x)) => {
            let best_bound = open_bound.min(obj);
            let max_residual = problem.max_violation(&x);
            Ok(MilpSolution {
                status: stopped.unwrap_or(MilpStatus::Optimal),
                objective: Some(obj),
                gap: relative_gap(obj, best_bound),
                best_bound,
                x: Some(x),
                nodes,
                lp_iterations: lp.iterations,
                wall_time,
                max_residual,
            })
        }
    }
}

/// Rounds integer variables and re-solves for the continuous ones so the
/// reported point is exactly integral.
fn polish(problem: &Problem, lp: &mut DualSimplex, order: &[usize], lo: &[f64], hi: &[f64], mut x: Vec<f64>) -> (f64, Vec<f64>) {
    for &j in order {
        x[j] = x[j].round();
    }
    let mut plo = lo.to_vec();
    let mut phi = hi.to_vec();
    for &j in order {
        plo[j] = x[j];
        phi[j] = x[j];
    }
    lp.set_bounds(&plo, &phi);
    if let Ok(LpStatus::Optimal) = lp.solve() {
        let mut y = lp.structural_values();
        for &j in order {
            y[j] = x[j];
        }
        if problem.max_violation(&y) <= problem.max_violation(&x) + 1e-12 || problem.max_violation(&y) <= crate::FEAS_TOL {
            x = y;
        }
    }
    (problem.objective_value(&x), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Row, Sense};

    #[test]
    fn knapsack_matches_enumeration() {
        let weights = [12.0, 7.0, 11.0, 8.0, 9.0];
        let values = [24.0, 13.0, 23.0, 15.0, 16.0];
        let cap = 26.0;
        let mut p = Problem::new();
        let xs: Vec<usize> = (0..5).map(|i| p.add_var(format!("x{i}"), VarKind::Binary, 0.0, 1.0)).collect();
        p.objective = xs.iter().zip(values).map(|(&j, v)| (j, -v)).collect();
        p.add_row(Row::new("cap", xs.iter().zip(weights).map(|(&j, w)| (j, w)).collect(), Sense::Le, cap));
        let sol = solve_milp(&p, &MilpOptions::default()).unwrap();
        let mut best = 0.0f64;
        for mask in 0u32..32 {
            let w: f64 = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
            if w <= cap {
                best = best.max((0..5).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum());
            }
        }
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective.unwrap() + best).abs() < 1e-9);
        assert!(sol.gap <= 1e-12);
    }

    #[test]
    fn integer_infeasible_detected() {
        // 2x = 1 has no integer solution
        let mut p = Problem::new();
        let x = p.add_var("x", VarKind::Integer, 0.0, 5.0);
        p.objective = vec![(x, 1.0)];
        p.add_row(Row::new("half", vec![(x, 2.0)], Sense::Eq, 1.0));
        let sol = solve_milp(&p, &MilpOptions::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
    }
}
