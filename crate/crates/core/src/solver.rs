//! Exact solves of encoded models, including the lazy subtour-cut loop.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use log::{debug, info};
use milp::{MilpOptions, MilpStatus};

use crate::encoder::{make_dfj_cut, LinearConstraint, MilpModel, Objective, SecMode};
use crate::error::Result;
use crate::graph::{MultiGraph, VertexId, WorkerId};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveLimits {
    /// Wall-clock budget for the whole solve, cut rounds included.
    pub time_limit: Option<Duration>,
    /// Relative gap at which branch-and-bound stops.
    pub gap: f64,
    pub node_limit: Option<usize>,
    /// Cap on solve/separate rounds.
    pub max_rounds: usize,
    /// Components smaller than this get a cut for every subset of two or
    /// more vertices; `None` adds one cut per component.
    pub subset_threshold: Option<usize>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { time_limit: None, gap: 0.0, node_limit: None, max_rounds: 1000, subset_threshold: Some(8) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
    IterationCap,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::IterationCap => "iteration_cap",
        })
    }
}

/// One solve/separate round of the cut loop.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub components: usize,
    pub cuts_added: usize,
    pub nodes: usize,
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub reason: Option<String>,
    pub sec: SecMode,
    pub objective_kind: Objective,
    /// Incumbent values indexed like `MilpModel::variables`; always free of
    /// subtours.
    pub solution: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Every lazily added cut, in the order added.
    pub cuts: Vec<LinearConstraint>,
    pub rounds: Vec<RoundLog>,
    pub variables: usize,
    pub constraints: usize,
    pub max_residual: f64,
    pub wall_time: Duration,
    pub seed: Option<u64>,
}

impl SolveReport {
    fn new(model: &MilpModel) -> Self {
        SolveReport {
            status: SolveStatus::Infeasible,
            reason: None,
            sec: model.options.sec,
            objective_kind: model.options.objective,
            solution: None,
            objective: None,
            best_bound: None,
            gap: None,
            nodes: 0,
            lp_iterations: 0,
            cuts: Vec::new(),
            rounds: Vec::new(),
            variables: model.variables.len(),
            constraints: model.constraints.len(),
            max_residual: 0.0,
            wall_time: Duration::ZERO,
            seed: None,
        }
    }

    /// `key: value` lines, one per field, then one line per cut round.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "status: {}", self.status);
        let _ = writeln!(s, "reason: {}", self.reason.as_deref().unwrap_or("-"));
        let _ = writeln!(s, "sec: {}", self.sec);
        let _ = writeln!(s, "objective_kind: {}", self.objective_kind);
        let _ = writeln!(s, "objective: {}", opt(self.objective));
        let _ = writeln!(s, "best_bound: {}", opt(self.best_bound));
        let _ = writeln!(s, "gap: {}", opt(self.gap));
        let _ = writeln!(s, "nodes: {}", self.nodes);
        let _ = writeln!(s, "lp_iterations: {}", self.lp_iterations);
        let _ = writeln!(s, "cuts: {}", self.cuts.len());
        let _ = writeln!(s, "rounds: {}", self.rounds.len());
        let _ = writeln!(s, "variables: {}", self.variables);
        let _ = writeln!(s, "constraints: {}", self.constraints);
        let _ = writeln!(s, "max_residual: {:e}", self.max_residual);
        let _ = writeln!(s, "wall_time_s: {:.3}", self.wall_time.as_secs_f64());
        let _ = writeln!(s, "seed: {}", self.seed.map_or("-".to_string(), |v| v.to_string()));
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "round {}: status={} objective={} components={} cuts_added={} nodes={} wall_time_s={:.3}",
                r.round,
                r.status,
                opt(r.objective),
                r.components,
                r.cuts_added,
                r.nodes,
                r.wall_time.as_secs_f64()
            );
        }
        s
    }
}

fn remaining(limits: &SolveLimits, start: Instant) -> Option<Duration> {
    limits.time_limit.map(|t| t.saturating_sub(start.elapsed()))
}

/// Solves `model` with `cuts` appended, in a single branch-and-bound run.
pub fn solve_milp(model: &MilpModel, limits: &SolveLimits, cuts: &[LinearConstraint]) -> Result<SolveReport> {
    let start = Instant::now();
    let problem = model.to_problem(cuts);
    let opts = MilpOptions { time_limit: limits.time_limit, gap: limits.gap, node_limit: limits.node_limit, ..Default::default() };
    let sol = milp::solve_milp(&problem, &opts)?;
    let mut rep = SolveReport::new(model);
    rep.constraints += cuts.len();
    rep.cuts = cuts.to_vec();
    rep.status = match sol.status {
        MilpStatus::Optimal => SolveStatus::Optimal,
        MilpStatus::Infeasible => SolveStatus::Infeasible,
        MilpStatus::Unbounded => SolveStatus::Unbounded,
        MilpStatus::TimeLimit => SolveStatus::TimeLimit,
        MilpStatus::NodeLimit => SolveStatus::NodeLimit,
    };
    rep.reason = match rep.status {
        SolveStatus::TimeLimit => Some(format!("time limit reached after {} nodes", sol.nodes)),
        SolveStatus::NodeLimit => Some(format!("node limit reached after {} nodes", sol.nodes)),
        SolveStatus::Infeasible => Some("no plan satisfies the constraints".into()),
        SolveStatus::Unbounded => Some("the relaxation is unbounded".into()),
        _ => None,
    };
    rep.objective = sol.objective;
    rep.best_bound = sol.best_bound.is_finite().then_some(sol.best_bound);
    rep.gap = sol.objective.map(|_| sol.gap);
    rep.nodes = sol.nodes;
    rep.lp_iterations = sol.lp_iterations;
    rep.max_residual = sol.max_residual;
    rep.solution = sol.x;
    rep.wall_time = start.elapsed();
    Ok(rep)
}

/// Per worker, the vertex sets of active-edge components that miss the
/// worker's base. Edges with value above 1/2 are active.
pub fn separate_subtours(graph: &MultiGraph, z: &[f64]) -> Vec<(WorkerId, BTreeSet<VertexId>)> {
    let mut out = Vec::new();
    for (w, gw) in graph.workers.iter().enumerate() {
        let mut adj: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for e in graph.worker_edges(w).filter(|&e| z[e] > 0.5) {
            let edge = &graph.edges[e];
            adj.entry(edge.from).or_default().push(edge.to);
            adj.entry(edge.to).or_default().push(edge.from);
        }
        let mut seen = BTreeSet::new();
        for &root in adj.keys() {
            if seen.contains(&root) {
                continue;
            }
            let mut comp = BTreeSet::from([root]);
            let mut stack = vec![root];
            while let Some(u) = stack.pop() {
                for &v in &adj[&u] {
                    if comp.insert(v) {
                        stack.push(v);
                    }
                }
            }
            seen.extend(comp.iter().copied());
            if !comp.contains(&gw.base) {
                out.push((w, comp));
            }
        }
    }
    out
}

/// Cuts for one component: the component itself, plus every subset of
/// size two or more when it is below `threshold`.
fn component_cuts(graph: &MultiGraph, w: WorkerId, q: &BTreeSet<VertexId>, threshold: Option<usize>) -> Result<Vec<LinearConstraint>> {
    let items: Vec<VertexId> = q.iter().copied().collect();
    let mut sets = vec![q.clone()];
    if threshold.is_some_and(|t| items.len() < t) {
        for mask in 1u32..(1 << items.len()) - 1 {
            if mask.count_ones() >= 2 {
                sets.push(items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect());
            }
        }
    }
    let mut cuts = Vec::new();
    for s in sets {
        let cut = make_dfj_cut(graph, w, &s)?;
        // no edge inside the set: the cut is vacuous
        if cut.terms.is_empty() {
            continue;
        }
        cuts.push(cut);
    }
    Ok(cuts)
}

/// Relax, solve, add cuts for every subtour found, repeat.
pub fn dfj_loop(graph: &MultiGraph, model: &MilpModel, limits: &SolveLimits) -> Result<SolveReport> {
    let start = Instant::now();
    let mut cuts: Vec<LinearConstraint> = Vec::new();
    // cut names encode the worker and the vertex set
    let mut keys: BTreeSet<String> = BTreeSet::new();
    let mut rounds = Vec::new();
    let (mut nodes, mut iters) = (0, 0);
    for round in 1..=limits.max_rounds.max(1) {
        let round_start = Instant::now();
        let sub = SolveLimits { time_limit: remaining(limits, start), ..limits.clone() };
        let mut rep = solve_milp(model, &sub, &cuts)?;
        nodes += rep.nodes;
        iters += rep.lp_iterations;
        let comps = match &rep.solution {
            Some(x) => separate_subtours(graph, &model.edge_values(graph, x)),
            None => vec![],
        };
        let mut added = 0;
        for (w, q) in &comps {
            for cut in component_cuts(graph, *w, q, limits.subset_threshold)? {
                if keys.insert(cut.name.clone()) {
                    cuts.push(cut);
                    added += 1;
                }
            }
        }
        debug!("round {round}: {} components, {added} cuts", comps.len());
        rounds.push(RoundLog {
            round,
            status: rep.status,
            objective: rep.objective,
            components: comps.len(),
            cuts_added: added,
            nodes: rep.nodes,
            wall_time: round_start.elapsed(),
        });
        let done = comps.is_empty() || rep.solution.is_none();
        if done || matches!(rep.status, SolveStatus::TimeLimit | SolveStatus::NodeLimit) || round == limits.max_rounds.max(1) {
            if !done {
                // the incumbent still has subtours, so it is not a plan
                rep.solution = None;
                rep.objective = None;
                rep.gap = None;
                if !matches!(rep.status, SolveStatus::TimeLimit | SolveStatus::NodeLimit) {
                    rep.status = SolveStatus::IterationCap;
                    rep.reason = Some(format!("{} cut rounds did not remove every subtour", limits.max_rounds));
                } else {
                    rep.reason = Some(format!("{} with subtours left after round {round}", rep.reason.unwrap_or_default()));
                }
            }
            rep.constraints = model.constraints.len() + cuts.len();
            rep.cuts = cuts;
            rep.rounds = rounds;
            rep.nodes = nodes;
            rep.lp_iterations = iters;
            rep.wall_time = start.elapsed();
            info!("cut loop finished after {round} rounds: {}", rep.status);
            return Ok(rep);
        }
        if remaining(limits, start).is_some_and(|d| d.is_zero()) {
            let mut rep = SolveReport::new(model);
            rep.status = SolveStatus::TimeLimit;
            rep.reason = Some(format!("time limit reached after {round} cut rounds"));
            rep.best_bound = rounds.last().and_then(|r| r.objective);
            rep.constraints = model.constraints.len() + cuts.len();
            rep.cuts = cuts;
            rep.rounds = rounds;
            rep.nodes = nodes;
            rep.lp_iterations = iters;
            rep.wall_time = start.elapsed();
            return Ok(rep);
        }
    }
    unreachable!("the last round always returns")
}

/// Solves with the subtour strategy the model was encoded for.
pub fn solve(graph: &MultiGraph, model: &MilpModel, limits: &SolveLimits) -> Result<SolveReport> {
    match model.options.sec {
        SecMode::Mtz => solve_milp(model, limits, &[]),
        SecMode::DfjLazy => dfj_loop(graph, model, limits),
    }
}
