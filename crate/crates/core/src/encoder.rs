//! Translation of a multigraph plus options into a mixed-integer program.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use milp::{Problem, Row, VarKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MultiGraph, VertexId, WorkerId};
use crate::model::{CostType, OrderPair, Precedence, ProblemInstance, TimeWindow};

pub use milp::Sense;

/// A model variable. `F` carries the cost type as an index into
/// `MultiGraph::cost_types`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarRef {
    Z(EdgeId),
    YB(WorkerId),
    YC(VertexId, WorkerId),
    P(VertexId, WorkerId),
    F(usize, VertexId, WorkerId),
    MSigma,
    WP(WorkerId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Binary,
    Integer,
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub var: VarRef,
    pub name: String,
    pub domain: Domain,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// Base out/in degree equals the worker's activity flag.
    Bases,
    /// Team-wide in/out degree of each task.
    TaskCompletion,
    /// Per-worker degree of each vertex equals twice its visit flag.
    VertexDegree,
    MtzStep,
    MtzVisited,
    MtzFirst,
    Order,
    MfeStep,
    MfeVisited,
    MfeFirst,
    MfeCap,
    Precedence,
    MinMax,
    TimeWindow,
    Energy,
    /// Lazily separated subtour cut.
    Subtour,
}

impl Family {
    /// Coarse constraint group.
    pub fn group(self) -> &'static str {
        match self {
            Family::Bases => "C_B",
            Family::TaskCompletion | Family::VertexDegree => "C_T",
            Family::MtzStep | Family::MtzVisited | Family::MtzFirst | Family::Subtour => "C_S",
            Family::Order => "C_O",
            Family::MfeStep | Family::MfeVisited | Family::MfeFirst | Family::MfeCap => "C_MFE",
            Family::Precedence => "C_P",
            Family::MinMax => "C_MTM",
            Family::TimeWindow => "windows",
            Family::Energy => "energy",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub family: Family,
    pub name: String,
    pub terms: Vec<(f64, VarRef)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, model: &MilpModel, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(a, v)| a * model.value(x, v)).sum()
    }

    /// Amount by which `x` violates the constraint.
    pub fn violation(&self, model: &MilpModel, x: &[f64]) -> f64 {
        let act = self.activity(model, x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SecMode {
    #[default]
    DfjLazy,
    Mtz,
}

impl FromStr for SecMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dfj" => Ok(SecMode::DfjLazy),
            "mtz" => Ok(SecMode::Mtz),
            _ => Err(format!("unknown subtour mode {s}, expected dfj or mtz")),
        }
    }
}

impl fmt::Display for SecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SecMode::DfjLazy => "dfj",
            SecMode::Mtz => "mtz",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Minimize the longest route time.
    #[default]
    #[serde(rename = "mtm")]
    Mtm,
    /// Minimize the summed route times.
    #[serde(rename = "total")]
    TotalTime,
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mtm" => Ok(Objective::Mtm),
            "total" => Ok(Objective::TotalTime),
            _ => Err(format!("unknown objective {s}, expected mtm or total")),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Mtm => "mtm",
            Objective::TotalTime => "total",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EncodeOptions {
    pub sec: SecMode,
    pub objective: Objective,
    pub waiting: bool,
    pub energy_budget: bool,
    pub order: Vec<OrderPair>,
    pub precedence: Vec<Precedence>,
    pub windows: Vec<TimeWindow>,
    /// Extra cost types to track with partial-cost variables.
    pub track: Vec<CostType>,
}

impl EncodeOptions {
    /// Options carrying the instance's own side constraints and flags.
    pub fn from_instance(inst: &ProblemInstance, sec: SecMode, objective: Objective) -> Self {
        EncodeOptions {
            sec,
            objective,
            waiting: inst.waiting,
            energy_budget: inst.energy_budget,
            order: inst.order.clone(),
            precedence: inst.precedence.clone(),
            windows: inst.windows.clone(),
            track: Vec::new(),
        }
    }

    /// Whether position variables are present.
    pub fn uses_positions(&self) -> bool {
        self.sec == SecMode::Mtz || !self.order.is_empty()
    }

    /// Whether time partial-cost variables are present.
    pub fn tracks_time(&self) -> bool {
        self.waiting || !self.precedence.is_empty() || !self.windows.is_empty()
    }
}

/// Big-M values used by the model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BigM {
    /// m_w = |T|_w|.
    pub m: Vec<f64>,
    /// O_w per tracked cost index.
    pub o: BTreeMap<(usize, WorkerId), f64>,
    /// Upper bound on each worker's total wait.
    pub wait_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpModel {
    pub options: EncodeOptions,
    pub variables: Vec<VarDecl>,
    pub constraints: Vec<LinearConstraint>,
    /// Minimized.
    pub objective: Vec<(f64, VarRef)>,
    pub big_m: BigM,
    /// Index of the time cost type, if present.
    pub time: Option<usize>,
    /// Cost indices with partial-cost variables.
    pub tracked: Vec<usize>,
    index: BTreeMap<VarRef, usize>,
}

impl MilpModel {
    pub fn var_index(&self, v: VarRef) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// Value of `v` in `x`; variables the model lacks are fixed at 0.
    pub fn value(&self, x: &[f64], v: VarRef) -> f64 {
        self.var_index(v).map_or(0.0, |j| x[j])
    }

    pub fn by_name(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|d| d.name == name)
    }

    pub fn count(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    pub fn count_vars(&self, pred: impl Fn(&VarRef) -> bool) -> usize {
        self.variables.iter().filter(|d| pred(&d.var)).count()
    }

    /// Value of every edge variable, indexed by edge id.
    pub fn edge_values(&self, graph: &MultiGraph, x: &[f64]) -> Vec<f64> {
        (0..graph.edges.len()).map(|e| self.value(x, VarRef::Z(e))).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(c, v)| c * self.value(x, v)).sum()
    }

    /// Largest bound or constraint violation of `x`, cuts included.
    pub fn max_violation(&self, x: &[f64], cuts: &[LinearConstraint]) -> f64 {
        let bounds = self.variables.iter().zip(x).map(|(d, &v)| (d.lower - v).max(v - d.upper).max(0.0));
        let rows = self.constraints.iter().chain(cuts).map(|c| c.violation(self, x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// The model, plus `cuts`, as a solver problem.
    pub fn to_problem(&self, cuts: &[LinearConstraint]) -> Problem {
        let mut p = Problem::new();
        for d in &self.variables {
            let kind = match d.domain {
                Domain::Binary => VarKind::Binary,
                Domain::Integer => VarKind::Integer,
                Domain::Continuous => VarKind::Continuous,
            };
            p.add_var(d.name.clone(), kind, d.lower, d.upper);
        }
        for c in self.constraints.iter().chain(cuts) {
            let terms = c.terms.iter().map(|&(a, v)| (self.index[&v], a)).collect();
            p.add_row(Row::new(c.name.clone(), terms, c.sense, c.rhs));
        }
        p.objective = self.objective.iter().map(|&(c, v)| (self.index[&v], c)).collect();
        p
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' }).collect()
}

/// The documented variable name of `v`.
pub fn var_name(graph: &MultiGraph, v: VarRef) -> String {
    let vl = |u: VertexId| sanitize(&graph.vertices[u].label);
    let wl = |w: WorkerId| sanitize(&graph.workers[w].id);
    match v {
        VarRef::Z(e) => {
            let edge = &graph.edges[e];
            format!("z_{}_{}_{}", vl(edge.from), vl(edge.to), wl(edge.worker))
        }
        VarRef::YB(w) => format!("yb_{}", wl(w)),
        VarRef::YC(u, w) => format!("yc_{}_{}", vl(u), wl(w)),
        VarRef::P(u, w) => format!("p_{}_{}", vl(u), wl(w)),
        VarRef::F(mu, u, w) => format!("f_{}_{}_{}", sanitize(graph.cost_types[mu].as_str()), vl(u), wl(w)),
        VarRef::MSigma => "msigma".into(),
        VarRef::WP(w) => format!("wp_{}", wl(w)),
    }
}

struct Builder<'g> {
    graph: &'g MultiGraph,
    variables: Vec<VarDecl>,
    index: BTreeMap<VarRef, usize>,
    names: BTreeSet<String>,
    row_names: BTreeSet<String>,
    constraints: Vec<LinearConstraint>,
}

impl Builder<'_> {
    fn var(&mut self, var: VarRef, domain: Domain, lower: f64, upper: f64) -> Result<()> {
        let name = var_name(self.graph, var);
        if !self.names.insert(name.clone()) {
            return Err(Error::Encode(format!("variable name {name} is ambiguous; rename ids")));
        }
        self.index.insert(var, self.variables.len());
        self.variables.push(VarDecl { var, name, domain, lower, upper });
        Ok(())
    }

    fn row(&mut self, family: Family, name: String, terms: Vec<(f64, VarRef)>, sense: Sense, rhs: f64) -> Result<()> {
        let terms: Vec<(f64, VarRef)> = terms.into_iter().filter(|t| t.0 != 0.0).collect();
        if terms.is_empty() {
            let ok = match sense {
                Sense::Le => 0.0 <= rhs,
                Sense::Ge => 0.0 >= rhs,
                Sense::Eq => rhs == 0.0,
            };
            if ok {
                return Ok(());
            }
            return Err(Error::Encode(format!("constraint {name} has no variables and cannot hold")));
        }
        let name = sanitize(&name);
        if !self.row_names.insert(name.clone()) {
            return Err(Error::Encode(format!("constraint name {name} is ambiguous; rename ids")));
        }
        if terms.iter().any(|t| !t.0.is_finite()) || !rhs.is_finite() {
            return Err(Error::Encode(format!("non-finite coefficient in {name}")));
        }
        self.constraints.push(LinearConstraint { family, name, terms, sense, rhs });
        Ok(())
    }
}

fn task_vertices(graph: &MultiGraph, id: &str) -> Result<Vec<VertexId>> {
    let t = graph.task_index(id).ok_or_else(|| Error::Encode(format!("unknown task {id}")))?;
    Ok(graph.tasks[t].vertices.clone())
}

pub fn encode(graph: &MultiGraph, opts: &EncodeOptions) -> Result<MilpModel> {
    let time = graph.cost_index(&CostType::time());
    let needs_time = opts.objective == Objective::Mtm || opts.objective == Objective::TotalTime || opts.tracks_time();
    if needs_time && time.is_none() {
        return Err(Error::Encode("the objective and timing constraints need a time cost type".into()));
    }
    let energy = graph.cost_index(&CostType::energy());
    if opts.energy_budget && energy.is_none() {
        return Err(Error::Encode("energy budget requested without an energy cost type".into()));
    }
    for t in &graph.tasks {
        if t.mandatory && t.vertices.iter().all(|&v| (0..graph.num_workers()).all(|w| graph.in_edges(w, v).is_empty())) {
            return Err(Error::Encode(format!("mandatory task {} has no compatible edge", t.id)));
        }
    }

    let mut tracked: Vec<usize> = Vec::new();
    if opts.tracks_time() {
        tracked.extend(time);
    }
    for mu in &opts.track {
        let i = graph.cost_index(mu).ok_or_else(|| Error::Encode(format!("cannot track unknown cost type {mu}")))?;
        if !tracked.contains(&i) {
            tracked.push(i);
        }
    }

    let nw = graph.num_workers();
    let wait_bound = match time {
        Some(t) if opts.waiting => graph.edges.iter().map(|e| e.omega(t)).sum(),
        _ => 0.0,
    };
    let mut big_m = BigM { m: Vec::new(), o: BTreeMap::new(), wait_bound };
    for (w, gw) in graph.workers.iter().enumerate() {
        big_m.m.push(gw.compatible.len() as f64);
        for &mu in &tracked {
            let mut o = 1.0 + graph.layer_total(w, mu);
            if Some(mu) == time && opts.waiting {
                o += wait_bound;
            }
            big_m.o.insert((mu, w), o);
        }
    }

    let mut b = Builder { graph, variables: Vec::new(), index: BTreeMap::new(), names: BTreeSet::new(), row_names: BTreeSet::new(), constraints: Vec::new() };
    for e in 0..graph.edges.len() {
        b.var(VarRef::Z(e), Domain::Binary, 0.0, 1.0)?;
    }
    for w in 0..nw {
        b.var(VarRef::YB(w), Domain::Binary, 0.0, 1.0)?;
    }
    for (w, gw) in graph.workers.iter().enumerate() {
        for &v in &gw.compatible {
            b.var(VarRef::YC(v, w), Domain::Binary, 0.0, 1.0)?;
        }
    }
    if opts.uses_positions() {
        for (w, gw) in graph.workers.iter().enumerate() {
            for &v in &gw.compatible {
                b.var(VarRef::P(v, w), Domain::Integer, 0.0, big_m.m[w])?;
            }
        }
    }
    for &mu in &tracked {
        for (w, gw) in graph.workers.iter().enumerate() {
            for &v in &gw.compatible {
                b.var(VarRef::F(mu, v, w), Domain::Continuous, 0.0, big_m.o[&(mu, w)])?;
            }
        }
    }
    if opts.objective == Objective::Mtm {
        let t = time.expect("checked above");
        let cap = (0..nw).map(|w| 1.0 + graph.layer_total(w, t) + wait_bound).fold(0.0, f64::max);
        b.var(VarRef::MSigma, Domain::Continuous, 0.0, cap)?;
    }
    if opts.waiting {
        for w in 0..nw {
            b.var(VarRef::WP(w), Domain::Continuous, 0.0, wait_bound)?;
        }
    }

    let z = |e: EdgeId| VarRef::Z(e);
    let wid = |w: WorkerId| graph.workers[w].id.clone();
    let lab = |v: VertexId| graph.vertices[v].label.clone();

    // Bases
    for (w, gw) in graph.workers.iter().enumerate() {
        let mut out: Vec<(f64, VarRef)> = graph.out_edges(w, gw.base).iter().map(|&e| (1.0, z(e))).collect();
        out.push((-1.0, VarRef::YB(w)));
        b.row(Family::Bases, format!("cb_out_{}", wid(w)), out, Sense::Eq, 0.0)?;
        let mut inn: Vec<(f64, VarRef)> = graph.in_edges(w, gw.base).iter().map(|&e| (1.0, z(e))).collect();
        inn.push((-1.0, VarRef::YB(w)));
        b.row(Family::Bases, format!("cb_in_{}", wid(w)), inn, Sense::Eq, 0.0)?;
    }

    // Task completion
    for t in &graph.tasks {
        let sense = if t.mandatory { Sense::Eq } else { Sense::Le };
        let mut out = Vec::new();
        let mut inn = Vec::new();
        for w in 0..nw {
            for &v in &t.vertices {
                out.extend(graph.out_edges(w, v).iter().map(|&e| (1.0, z(e))));
                inn.extend(graph.in_edges(w, v).iter().map(|&e| (1.0, z(e))));
            }
        }
        b.row(Family::TaskCompletion, format!("ct_out_{}", t.id), out, sense, 1.0)?;
        b.row(Family::TaskCompletion, format!("ct_in_{}", t.id), inn, sense, 1.0)?;
    }
    for (w, gw) in graph.workers.iter().enumerate() {
        for &v in &gw.compatible {
            let mut terms: Vec<(f64, VarRef)> = graph.out_edges(w, v).iter().map(|&e| (1.0, z(e))).collect();
            terms.extend(graph.in_edges(w, v).iter().map(|&e| (1.0, z(e))));
            terms.push((-2.0, VarRef::YC(v, w)));
            b.row(Family::VertexDegree, format!("cd_{}_{}", lab(v), wid(w)), terms, Sense::Eq, 0.0)?;
        }
    }

    // Positions
    if opts.uses_positions() {
        for (w, gw) in graph.workers.iter().enumerate() {
            let m = big_m.m[w];
            for e in graph.worker_edges(w) {
                let edge = &graph.edges[e];
                if edge.from == gw.base || edge.to == gw.base {
                    continue;
                }
                let (u, v) = (edge.from, edge.to);
                b.row(
                    Family::MtzStep,
                    format!("mtz_{}_{}_{}", lab(u), lab(v), wid(w)),
                    vec![(1.0, VarRef::P(u, w)), (-1.0, VarRef::P(v, w)), (m, z(e))],
                    Sense::Le,
                    m - 1.0,
                )?;
            }
            for &u in &gw.compatible {
                b.row(
                    Family::MtzVisited,
                    format!("mtzv_{}_{}", lab(u), wid(w)),
                    vec![(1.0, VarRef::P(u, w)), (-m, VarRef::YC(u, w))],
                    Sense::Le,
                    0.0,
                )?;
            }
            for &e in graph.out_edges(w, gw.base) {
                let u = graph.edges[e].to;
                b.row(
                    Family::MtzFirst,
                    format!("mtzf_{}_{}", lab(u), wid(w)),
                    vec![(1.0, z(e)), (-1.0, VarRef::P(u, w))],
                    Sense::Le,
                    0.0,
                )?;
            }
        }
        for (k, o) in opts.order.iter().enumerate() {
            let before = task_vertices(graph, &o.before)?;
            let after = task_vertices(graph, &o.after)?;
            let scope: Vec<WorkerId> = match &o.worker {
                Some(id) => vec![graph.worker_index(id).ok_or_else(|| Error::Encode(format!("unknown worker {id}")))?],
                None => (0..nw).collect(),
            };
            for w in scope {
                let m = big_m.m[w];
                for &u in before.iter().filter(|&&u| graph.is_compatible(w, u)) {
                    for &v in after.iter().filter(|&&v| graph.is_compatible(w, v)) {
                        b.row(
                            Family::Order,
                            format!("co{k}_{}_{}_{}", lab(u), lab(v), wid(w)),
                            vec![(1.0, VarRef::P(u, w)), (-1.0, VarRef::P(v, w)), (m, VarRef::YC(u, w)), (m, VarRef::YC(v, w))],
                            Sense::Le,
                            2.0 * m,
                        )?;
                    }
                }
            }
        }
    }

    // Partial costs
    for &mu in &tracked {
        let waits = Some(mu) == time && opts.waiting;
        let cname = sanitize(graph.cost_types[mu].as_str());
        for (w, gw) in graph.workers.iter().enumerate() {
            let o = big_m.o[&(mu, w)];
            let f = |v: VertexId| VarRef::F(mu, v, w);
            for e in graph.worker_edges(w) {
                let edge = &graph.edges[e];
                if edge.from == gw.base || edge.to == gw.base {
                    continue;
                }
                let (u, v) = (edge.from, edge.to);
                b.row(
                    Family::MfeStep,
                    format!("mfe_{cname}_{}_{}_{}", lab(u), lab(v), wid(w)),
                    vec![(1.0, f(u)), (-1.0, f(v)), (o, z(e))],
                    Sense::Le,
                    o - edge.omega(mu),
                )?;
            }
            for &u in &gw.compatible {
                b.row(
                    Family::MfeVisited,
                    format!("mfev_{cname}_{}_{}", lab(u), wid(w)),
                    vec![(1.0, f(u)), (-o, VarRef::YC(u, w))],
                    Sense::Le,
                    0.0,
                )?;
            }
            for &e in graph.out_edges(w, gw.base) {
                let u = graph.edges[e].to;
                let om = graph.edges[e].omega(mu);
                let name = format!("mfef_{cname}_{}_{}", lab(u), wid(w));
                if waits {
                    let wb = big_m.wait_bound;
                    b.row(Family::MfeFirst, name, vec![(om + wb, z(e)), (1.0, VarRef::WP(w)), (-1.0, f(u))], Sense::Le, wb)?;
                } else {
                    b.row(Family::MfeFirst, name, vec![(om, z(e)), (-1.0, f(u))], Sense::Le, 0.0)?;
                }
            }
            let route: Vec<(f64, VarRef)> = graph
                .worker_edges(w)
                .filter(|&e| graph.edges[e].to != gw.base)
                .map(|e| (-graph.edges[e].omega(mu), z(e)))
                .collect();
            for &u in &gw.compatible {
                let mut terms = vec![(1.0, f(u))];
                terms.extend(route.iter().copied());
                if waits {
                    terms.push((-1.0, VarRef::WP(w)));
                }
                b.row(Family::MfeCap, format!("mfec_{cname}_{}_{}", lab(u), wid(w)), terms, Sense::Le, 0.0)?;
            }
        }
    }

    // Precedence and windows on task-level time sums
    let completion = |task: &[VertexId]| -> Vec<(f64, VarRef)> {
        let t = time.expect("time tracked");
        let mut terms = Vec::new();
        for w in 0..nw {
            for &v in task.iter().filter(|&&v| graph.is_compatible(w, v)) {
                terms.push((1.0, VarRef::F(t, v, w)));
            }
        }
        terms
    };
    let start = |task: &[VertexId]| -> Vec<(f64, VarRef)> {
        let t = time.expect("time tracked");
        let mut terms = Vec::new();
        for w in 0..nw {
            for &v in task.iter().filter(|&&v| graph.is_compatible(w, v)) {
                terms.push((1.0, VarRef::F(t, v, w)));
                terms.push((-graph.execution(w, v, t), VarRef::YC(v, w)));
            }
        }
        terms
    };
    for p in &opts.precedence {
        let before = task_vertices(graph, &p.before)?;
        let after = task_vertices(graph, &p.after)?;
        let mut terms = completion(&before);
        terms.extend(start(&after).into_iter().map(|(a, v)| (-a, v)));
        b.row(Family::Precedence, format!("cp_{}_{}", p.before, p.after), terms, Sense::Le, 0.0)?;
    }
    for tw in &opts.windows {
        let vs = task_vertices(graph, &tw.task)?;
        b.row(Family::TimeWindow, format!("tw_start_{}", tw.task), start(&vs), Sense::Ge, tw.earliest)?;
        b.row(Family::TimeWindow, format!("tw_end_{}", tw.task), completion(&vs), Sense::Le, tw.latest)?;
    }

    // Route totals
    let route_time = |w: WorkerId| -> Vec<(f64, VarRef)> {
        let t = time.expect("time present");
        let mut terms: Vec<(f64, VarRef)> = graph.worker_edges(w).map(|e| (graph.edges[e].omega(t), z(e))).collect();
        if opts.waiting {
            terms.push((1.0, VarRef::WP(w)));
        }
        terms
    };
    let mut objective = Vec::new();
    match opts.objective {
        Objective::Mtm => {
            for w in 0..nw {
                let mut terms = route_time(w);
                terms.push((-1.0, VarRef::MSigma));
                b.row(Family::MinMax, format!("mtm_{}", wid(w)), terms, Sense::Le, 0.0)?;
            }
            objective.push((1.0, VarRef::MSigma));
        }
        Objective::TotalTime => {
            for w in 0..nw {
                objective.extend(route_time(w).into_iter().filter(|t| t.0 != 0.0));
            }
        }
    }
    if opts.energy_budget {
        let en = energy.expect("checked above");
        for w in 0..nw {
            let terms = graph.worker_edges(w).map(|e| (graph.edges[e].omega(en), z(e))).collect();
            b.row(Family::Energy, format!("energy_{}", wid(w)), terms, Sense::Le, 1.0)?;
        }
    }

    Ok(MilpModel {
        options: opts.clone(),
        variables: b.variables,
        constraints: b.constraints,
        objective,
        big_m,
        time,
        tracked,
        index: b.index,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Edges leaving the set.
    Out,
    /// Edges entering the set.
    In,
}

/// Sum of `w`'s edge values crossing the boundary of `set` in `dir`.
/// `z` is indexed by edge id.
pub fn divergence(graph: &MultiGraph, z: &[f64], w: WorkerId, set: &BTreeSet<VertexId>, dir: Direction) -> f64 {
    graph
        .worker_edges(w)
        .filter(|&e| {
            let edge = &graph.edges[e];
            let (a, b) = (set.contains(&edge.from), set.contains(&edge.to));
            match dir {
                Direction::Out => a && !b,
                Direction::In => !a && b,
            }
        })
        .map(|e| z[e])
        .sum()
}

/// Sum of `w`'s edge values with both ends in `set`.
pub fn internal_flow(graph: &MultiGraph, z: &[f64], w: WorkerId, set: &BTreeSet<VertexId>) -> f64 {
    graph
        .worker_edges(w)
        .filter(|&e| set.contains(&graph.edges[e].from) && set.contains(&graph.edges[e].to))
        .map(|e| z[e])
        .sum()
}

/// Subtour cut: at most |Q| - 1 of `w`'s edges inside `q`.
pub fn make_dfj_cut(graph: &MultiGraph, w: WorkerId, q: &BTreeSet<VertexId>) -> Result<LinearConstraint> {
    if w >= graph.num_workers() {
        return Err(Error::Cut(format!("unknown worker index {w}")));
    }
    if q.contains(&graph.workers[w].base) {
        return Err(Error::Cut("the set contains the worker's base".into()));
    }
    if q.len() < 2 {
        return Err(Error::Cut(format!("the set has {} vertices, at least 2 are needed", q.len())));
    }
    if let Some(&v) = q.iter().find(|&&v| v >= graph.num_vertices()) {
        return Err(Error::Cut(format!("unknown vertex {v}")));
    }
    let terms = graph
        .worker_edges(w)
        .filter(|&e| q.contains(&graph.edges[e].from) && q.contains(&graph.edges[e].to))
        .map(|e| (1.0, VarRef::Z(e)))
        .collect();
    let ids: Vec<String> = q.iter().map(|v| v.to_string()).collect();
    Ok(LinearConstraint {
        family: Family::Subtour,
        name: format!("dfj_{}_{}", sanitize(&graph.workers[w].id), ids.join("_")),
        terms,
        sense: Sense::Le,
        rhs: q.len() as f64 - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, CostPair, Vertex, Weights};
    use crate::model::*;

    fn unit(_: &Worker, _: &Vertex, _: &Vertex) -> Result<Weights> {
        Ok([(CostType::time(), CostPair::new(1.0, 0.0))].into())
    }

    fn two_tasks() -> ProblemInstance {
        let mut inst = crate::instances::build_guitar();
        inst.tasks.truncate(2);
        inst.precedence.clear();
        inst.workers.truncate(1);
        inst.workers[0].compatibility.retain(|a| a.task == "T1" || a.task == "T2");
        inst
    }

    #[test]
    fn one_worker_two_tasks_mtz_counts() {
        let g = build_graph(&two_tasks(), &unit).unwrap();
        let opts = EncodeOptions { sec: SecMode::Mtz, ..Default::default() };
        let m = encode(&g, &opts).unwrap();
        assert_eq!(m.variables.len(), 12);
        assert_eq!(m.count_vars(|v| matches!(v, VarRef::Z(_))), 6);
        assert_eq!(m.count_vars(|v| matches!(v, VarRef::P(..))), 2);
        assert_eq!(m.count(Family::Bases), 2);
        assert_eq!(m.count(Family::TaskCompletion), 4);
        assert_eq!(m.count(Family::VertexDegree), 2);
        assert_eq!(m.count(Family::MtzStep), 2);
        assert_eq!(m.count(Family::MtzVisited), 2);
        assert_eq!(m.count(Family::MtzFirst), 2);
        assert_eq!(m.count(Family::MinMax), 1);
        assert_eq!(m.constraints.len(), 15);
    }

    #[test]
    fn names_follow_the_scheme() {
        let g = build_graph(&two_tasks(), &unit).unwrap();
        let opts = EncodeOptions { sec: SecMode::Mtz, waiting: true, ..Default::default() };
        let m = encode(&g, &opts).unwrap();
        let names: Vec<&str> = m.variables.iter().map(|d| d.name.as_str()).collect();
        for n in ["z_base_T1.A_w_a", "z_T2.A_base_w_a", "yb_w_a", "yc_T1.A_w_a", "p_T2.A_w_a", "f_time_T1.A_w_a", "msigma", "wp_w_a"] {
            assert!(names.contains(&n), "{n} missing from {names:?}");
        }
    }

    #[test]
    fn waiting_shifts_first_leg() {
        let g = build_graph(&two_tasks(), &unit).unwrap();
        let opts = EncodeOptions { waiting: true, ..Default::default() };
        let m = encode(&g, &opts).unwrap();
        let first: Vec<&LinearConstraint> = m.constraints.iter().filter(|c| c.family == Family::MfeFirst).collect();
        assert_eq!(first.len(), 2);
        for c in first {
            assert!(c.terms.iter().any(|t| t.1 == VarRef::WP(0) && t.0 == 1.0));
            assert_eq!(c.rhs, m.big_m.wait_bound);
        }
        let t = m.time.unwrap();
        assert!(m.big_m.o[&(t, 0)] > g.layer_total(0, t) + m.big_m.wait_bound);
    }

    #[test]
    fn unreachable_mandatory_task_fails() {
        let inst = two_tasks();
        let g = build_graph(&inst, &unit).unwrap();
        // a filter that drops every edge into T2
        struct NoT2;
        impl crate::graph::EdgeFilter for NoT2 {
            fn admits(&self, _: &Worker, _: &Vertex, to: &Vertex) -> bool {
                to.label != "T2.A"
            }
        }
        let g2 = crate::graph::build_graph_filtered(&inst, &unit, &NoT2).unwrap();
        assert!(encode(&g, &EncodeOptions::default()).is_ok());
        assert!(matches!(encode(&g2, &EncodeOptions::default()), Err(Error::Encode(_))));
    }

    #[test]
    fn divergence_and_cuts() {
        let g = build_graph(&two_tasks(), &unit).unwrap();
        let all: BTreeSet<VertexId> = (0..g.num_vertices()).collect();
        // tour base -> T1 -> T2 -> base
        let mut z = vec![0.0; g.edges.len()];
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            z[g.edge(0, a, b).unwrap()] = 1.0;
        }
        assert_eq!(divergence(&g, &z, 0, &all, Direction::Out), 0.0);
        assert_eq!(divergence(&g, &z, 0, &all, Direction::In), 0.0);
        assert_eq!(internal_flow(&g, &z, 0, &all), 3.0);
        let base: BTreeSet<VertexId> = [0].into();
        assert_eq!(divergence(&g, &z, 0, &base, Direction::Out), 1.0);

        let q: BTreeSet<VertexId> = [1, 2].into();
        let cut = make_dfj_cut(&g, 0, &q).unwrap();
        assert_eq!(cut.terms.len(), 2);
        assert_eq!(cut.rhs, 1.0);
        assert!(make_dfj_cut(&g, 0, &[0, 1].into()).is_err());
        assert!(make_dfj_cut(&g, 0, &[1].into()).is_err());
    }

    #[test]
    fn empty_task_list_is_encodable() {
        let mut inst = two_tasks();
        inst.tasks.clear();
        inst.workers[0].compatibility.clear();
        if let CostSpec::Table { tables } = &mut inst.costs {
            tables[0].execution.clear();
        }
        let g = build_graph(&inst, &unit).unwrap();
        let m = encode(&g, &EncodeOptions::default()).unwrap();
        assert_eq!(m.count_vars(|v| matches!(v, VarRef::Z(_))), 0);
        assert!(m.var_index(VarRef::YB(0)).is_some());
    }
}
