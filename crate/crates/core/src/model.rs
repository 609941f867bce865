//! Domain vocabulary: workers, tasks, approaches, bases and the constraints
//! a caller may attach to an instance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instances::grid::PowerGrid;

/// Symbolic cost tag. `time` is in seconds, `energy` is a fraction of a
/// worker's budget; any other label is allowed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostType(pub String);

impl CostType {
    pub fn new(label: impl Into<String>) -> Self {
        CostType(label.into())
    }

    pub fn time() -> Self {
        CostType("time".into())
    }

    pub fn energy() -> Self {
        CostType("energy".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CostType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A (task, approach) pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApproachRef {
    pub task: String,
    pub approach: String,
}

impl ApproachRef {
    pub fn new(task: impl Into<String>, approach: impl Into<String>) -> Self {
        ApproachRef { task: task.into(), approach: approach.into() }
    }
}

impl fmt::Display for ApproachRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.task, self.approach)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    pub id: String,
    /// Location label used by table cost specs. Defaults to `task.approach`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    /// Planar position in meters, used by Euclidean cost specs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
}

impl Approach {
    pub fn named(id: impl Into<String>) -> Self {
        Approach { id: id.into(), site: None, position: None }
    }
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub approaches: Vec<Approach>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub mandatory: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: String,
    pub base: String,
    pub compatibility: BTreeSet<ApproachRef>,
    /// Speed-like parameters read by cost models (for example `speed`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl Worker {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn is_compatible(&self, s: &ApproachRef) -> bool {
        self.compatibility.contains(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Base {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
}

/// Within the route of `worker` (or of every worker when `None`), every
/// approach of `before` is visited earlier than every approach of `after`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderPair {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker: Option<String>,
    pub before: String,
    pub after: String,
}

/// Team-wide: `before` completes no later than `after` starts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Precedence {
    pub before: String,
    pub after: String,
}

/// Service of `task` starts at or after `earliest` and completes at or before `latest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub task: String,
    pub earliest: f64,
    pub latest: f64,
}

/// Per (worker, task, approach) execution cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionCost {
    pub worker: String,
    pub task: String,
    pub approach: String,
    pub value: f64,
}

/// Transition cost between two sites. `"*"` matches any site; a missing
/// worker matches every worker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteTransition {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker: Option<String>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub cost_type: CostType,
    /// Transition between distinct sites when no entry matches.
    pub default_transition: f64,
    /// Transition between two vertices that share a site when no entry matches.
    #[serde(default)]
    pub same_site_transition: f64,
    /// First match wins.
    #[serde(default)]
    pub transitions: Vec<SiteTransition>,
    /// Missing entries cost 0.
    #[serde(default)]
    pub execution: Vec<ExecutionCost>,
}

/// How distances are measured between positions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceRule {
    /// Plain Euclidean distance.
    #[default]
    Exact,
    /// Nearest-integer Euclidean distance (TSPLIB `EUC_2D`).
    Rounded,
    /// TSPLIB pseudo-Euclidean `ATT` distance.
    Att,
}

/// Where edge weights come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// Explicit site-based tables, one per cost type.
    Table { tables: Vec<CostTable> },
    /// Straight-line travel between positions: `time = distance / speed`
    /// with the worker's `speed` parameter. Workers with an `energy_rate`
    /// parameter also get `energy = energy_rate * time`.
    Euclidean {
        #[serde(default)]
        distance: DistanceRule,
        #[serde(default)]
        execution: Vec<ExecutionCost>,
    },
    /// Power-grid inspection geometry.
    Grid { grid: PowerGrid },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub name: String,
    pub cost_types: Vec<CostType>,
    pub bases: Vec<Base>,
    pub tasks: Vec<Task>,
    pub workers: Vec<Worker>,
    #[serde(default)]
    pub order: Vec<OrderPair>,
    #[serde(default)]
    pub precedence: Vec<Precedence>,
    #[serde(default)]
    pub windows: Vec<TimeWindow>,
    #[serde(default)]
    pub waiting: bool,
    #[serde(default)]
    pub energy_budget: bool,
    pub costs: CostSpec,
    /// Seed used to generate the instance, when it was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn worker(&self, id: &str) -> Option<&Worker> {
        self.workers.iter().find(|w| w.id == id)
    }

    pub fn base(&self, id: &str) -> Option<&Base> {
        self.bases.iter().find(|b| b.id == id)
    }

    /// Every (task, approach) pair, in task order then approach order.
    pub fn all_approaches(&self) -> BTreeSet<ApproachRef> {
        self.tasks
            .iter()
            .flat_map(|t| t.approaches.iter().map(move |a| ApproachRef::new(&t.id, &a.id)))
            .collect()
    }

    pub fn has_cost_type(&self, mu: &CostType) -> bool {
        self.cost_types.contains(mu)
    }
}

/// The `w`-compatible restriction of `s`.
pub fn restrict(s: &BTreeSet<ApproachRef>, w: &Worker) -> BTreeSet<ApproachRef> {
    s.iter().filter(|a| w.is_compatible(a)).cloned().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Defect {
    NoBases,
    DuplicateId { kind: &'static str, id: String },
    DuplicateCostType(String),
    BaseTaskClash(String),
    NoApproaches(String),
    DanglingReference { context: String, id: String },
    UncoverableTask(String),
    PrecedenceCycle(Vec<String>),
    EmptyTimeWindow { task: String, earliest: f64, latest: f64 },
    NegativeValue { context: String, value: f64 },
    BadParameter { worker: String, param: &'static str },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::NoBases => write!(f, "no bases"),
            Defect::DuplicateId { kind, id } => write!(f, "duplicate {kind} id {id}"),
            Defect::DuplicateCostType(c) => write!(f, "duplicate cost type {c}"),
            Defect::BaseTaskClash(id) => write!(f, "id {id} names both a base and a task"),
            Defect::NoApproaches(t) => write!(f, "task {t} has no approaches"),
            Defect::DanglingReference { context, id } => write!(f, "dangling id {id} in {context}"),
            Defect::UncoverableTask(t) => write!(f, "mandatory task {t} is compatible with no worker"),
            Defect::PrecedenceCycle(c) => write!(f, "precedence cycle {}", c.join(" -> ")),
            Defect::EmptyTimeWindow { task, earliest, latest } => {
                write!(f, "empty time window on {task}: [{earliest}, {latest}]")
            }
            Defect::NegativeValue { context, value } => write!(f, "negative value {value} in {context}"),
            Defect::BadParameter { worker, param } => write!(f, "worker {worker} lacks a positive {param}"),
        }
    }
}

/// Collects every structural defect of `inst`. An empty list means the
/// instance is well formed.
pub fn validate_instance(inst: &ProblemInstance) -> Vec<Defect> {
    let mut out = Vec::new();
    if inst.bases.is_empty() {
        out.push(Defect::NoBases);
    }
    let mut seen = BTreeSet::new();
    for c in &inst.cost_types {
        if !seen.insert(c.as_str()) {
            out.push(Defect::DuplicateCostType(c.0.clone()));
        }
    }
    let bases = unique_ids(inst.bases.iter().map(|b| b.id.as_str()), "base", &mut out);
    let tasks = unique_ids(inst.tasks.iter().map(|t| t.id.as_str()), "task", &mut out);
    unique_ids(inst.workers.iter().map(|w| w.id.as_str()), "worker", &mut out);
    for id in bases.intersection(&tasks) {
        out.push(Defect::BaseTaskClash(id.to_string()));
    }
    for t in &inst.tasks {
        if t.approaches.is_empty() {
            out.push(Defect::NoApproaches(t.id.clone()));
        }
        unique_ids(t.approaches.iter().map(|a| a.id.as_str()), "approach", &mut out);
    }

    let approaches = inst.all_approaches();
    for w in &inst.workers {
        if !bases.contains(w.base.as_str()) {
            out.push(Defect::DanglingReference { context: format!("worker {}", w.id), id: w.base.clone() });
        }
        for a in &w.compatibility {
            if !approaches.contains(a) {
                out.push(Defect::DanglingReference { context: format!("compatibility of {}", w.id), id: a.to_string() });
            }
        }
    }
    for t in inst.tasks.iter().filter(|t| t.mandatory) {
        let covered = inst
            .workers
            .iter()
            .any(|w| t.approaches.iter().any(|a| w.is_compatible(&ApproachRef::new(&t.id, &a.id))));
        if !covered {
            out.push(Defect::UncoverableTask(t.id.clone()));
        }
    }

    let mut dangling_task = |context: String, id: &str| {
        if !tasks.contains(id) {
            out.push(Defect::DanglingReference { context, id: id.to_string() });
        }
    };
    for o in &inst.order {
        dangling_task("order pair".into(), &o.before);
        dangling_task("order pair".into(), &o.after);
    }
    for p in &inst.precedence {
        dangling_task("precedence".into(), &p.before);
        dangling_task("precedence".into(), &p.after);
    }
    for tw in &inst.windows {
        dangling_task("time window".into(), &tw.task);
    }
    for o in &inst.order {
        if let Some(w) = &o.worker {
            if inst.worker(w).is_none() {
                out.push(Defect::DanglingReference { context: "order pair".into(), id: w.clone() });
            }
        }
    }
    for tw in &inst.windows {
        if tw.earliest > tw.latest {
            out.push(Defect::EmptyTimeWindow { task: tw.task.clone(), earliest: tw.earliest, latest: tw.latest });
        }
    }
    if let Some(cycle) = precedence_cycle(&inst.precedence) {
        out.push(Defect::PrecedenceCycle(cycle));
    }
    check_cost_spec(inst, &mut out);
    out
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>, kind: &'static str, out: &mut Vec<Defect>) -> BTreeSet<&'a str> {
    let mut set = BTreeSet::new();
    for id in ids {
        if !set.insert(id) {
            out.push(Defect::DuplicateId { kind, id: id.to_string() });
        }
    }
    set
}

fn check_cost_spec(inst: &ProblemInstance, out: &mut Vec<Defect>) {
    let neg = |out: &mut Vec<Defect>, context: String, value: f64| {
        if value < 0.0 || !value.is_finite() {
            out.push(Defect::NegativeValue { context, value });
        }
    };
    match &inst.costs {
        CostSpec::Table { tables } => {
            for t in tables {
                neg(out, format!("{} default transition", t.cost_type), t.default_transition);
                neg(out, format!("{} same-site transition", t.cost_type), t.same_site_transition);
                for tr in &t.transitions {
                    neg(out, format!("{} transition {}->{}", t.cost_type, tr.from, tr.to), tr.value);
                }
                for e in &t.execution {
                    neg(out, format!("{} execution {}.{} by {}", t.cost_type, e.task, e.approach, e.worker), e.value);
                }
            }
        }
        CostSpec::Euclidean { execution, .. } => {
            for e in execution {
                neg(out, format!("execution {}.{} by {}", e.task, e.approach, e.worker), e.value);
            }
            for w in &inst.workers {
                if !w.param("speed").is_some_and(|s| s > 0.0 && s.is_finite()) {
                    out.push(Defect::BadParameter { worker: w.id.clone(), param: "speed" });
                }
            }
        }
        CostSpec::Grid { .. } => {}
    }
}

/// Returns one cycle of the precedence relation, if any.
pub fn precedence_cycle(pairs: &[Precedence]) -> Option<Vec<String>> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for p in pairs {
        succ.entry(p.before.as_str()).or_default().push(p.after.as_str());
        succ.entry(p.after.as_str()).or_default();
    }
    // 0 unvisited, 1 on stack, 2 done
    let mut state: BTreeMap<&str, u8> = succ.keys().map(|&k| (k, 0)).collect();
    let mut stack: Vec<&str> = Vec::new();

    fn dfs<'a>(
        u: &'a str,
        succ: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        state.insert(u, 1);
        stack.push(u);
        for &v in &succ[u] {
            match state[v] {
                1 => {
                    let start = stack.iter().position(|&s| s == v).unwrap();
                    let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(v.to_string());
                    return Some(cycle);
                }
                0 => {
                    if let Some(c) = dfs(v, succ, state, stack) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        stack.pop();
        state.insert(u, 2);
        None
    }

    let keys: Vec<&str> = succ.keys().copied().collect();
    for k in keys {
        if state[k] == 0 {
            if let Some(c) = dfs(k, &succ, &mut state, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worker(id: &str, pairs: &[(&str, &str)]) -> Worker {
        Worker {
            id: id.into(),
            base: "b".into(),
            compatibility: pairs.iter().map(|(t, a)| ApproachRef::new(*t, *a)).collect(),
            params: BTreeMap::new(),
        }
    }

    fn tiny() -> ProblemInstance {
        ProblemInstance {
            name: "tiny".into(),
            cost_types: vec![CostType::time()],
            bases: vec![Base { id: "b".into(), site: None, position: None }],
            tasks: vec![
                Task { id: "t1".into(), approaches: vec![Approach::named("a")], mandatory: true },
                Task { id: "t2".into(), approaches: vec![Approach::named("a")], mandatory: true },
            ],
            workers: vec![worker("w", &[("t1", "a"), ("t2", "a")])],
            order: vec![],
            precedence: vec![],
            windows: vec![],
            waiting: false,
            energy_budget: false,
            costs: CostSpec::Table {
                tables: vec![CostTable {
                    cost_type: CostType::time(),
                    default_transition: 1.0,
                    same_site_transition: 0.0,
                    transitions: vec![],
                    execution: vec![],
                }],
            },
            seed: None,
        }
    }

    #[test]
    fn restrict_of_empty_is_empty() {
        let w = worker("w", &[("t1", "a")]);
        assert!(restrict(&BTreeSet::new(), &w).is_empty());
    }

    #[test]
    fn restrict_filters_and_is_idempotent() {
        let w = worker("w", &[("t1", "a")]);
        let s: BTreeSet<_> = [ApproachRef::new("t1", "a"), ApproachRef::new("t2", "a")].into();
        let r = restrict(&s, &w);
        assert_eq!(r, [ApproachRef::new("t1", "a")].into());
        assert_eq!(restrict(&r, &w), r);
    }

    #[test]
    fn well_formed_instance_has_no_defects() {
        assert!(validate_instance(&tiny()).is_empty());
    }

    #[test]
    fn two_cycle_is_reported() {
        let mut inst = tiny();
        inst.precedence = vec![
            Precedence { before: "t1".into(), after: "t2".into() },
            Precedence { before: "t2".into(), after: "t1".into() },
        ];
        let d = validate_instance(&inst);
        assert!(d.iter().any(|d| d.to_string().starts_with("precedence cycle")), "{d:?}");
    }

    #[test]
    fn reversed_window_is_reported() {
        let mut inst = tiny();
        inst.windows = vec![TimeWindow { task: "t1".into(), earliest: 10.0, latest: 5.0 }];
        let d = validate_instance(&inst);
        assert!(d.iter().any(|d| d.to_string().starts_with("empty time window")), "{d:?}");
    }

    #[test]
    fn dangling_and_uncoverable() {
        let mut inst = tiny();
        inst.workers[0].compatibility.remove(&ApproachRef::new("t2", "a"));
        inst.workers[0].compatibility.insert(ApproachRef::new("t9", "a"));
        inst.workers[0].base = "nowhere".into();
        let d = validate_instance(&inst);
        assert!(d.contains(&Defect::UncoverableTask("t2".into())));
        assert!(d.iter().filter(|d| matches!(d, Defect::DanglingReference { .. })).count() == 2, "{d:?}");
    }

    #[test]
    fn non_mandatory_task_may_be_uncovered() {
        let mut inst = tiny();
        inst.tasks[1].mandatory = false;
        inst.workers[0].compatibility.remove(&ApproachRef::new("t2", "a"));
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn longer_cycle_is_named() {
        let p = |a: &str, b: &str| Precedence { before: a.into(), after: b.into() };
        let c = precedence_cycle(&[p("a", "b"), p("b", "c"), p("c", "a"), p("x", "a")]).unwrap();
        assert_eq!(c.first(), c.last());
        assert_eq!(c.len(), 4);
        assert!(precedence_cycle(&[p("a", "b"), p("b", "c"), p("a", "c")]).is_none());
    }
}
