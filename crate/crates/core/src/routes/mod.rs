//! Routes read back from a solution, their validation, and an exhaustive
//! reference solver for small instances.

mod brute;
mod validate;

pub use brute::{brute_force, BruteForce, MAX_BRUTE_TASKS, MAX_BRUTE_WORKERS};
pub use validate::{validate_plan, ValidationFamily, ValidationReport, Violation};

use serde::{Deserialize, Serialize};

use crate::encoder::{MilpModel, Objective, VarRef};
use crate::error::{Error, Result};
use crate::graph::{MultiGraph, VertexId, WorkerId};
use crate::model::CostType;

/// Solution values below this are read as 0.
const ACTIVE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    /// Vertex label: a base id or `task.approach`.
    pub vertex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<String>,
    pub start: f64,
    pub completion: f64,
    /// Energy spent on arrival, as a fraction of the budget.
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerPlan {
    pub worker: String,
    pub active: bool,
    /// Base, tasks, base. Empty when inactive.
    pub route: Vec<Stop>,
    /// Delay before leaving the base.
    pub wait: f64,
    pub time: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub instance: String,
    pub objective_kind: Objective,
    pub objective: f64,
    pub workers: Vec<WorkerPlan>,
}

impl Plan {
    pub fn worker(&self, id: &str) -> Option<&WorkerPlan> {
        self.workers.iter().find(|w| w.worker == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plans always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Plan> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn time_index(graph: &MultiGraph) -> Result<usize> {
    graph.cost_index(&CostType::time()).ok_or_else(|| Error::Extraction("the graph has no time cost type".into()))
}

/// Replays a closed route of worker `w`. Fails on a missing edge.
pub(crate) fn simulate(graph: &MultiGraph, w: WorkerId, seq: &[VertexId], wait: f64) -> std::result::Result<WorkerPlan, String> {
    let t_idx = graph.cost_index(&CostType::time()).ok_or("the graph has no time cost type")?;
    let e_idx = graph.cost_index(&CostType::energy());
    let gw = &graph.workers[w];
    let stop = |v: VertexId, start: f64, completion: f64, energy: f64| {
        let a = graph.vertices[v].approach();
        Stop {
            vertex: graph.vertices[v].label.clone(),
            task: a.map(|a| a.task.clone()),
            approach: a.map(|a| a.approach.clone()),
            start,
            completion,
            energy,
        }
    };
    if seq.is_empty() {
        return Ok(WorkerPlan { worker: gw.id.clone(), active: false, route: vec![], wait: 0.0, time: 0.0, energy: 0.0 });
    }
    let mut route = vec![stop(seq[0], 0.0, wait, 0.0)];
    let (mut t, mut en) = (wait, 0.0);
    for pair in seq.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let e = graph.edge(w, u, v).ok_or_else(|| {
            format!("{} has no edge {} -> {}", gw.id, graph.vertices[u].label, graph.vertices[v].label)
        })?;
        t += graph.edges[e].omega(t_idx);
        if let Some(ei) = e_idx {
            en += graph.edges[e].omega(ei);
        }
        route.push(stop(v, t - graph.execution(w, v, t_idx), t, en));
    }
    Ok(WorkerPlan { worker: gw.id.clone(), active: true, route, wait, time: t, energy: en })
}

pub(crate) fn objective_of(kind: Objective, workers: &[WorkerPlan]) -> f64 {
    let times = workers.iter().filter(|w| w.active).map(|w| w.time);
    match kind {
        Objective::Mtm => times.fold(0.0, f64::max),
        Objective::TotalTime => times.sum(),
    }
}

/// Builds a plan from closed vertex sequences, one per worker (empty when
/// inactive), and per-worker waits.
pub fn plan_from_routes(name: &str, graph: &MultiGraph, kind: Objective, routes: &[(Vec<VertexId>, f64)]) -> Result<Plan> {
    time_index(graph)?;
    let workers = routes
        .iter()
        .enumerate()
        .map(|(w, (seq, wait))| simulate(graph, w, seq, *wait).map_err(Error::Extraction))
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan { instance: name.to_string(), objective_kind: kind, objective: objective_of(kind, &workers), workers })
}

/// Follows each active worker's edges from its base. Fails when the edge
/// values branch or leave a cycle detached from the base.
pub fn extract_routes(graph: &MultiGraph, model: &MilpModel, x: &[f64]) -> Result<Vec<(Vec<VertexId>, f64)>> {
    let mut out = Vec::new();
    for (w, gw) in graph.workers.iter().enumerate() {
        let on: Vec<usize> = graph.worker_edges(w).filter(|&e| model.value(x, VarRef::Z(e)) > ACTIVE).collect();
        let wait = model.value(x, VarRef::WP(w));
        let wait = if wait.abs() < 1e-9 { 0.0 } else { wait };
        if model.value(x, VarRef::YB(w)) <= ACTIVE {
            if !on.is_empty() {
                return Err(Error::Extraction(format!("inactive worker {} uses {} edges", gw.id, on.len())));
            }
            out.push((vec![], 0.0));
            continue;
        }
        let mut seq = vec![gw.base];
        let mut used = 0;
        loop {
            let cur = *seq.last().unwrap();
            let next: Vec<usize> = graph.out_edges(w, cur).iter().copied().filter(|e| on.contains(e)).collect();
            if next.len() != 1 {
                return Err(Error::Extraction(format!(
                    "worker {} leaves {} on {} edges",
                    gw.id,
                    graph.vertices[cur].label,
                    next.len()
                )));
            }
            used += 1;
            seq.push(graph.edges[next[0]].to);
            if graph.edges[next[0]].to == gw.base {
                break;
            }
            if seq.len() > graph.num_vertices() + 1 {
                return Err(Error::Extraction(format!("worker {} route does not return to its base", gw.id)));
            }
        }
        if used != on.len() {
            return Err(Error::Extraction(format!("worker {} has a subtour detached from its base", gw.id)));
        }
        out.push((seq, wait));
    }
    Ok(out)
}

/// The plan encoded by solution `x`.
pub fn extract_plan(name: &str, graph: &MultiGraph, model: &MilpModel, x: &[f64]) -> Result<Plan> {
    let routes = extract_routes(graph, model, x)?;
    plan_from_routes(name, graph, model.options.objective, &routes)
}
