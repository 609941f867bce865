//! The weighted directed multigraph: one vertex per base and per task
//! approach, one edge layer per worker.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{ApproachRef, CostType, ProblemInstance, Worker};

pub type VertexId = usize;
pub type EdgeId = usize;
pub type WorkerId = usize;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKind {
    Base(String),
    Approach(ApproachRef),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub kind: VertexKind,
    /// Base id, or `task.approach`.
    pub label: String,
}

impl Vertex {
    pub fn is_base(&self) -> bool {
        matches!(self.kind, VertexKind::Base(_))
    }

    pub fn approach(&self) -> Option<&ApproachRef> {
        match &self.kind {
            VertexKind::Approach(a) => Some(a),
            VertexKind::Base(_) => None,
        }
    }
}

/// A weight split into its transition and execution parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostPair {
    pub transition: f64,
    pub execution: f64,
}

impl CostPair {
    pub fn new(transition: f64, execution: f64) -> Self {
        CostPair { transition, execution }
    }

    pub fn total(&self) -> f64 {
        self.transition + self.execution
    }
}

pub type Weights = BTreeMap<CostType, CostPair>;

/// Computes the weights of one legal edge.
pub trait Weigher {
    fn weigh(&self, worker: &Worker, from: &Vertex, to: &Vertex) -> Result<Weights>;
}

impl<F> Weigher for F
where
    F: Fn(&Worker, &Vertex, &Vertex) -> Result<Weights>,
{
    fn weigh(&self, worker: &Worker, from: &Vertex, to: &Vertex) -> Result<Weights> {
        self(worker, from, to)
    }
}

/// Extra connection rule; edges it rejects are not created.
pub trait EdgeFilter {
    fn admits(&self, worker: &Worker, from: &Vertex, to: &Vertex) -> bool;
}

pub struct AdmitAll;

impl EdgeFilter for AdmitAll {
    fn admits(&self, _: &Worker, _: &Vertex, _: &Vertex) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub worker: WorkerId,
    /// Indexed like `MultiGraph::cost_types`.
    pub weights: Vec<CostPair>,
}

impl Edge {
    /// Ω for the cost type at index `mu`.
    pub fn omega(&self, mu: usize) -> f64 {
        self.weights[mu].total()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphTask {
    pub id: String,
    pub mandatory: bool,
    pub vertices: Vec<VertexId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphWorker {
    pub id: String,
    pub base: VertexId,
    /// T|_w in vertex order.
    pub compatible: Vec<VertexId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiGraph {
    pub cost_types: Vec<CostType>,
    pub vertices: Vec<Vertex>,
    pub tasks: Vec<GraphTask>,
    pub workers: Vec<GraphWorker>,
    pub edges: Vec<Edge>,
    vertex_task: Vec<Option<usize>>,
    layers: Vec<BTreeMap<(VertexId, VertexId), EdgeId>>,
    out_edges: Vec<Vec<Vec<EdgeId>>>,
    in_edges: Vec<Vec<Vec<EdgeId>>>,
    /// ω per (worker, vertex), indexed like `cost_types`.
    execution: Vec<BTreeMap<VertexId, Vec<f64>>>,
}

impl MultiGraph {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn cost_index(&self, mu: &CostType) -> Option<usize> {
        self.cost_types.iter().position(|c| c == mu)
    }

    pub fn worker_index(&self, id: &str) -> Option<WorkerId> {
        self.workers.iter().position(|w| w.id == id)
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    pub fn vertex_by_label(&self, label: &str) -> Option<VertexId> {
        self.vertices.iter().position(|v| v.label == label)
    }

    /// Index into `tasks` of the task owning `v`; `None` for bases.
    pub fn task_of(&self, v: VertexId) -> Option<usize> {
        self.vertex_task[v]
    }

    pub fn edge(&self, w: WorkerId, from: VertexId, to: VertexId) -> Option<EdgeId> {
        self.layers[w].get(&(from, to)).copied()
    }

    /// δ₊ of `u` in the layer of `w`, as edge ids.
    pub fn out_edges(&self, w: WorkerId, u: VertexId) -> &[EdgeId] {
        &self.out_edges[w][u]
    }

    /// δ₋ of `u` in the layer of `w`, as edge ids.
    pub fn in_edges(&self, w: WorkerId, u: VertexId) -> &[EdgeId] {
        &self.in_edges[w][u]
    }

    pub fn worker_edges(&self, w: WorkerId) -> impl Iterator<Item = EdgeId> + '_ {
        self.layers[w].values().copied()
    }

    pub fn is_compatible(&self, w: WorkerId, v: VertexId) -> bool {
        self.execution[w].contains_key(&v)
    }

    /// ω_{v|w} for cost index `mu`; 0 for bases and incompatible vertices.
    pub fn execution(&self, w: WorkerId, v: VertexId, mu: usize) -> f64 {
        self.execution[w].get(&v).map_or(0.0, |e| e[mu])
    }

    /// Σ Ω over every edge of `w` for cost index `mu`.
    pub fn layer_total(&self, w: WorkerId, mu: usize) -> f64 {
        self.worker_edges(w).map(|e| self.edges[e].omega(mu)).sum()
    }

    pub fn edge_label(&self, e: EdgeId) -> String {
        let edge = &self.edges[e];
        format!("[{},{}]|{}", self.vertices[edge.from].label, self.vertices[edge.to].label, self.workers[edge.worker].id)
    }
}

/// Worst-case edge count under full compatibility.
pub fn edge_count_bound(n_w: u64, n: u64, n_a: u64) -> u64 {
    n_w * (2 * n * n_a + n_a * n_a * n * n.saturating_sub(1))
}

pub fn build_graph(inst: &ProblemInstance, weigher: &dyn Weigher) -> Result<MultiGraph> {
    build_graph_filtered(inst, weigher, &AdmitAll)
}

pub fn build_graph_filtered(inst: &ProblemInstance, weigher: &dyn Weigher, filter: &dyn EdgeFilter) -> Result<MultiGraph> {
    let defects = crate::model::validate_instance(inst);
    if !defects.is_empty() {
        let msg: Vec<String> = defects.iter().map(|d| d.to_string()).collect();
        return Err(Error::Instance(msg.join("; ")));
    }

    let mut vertices = Vec::new();
    let mut bases: Vec<&str> = inst.bases.iter().map(|b| b.id.as_str()).collect();
    bases.sort_unstable();
    let mut base_vertex = BTreeMap::new();
    for b in bases {
        base_vertex.insert(b, vertices.len());
        vertices.push(Vertex { kind: VertexKind::Base(b.to_string()), label: b.to_string() });
    }
    let mut sorted_tasks: Vec<_> = inst.tasks.iter().collect();
    sorted_tasks.sort_by(|a, b| a.id.cmp(&b.id));
    let mut tasks = Vec::new();
    let mut vertex_task = vec![None; vertices.len()];
    let mut approach_vertex = BTreeMap::new();
    for (ti, t) in sorted_tasks.iter().enumerate() {
        let mut vs = Vec::new();
        for a in &t.approaches {
            let r = ApproachRef::new(&t.id, &a.id);
            approach_vertex.insert(r.clone(), vertices.len());
            vs.push(vertices.len());
            vertex_task.push(Some(ti));
            vertices.push(Vertex { label: r.to_string(), kind: VertexKind::Approach(r) });
        }
        tasks.push(GraphTask { id: t.id.clone(), mandatory: t.mandatory, vertices: vs });
    }

    let mut sorted_workers: Vec<&Worker> = inst.workers.iter().collect();
    sorted_workers.sort_by(|a, b| a.id.cmp(&b.id));
    let n = vertices.len();
    let nc = inst.cost_types.len();
    let mut g = MultiGraph {
        cost_types: inst.cost_types.clone(),
        vertices,
        tasks,
        workers: Vec::new(),
        edges: Vec::new(),
        vertex_task,
        layers: Vec::new(),
        out_edges: Vec::new(),
        in_edges: Vec::new(),
        execution: Vec::new(),
    };

    for (wi, w) in sorted_workers.iter().enumerate() {
        let base = base_vertex[w.base.as_str()];
        let compatible: Vec<VertexId> = w.compatibility.iter().map(|r| approach_vertex[r]).collect::<Vec<_>>();
        let mut compatible = compatible;
        compatible.sort_unstable();
        let mut layer = BTreeMap::new();
        let mut outs = vec![Vec::new(); n];
        let mut ins = vec![Vec::new(); n];
        let mut exec: BTreeMap<VertexId, Vec<f64>> = BTreeMap::new();

        let mut nodes = vec![base];
        nodes.extend(&compatible);
        nodes.sort_unstable();
        for &u in &nodes {
            for &v in &nodes {
                if u == v {
                    continue;
                }
                let (tu, tv) = (g.vertex_task[u], g.vertex_task[v]);
                if tu.is_some() && tu == tv {
                    continue;
                }
                if !filter.admits(w, &g.vertices[u], &g.vertices[v]) {
                    continue;
                }
                let label = format!("[{},{}]|{}", g.vertices[u].label, g.vertices[v].label, w.id);
                let weights = weigher.weigh(w, &g.vertices[u], &g.vertices[v]).map_err(|e| match e {
                    Error::Cost(m) => Error::Weight { edge: label.clone(), message: m },
                    other => other,
                })?;
                let mut row = Vec::with_capacity(nc);
                for mu in &g.cost_types {
                    let pair = *weights.get(mu).ok_or_else(|| Error::Weight {
                        edge: label.clone(),
                        message: format!("no {mu} weight"),
                    })?;
                    if !pair.transition.is_finite() || !pair.execution.is_finite() {
                        return Err(Error::Weight { edge: label, message: format!("non-finite {mu} weight") });
                    }
                    if mu == &CostType::time() && (pair.transition < 0.0 || pair.execution < 0.0) {
                        return Err(Error::Weight { edge: label, message: "negative time weight".into() });
                    }
                    row.push(pair);
                }
                if !g.vertices[v].is_base() {
                    let e: Vec<f64> = row.iter().map(|p| p.execution).collect();
                    match exec.get(&v) {
                        Some(prev) if prev != &e => {
                            return Err(Error::Weight {
                                edge: label,
                                message: "execution cost differs from other edges entering the same vertex".into(),
                            })
                        }
                        _ => {
                            exec.insert(v, e);
                        }
                    }
                }
                let id = g.edges.len();
                g.edges.push(Edge { from: u, to: v, worker: wi, weights: row });
                layer.insert((u, v), id);
                outs[u].push(id);
                ins[v].push(id);
            }
        }
        // Vertices the filter cut off from every entering edge still carry ω = 0.
        for &v in &compatible {
            exec.entry(v).or_insert_with(|| vec![0.0; nc]);
        }
        g.workers.push(GraphWorker { id: w.id.clone(), base, compatible });
        g.layers.push(layer);
        g.out_edges.push(outs);
        g.in_edges.push(ins);
        g.execution.push(exec);
    }
    Ok(g)
}

/// Plain-text dump of the graph; the format is described in the README.
pub fn dump(g: &MultiGraph) -> String {
    let mut s = String::new();
    let costs: Vec<&str> = g.cost_types.iter().map(|c| c.as_str()).collect();
    let _ = writeln!(s, "cost_types {}", costs.join(" "));
    for (i, v) in g.vertices.iter().enumerate() {
        let kind = if v.is_base() { "base" } else { "approach" };
        let _ = writeln!(s, "vertex {i} {kind} {}", v.label);
    }
    for (wi, w) in g.workers.iter().enumerate() {
        let comp: Vec<String> = w.compatible.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "worker {wi} {} base {} compatible {}", w.id, w.base, comp.join(" "));
    }
    for (i, e) in g.edges.iter().enumerate() {
        let _ = write!(s, "edge {i} {} {} {}", g.workers[e.worker].id, e.from, e.to);
        for (mu, p) in g.cost_types.iter().zip(&e.weights) {
            let _ = write!(s, " {mu}={}+{}", p.transition, p.execution);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use std::collections::BTreeSet;

    fn unit(_: &Worker, _: &Vertex, _: &Vertex) -> Result<Weights> {
        Ok([(CostType::time(), CostPair::new(1.0, 0.0))].into())
    }

    fn instance(workers: &[(&str, &[(&str, &str)])], tasks: &[(&str, &[&str])]) -> ProblemInstance {
        ProblemInstance {
            name: "g".into(),
            cost_types: vec![CostType::time()],
            bases: vec![Base { id: "b".into(), site: None, position: None }],
            tasks: tasks
                .iter()
                .map(|(id, aps)| Task {
                    id: id.to_string(),
                    approaches: aps.iter().map(|a| Approach::named(*a)).collect(),
                    mandatory: true,
                })
                .collect(),
            workers: workers
                .iter()
                .map(|(id, comp)| Worker {
                    id: id.to_string(),
                    base: "b".into(),
                    compatibility: comp.iter().map(|(t, a)| ApproachRef::new(*t, *a)).collect(),
                    params: Default::default(),
                })
                .collect(),
            order: vec![],
            precedence: vec![],
            windows: vec![],
            waiting: false,
            energy_budget: false,
            costs: CostSpec::Table { tables: vec![] },
            seed: None,
        }
    }

    #[test]
    fn two_tasks_one_worker() {
        let inst = instance(&[("w", &[("t1", "a"), ("t2", "a")])], &[("t1", &["a"]), ("t2", &["a"])]);
        let g = build_graph(&inst, &unit).unwrap();
        assert_eq!(g.num_vertices(), 3);
        assert_eq!(g.edges.len(), 6);
        assert_eq!(edge_count_bound(1, 2, 1), 6);
    }

    #[test]
    fn incompatible_vertex_is_untouched() {
        let inst = instance(
            &[("w1", &[("t1", "a"), ("t2", "a")]), ("w2", &[("t1", "a")])],
            &[("t1", &["a"]), ("t2", &["a"])],
        );
        let g = build_graph(&inst, &unit).unwrap();
        let v2 = g.vertex_by_label("t2.a").unwrap();
        assert!(g.edges.iter().filter(|e| e.worker == 1).all(|e| e.from != v2 && e.to != v2));
        assert_eq!(g.worker_edges(1).count(), 2);
    }

    #[test]
    fn full_compatibility_matches_bound() {
        let tasks: &[(&str, &[&str])] = &[("t1", &["x", "y"]), ("t2", &["x", "y"]), ("t3", &["x", "y"])];
        let all: Vec<(&str, &str)> = tasks.iter().flat_map(|(t, a)| a.iter().map(move |a| (*t, *a))).collect();
        let inst = instance(&[("w1", &all), ("w2", &all)], tasks);
        let g = build_graph(&inst, &unit).unwrap();
        assert_eq!(g.edges.len() as u64, edge_count_bound(2, 3, 2));
        assert_eq!(edge_count_bound(2, 3, 2), 72);
        assert_eq!(edge_count_bound(1, 0, 1), 0);
        // same-task vertices are never joined
        for e in &g.edges {
            let (a, b) = (g.task_of(e.from), g.task_of(e.to));
            assert!(a.is_none() || a != b);
        }
        // the base reaches exactly T|_w both ways
        for (w, gw) in g.workers.iter().enumerate() {
            let outs: BTreeSet<_> = g.out_edges(w, gw.base).iter().map(|&e| g.edges[e].to).collect();
            let ins: BTreeSet<_> = g.in_edges(w, gw.base).iter().map(|&e| g.edges[e].from).collect();
            let t: BTreeSet<_> = gw.compatible.iter().copied().collect();
            assert_eq!(outs, t);
            assert_eq!(ins, t);
        }
    }

    #[test]
    fn negative_time_names_the_edge() {
        let inst = instance(&[("w", &[("t1", "a")])], &[("t1", &["a"])]);
        let bad = |_: &Worker, _: &Vertex, to: &Vertex| -> Result<Weights> {
            let t = if to.is_base() { -1.0 } else { 1.0 };
            Ok([(CostType::time(), CostPair::new(t, 0.0))].into())
        };
        let err = build_graph(&inst, &bad).unwrap_err().to_string();
        assert!(err.contains("[t1.a,b]|w"), "{err}");
    }

    #[test]
    fn filter_and_dump_are_deterministic() {
        struct NoReturnFromT1;
        impl EdgeFilter for NoReturnFromT1 {
            fn admits(&self, _: &Worker, from: &Vertex, to: &Vertex) -> bool {
                !(from.label == "t1.a" && to.is_base())
            }
        }
        let inst = instance(&[("w", &[("t1", "a"), ("t2", "a")])], &[("t1", &["a"]), ("t2", &["a"])]);
        let g = build_graph_filtered(&inst, &unit, &NoReturnFromT1).unwrap();
        assert_eq!(g.edges.len(), 5);
        let g2 = build_graph_filtered(&inst, &unit, &NoReturnFromT1).unwrap();
        assert_eq!(dump(&g), dump(&g2));
        assert!(dump(&g).starts_with("cost_types time\nvertex 0 base b\n"));
    }
}
