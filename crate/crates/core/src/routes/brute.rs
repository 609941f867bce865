use std::collections::BTreeMap;

use super::{plan_from_routes, Plan};
use crate::encoder::{EncodeOptions, Objective};
use crate::error::{Error, Result};
use crate::graph::{MultiGraph, VertexId, WorkerId};
use crate::model::{CostType, ProblemInstance};

pub const MAX_BRUTE_TASKS: usize = 6;
pub const MAX_BRUTE_WORKERS: usize = 2;

const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub objective: f64,
    pub plan: Plan,
    /// Complete route combinations examined.
    pub evaluated: u64,
}

/// One candidate route of one worker.
struct Route {
    seq: Vec<VertexId>,
    time: f64,
    /// Task index -> (start, completion) without wait.
    times: BTreeMap<usize, (f64, f64)>,
}

struct Search<'a> {
    graph: &'a MultiGraph,
    opts: &'a EncodeOptions,
    time: usize,
    energy: Option<usize>,
    wait_bound: f64,
    best: Option<(f64, Vec<(Vec<VertexId>, f64)>)>,
    evaluated: u64,
}

impl Search<'_> {
    fn route(&self, w: WorkerId, order: &[VertexId]) -> Option<Route> {
        let g = self.graph;
        let base = g.workers[w].base;
        let mut seq = vec![base];
        seq.extend_from_slice(order);
        seq.push(base);
        let (mut t, mut en) = (0.0, 0.0);
        let mut times = BTreeMap::new();
        for pair in seq.windows(2) {
            let e = g.edge(w, pair[0], pair[1])?;
            t += g.edges[e].omega(self.time);
            if let Some(ei) = self.energy {
                en += g.edges[e].omega(ei);
            }
            if let Some(task) = g.task_of(pair[1]) {
                times.insert(task, (t - g.execution(w, pair[1], self.time), t));
            }
        }
        if self.opts.energy_budget && en > 1.0 + EPS {
            return None;
        }
        for o in &self.opts.order {
            if o.worker.as_ref().is_some_and(|x| *x != g.workers[w].id) {
                continue;
            }
            let pos = |id: &str| order.iter().position(|&v| g.task_of(v).is_some_and(|t| g.tasks[t].id == id));
            if let (Some(a), Some(b)) = (pos(&o.before), pos(&o.after)) {
                if a > b {
                    return None;
                }
            }
        }
        Some(Route { seq, time: t, times })
    }

    /// Least waits meeting precedence and windows, or None.
    fn waits(&self, routes: &[Option<&Route>]) -> Option<Vec<f64>> {
        let g = self.graph;
        let n = routes.len();
        let mut lo = vec![0.0f64; n];
        let mut hi = vec![if self.opts.waiting { self.wait_bound } else { 0.0 }; n];
        let find = |id: &str| -> Option<(WorkerId, (f64, f64))> {
            let t = g.task_index(id)?;
            routes.iter().enumerate().find_map(|(w, r)| r.and_then(|r| r.times.get(&t)).map(|&x| (w, x)))
        };
        let mut diffs = Vec::new();
        for tw in &self.opts.windows {
            match find(&tw.task) {
                Some((w, (s, c))) => {
                    lo[w] = lo[w].max(tw.earliest - s);
                    hi[w] = hi[w].min(tw.latest - c);
                }
                None if tw.earliest > EPS || tw.latest < -EPS => return None,
                None => {}
            }
        }
        for p in &self.opts.precedence {
            match (find(&p.before), find(&p.after)) {
                (Some((i, (_, c))), Some((j, (s, _)))) => diffs.push((i, j, c - s)),
                (Some((i, (_, c))), None) => hi[i] = hi[i].min(-c),
                _ => {}
            }
        }
        // wait_j >= wait_i + d
        for round in 0..=n {
            let mut changed = false;
            for &(i, j, d) in &diffs {
                if lo[i] + d > lo[j] + EPS {
                    lo[j] = lo[i] + d;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            if round == n {
                return None;
            }
        }
        let tol = |x: f64| EPS * x.abs().max(1.0);
        if lo.iter().zip(&hi).any(|(l, h)| *l > *h + tol(*h)) {
            return None;
        }
        Some(lo)
    }

    fn evaluate(&mut self, routes: &[Option<&Route>]) {
        self.evaluated += 1;
        let Some(waits) = self.waits(routes) else { return };
        let totals = routes.iter().zip(&waits).filter_map(|(r, wt)| r.map(|r| r.time + wt));
        let obj = match self.opts.objective {
            Objective::Mtm => totals.fold(0.0, f64::max),
            Objective::TotalTime => totals.sum(),
        };
        if self.best.as_ref().is_none_or(|b| obj < b.0 - EPS * obj.abs().max(1.0)) {
            let plan = routes
                .iter()
                .zip(&waits)
                .map(|(r, &wt)| r.map_or((vec![], 0.0), |r| (r.seq.clone(), wt)))
                .collect();
            self.best = Some((obj, plan));
        }
    }
}

fn permutations(items: &mut Vec<VertexId>, k: usize, out: &mut Vec<Vec<VertexId>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Exact optimum by enumerating assignments and visit orders. Returns
/// `None` when the instance is infeasible. Meant as a test oracle.
pub fn brute_force(inst: &ProblemInstance, graph: &MultiGraph, opts: &EncodeOptions) -> Result<Option<BruteForce>> {
    if graph.tasks.len() > MAX_BRUTE_TASKS || graph.num_workers() > MAX_BRUTE_WORKERS {
        return Err(Error::BruteForce(format!(
            "{} tasks and {} workers exceed the limit of {MAX_BRUTE_TASKS} and {MAX_BRUTE_WORKERS}",
            graph.tasks.len(),
            graph.num_workers()
        )));
    }
    let time = graph.cost_index(&CostType::time()).ok_or_else(|| Error::BruteForce("no time cost type".into()))?;
    let energy = graph.cost_index(&CostType::energy());
    if opts.energy_budget && energy.is_none() {
        return Err(Error::BruteForce("energy budget without an energy cost type".into()));
    }
    let mut search = Search {
        graph,
        opts,
        time,
        energy,
        wait_bound: graph.edges.iter().map(|e| e.omega(time)).sum(),
        best: None,
        evaluated: 0,
    };

    // choices[t]: (worker, vertex) options, plus None for optional tasks
    let choices: Vec<Vec<Option<(WorkerId, VertexId)>>> = graph
        .tasks
        .iter()
        .map(|t| {
            let mut c: Vec<Option<(WorkerId, VertexId)>> = Vec::new();
            if !t.mandatory {
                c.push(None);
            }
            for w in 0..graph.num_workers() {
                c.extend(t.vertices.iter().filter(|&&v| graph.is_compatible(w, v)).map(|&v| Some((w, v))));
            }
            c
        })
        .collect();
    let nw = graph.num_workers();
    let mut pick = vec![0usize; choices.len()];
    if choices.iter().all(|c| !c.is_empty()) {
        loop {
            let mut sets: Vec<Vec<VertexId>> = vec![vec![]; nw];
            for (t, &k) in pick.iter().enumerate() {
                if let Some((w, v)) = choices[t][k] {
                    sets[w].push(v);
                }
            }
            let per_worker: Vec<Vec<Option<Route>>> = sets
                .iter_mut()
                .enumerate()
                .map(|(w, set)| {
                    if set.is_empty() {
                        return vec![None];
                    }
                    let mut perms = Vec::new();
                    permutations(set, 0, &mut perms);
                    perms.iter().filter_map(|p| search.route(w, p)).map(Some).collect()
                })
                .collect();
            combine(&mut search, &per_worker, &mut Vec::new());

            // odometer step
            let mut t = 0;
            while t < pick.len() {
                pick[t] += 1;
                if pick[t] < choices[t].len() {
                    break;
                }
                pick[t] = 0;
                t += 1;
            }
            if t == pick.len() {
                break;
            }
        }
    }
    let evaluated = search.evaluated;
    match search.best {
        None => Ok(None),
        Some((objective, routes)) => {
            let mut plan = plan_from_routes(&inst.name, graph, opts.objective, &routes)?;
            plan.objective = objective;
            Ok(Some(BruteForce { objective, plan, evaluated }))
        }
    }
}

fn combine<'r>(search: &mut Search, per_worker: &'r [Vec<Option<Route>>], chosen: &mut Vec<Option<&'r Route>>) {
    if chosen.len() == per_worker.len() {
        search.evaluate(chosen);
        return;
    }
    for r in &per_worker[chosen.len()] {
        chosen.push(r.as_ref());
        combine(search, per_worker, chosen);
        chosen.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, CostPair, Vertex, Weights};
    use crate::model::*;

    fn unit(_: &Worker, from: &Vertex, to: &Vertex) -> Result<Weights> {
        let exec = if to.is_base() { 0.0 } else { 2.0 };
        let tr = if from.is_base() || to.is_base() { 1.0 } else { 3.0 };
        Ok([(CostType::time(), CostPair::new(tr, exec))].into())
    }

    #[test]
    fn two_tasks_one_worker() {
        let mut inst = crate::instances::build_guitar();
        inst.tasks.truncate(2);
        inst.precedence.clear();
        inst.workers.truncate(1);
        inst.workers[0].compatibility.retain(|a| a.task == "T1" || a.task == "T2");
        let g = build_graph(&inst, &unit).unwrap();
        let r = brute_force(&inst, &g, &EncodeOptions::default()).unwrap().unwrap();
        // 1 + 2, 3 + 2, 1
        assert_eq!(r.objective, 9.0);
        assert_eq!(r.evaluated, 2);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = crate::instances::random_instance(&crate::instances::RandomSpec { tasks: 7, ..Default::default() });
        let w = crate::costmodels::weigher_for(&inst);
        let g = build_graph(&inst, w.as_ref()).unwrap();
        assert!(matches!(brute_force(&inst, &g, &EncodeOptions::default()), Err(Error::BruteForce(_))));
    }

    #[test]
    fn waits_resolve_cross_worker_precedence() {
        let mut inst = crate::instances::build_guitar();
        inst.tasks.truncate(2);
        inst.workers[0].compatibility.retain(|a| a.task == "T1");
        inst.workers[1].compatibility = [ApproachRef::new("T2", "A")].into();
        inst.precedence = vec![Precedence { before: "T1".into(), after: "T2".into() }];
        let g = build_graph(&inst, &unit).unwrap();
        let mut opts = EncodeOptions::from_instance(&inst, Default::default(), Objective::Mtm);
        assert!(brute_force(&inst, &g, &opts).unwrap().is_none());
        opts.waiting = true;
        let r = brute_force(&inst, &g, &opts).unwrap().unwrap();
        // T1 done at 3, T2 starts at 1 + wait
        assert_eq!(r.plan.workers[1].wait, 2.0);
        assert_eq!(r.objective, 6.0);
    }
}
