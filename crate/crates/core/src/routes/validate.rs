use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{objective_of, simulate, Plan, WorkerPlan};
use crate::encoder::EncodeOptions;
use crate::graph::{MultiGraph, VertexId, WorkerId};
use crate::model::{ApproachRef, CostType, ProblemInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ValidationFamily {
    Structure,
    Coverage,
    Compatibility,
    Order,
    Precedence,
    TimeWindow,
    Energy,
    Objective,
}

impl fmt::Display for ValidationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub family: ValidationFamily,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn families(&self) -> BTreeSet<ValidationFamily> {
        self.violations.iter().map(|v| v.family).collect()
    }

    pub fn has(&self, family: ValidationFamily) -> bool {
        self.violations.iter().any(|v| v.family == family)
    }

    fn push(&mut self, family: ValidationFamily, message: String) {
        self.violations.push(Violation { family, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return writeln!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.family, v.message)?;
        }
        Ok(())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

fn exceeds(a: f64, b: f64) -> bool {
    a > b && !close(a, b)
}

/// Checks `plan` against the instance and options without using the MILP.
/// Times are recomputed from the graph weights and each worker's wait.
pub fn validate_plan(inst: &ProblemInstance, graph: &MultiGraph, opts: &EncodeOptions, plan: &Plan) -> ValidationReport {
    use ValidationFamily::*;
    let mut r = ValidationReport::default();
    let labels: BTreeMap<&str, VertexId> = graph.vertices.iter().enumerate().map(|(i, v)| (v.label.as_str(), i)).collect();
    let wait_bound = graph.cost_index(&CostType::time()).map_or(0.0, |t| graph.edges.iter().map(|e| e.omega(t)).sum());

    if plan.objective_kind != opts.objective {
        r.push(Objective, format!("plan minimizes {} but {} was requested", plan.objective_kind, opts.objective));
    }
    let mut seen = BTreeSet::new();
    for wp in &plan.workers {
        if graph.worker_index(&wp.worker).is_none() {
            r.push(Structure, format!("unknown worker {}", wp.worker));
        } else if !seen.insert(wp.worker.as_str()) {
            r.push(Structure, format!("worker {} appears twice", wp.worker));
        }
    }
    for gw in &graph.workers {
        if !seen.contains(gw.id.as_str()) {
            r.push(Structure, format!("worker {} is missing from the plan", gw.id));
        }
    }

    // Replayed routes by worker index
    let mut replay: BTreeMap<WorkerId, (Vec<VertexId>, WorkerPlan)> = BTreeMap::new();
    let mut visits: BTreeMap<&str, Vec<(WorkerId, usize)>> = BTreeMap::new();
    for wp in &plan.workers {
        let Some(w) = graph.worker_index(&wp.worker) else { continue };
        let gw = &graph.workers[w];
        let worker = inst.worker(&wp.worker);
        if wp.wait < 0.0 || !wp.wait.is_finite() {
            r.push(Structure, format!("{} has an invalid wait {}", wp.worker, wp.wait));
        } else if wp.wait > 0.0 && !opts.waiting {
            r.push(Structure, format!("{} waits {} but waiting is disabled", wp.worker, wp.wait));
        } else if exceeds(wp.wait, wait_bound) {
            r.push(Structure, format!("{} waits {} beyond the bound {}", wp.worker, wp.wait, wait_bound));
        }
        if !wp.active {
            if !wp.route.is_empty() {
                r.push(Structure, format!("inactive worker {} has a route", wp.worker));
            }
            continue;
        }
        let n = wp.route.len();
        if n < 3 {
            r.push(Structure, format!("active worker {} visits no task", wp.worker));
            continue;
        }
        let base = graph.vertices[gw.base].label.as_str();
        if wp.route[0].vertex != base || wp.route[n - 1].vertex != base {
            r.push(Structure, format!("route of {} does not start and end at {}", wp.worker, base));
            continue;
        }
        let mut seq = vec![gw.base];
        let mut ok = true;
        for (k, stop) in wp.route[1..n - 1].iter().enumerate() {
            let Some(&v) = labels.get(stop.vertex.as_str()) else {
                r.push(Structure, format!("{} visits unknown vertex {}", wp.worker, stop.vertex));
                ok = false;
                continue;
            };
            let Some(a) = graph.vertices[v].approach() else {
                r.push(Structure, format!("{} passes through base {} mid-route", wp.worker, stop.vertex));
                ok = false;
                continue;
            };
            if stop.task.as_deref() != Some(a.task.as_str()) || stop.approach.as_deref() != Some(a.approach.as_str()) {
                r.push(Structure, format!("stop {} of {} names the wrong task or approach", stop.vertex, wp.worker));
            }
            if seq.contains(&v) {
                r.push(Structure, format!("{} visits {} twice", wp.worker, stop.vertex));
                ok = false;
            }
            let compatible = worker.is_some_and(|wk| wk.compatibility.contains(&ApproachRef::new(&a.task, &a.approach)));
            if !compatible {
                r.push(Compatibility, format!("{} cannot perform {}", wp.worker, stop.vertex));
                ok = false;
            }
            visits.entry(graph.tasks[graph.task_of(v).unwrap()].id.as_str()).or_default().push((w, k + 1));
            seq.push(v);
        }
        seq.push(gw.base);
        if !ok {
            continue;
        }
        match simulate(graph, w, &seq, wp.wait.max(0.0)) {
            Ok(sim) => {
                for (claimed, real) in wp.route.iter().zip(&sim.route) {
                    if !close(claimed.start, real.start) || !close(claimed.completion, real.completion) {
                        r.push(
                            Objective,
                            format!(
                                "{} at {} claims [{}, {}], replay gives [{}, {}]",
                                wp.worker, claimed.vertex, claimed.start, claimed.completion, real.start, real.completion
                            ),
                        );
                    }
                }
                if !close(wp.time, sim.time) {
                    r.push(Objective, format!("{} claims time {}, replay gives {}", wp.worker, wp.time, sim.time));
                }
                if !close(wp.energy, sim.energy) {
                    r.push(Objective, format!("{} claims energy {}, replay gives {}", wp.worker, wp.energy, sim.energy));
                }
                if opts.energy_budget && exceeds(sim.energy, 1.0) {
                    r.push(Energy, format!("{} spends {:.4} of its energy budget", wp.worker, sim.energy));
                }
                replay.insert(w, (seq, sim));
            }
            Err(m) => r.push(Structure, m),
        }
    }

    for t in &graph.tasks {
        let k = visits.get(t.id.as_str()).map_or(0, Vec::len);
        if k > 1 {
            r.push(Coverage, format!("task {} covered {k} times", t.id));
        } else if k == 0 && t.mandatory {
            r.push(Coverage, format!("task {} is not covered", t.id));
        }
    }

    for o in &opts.order {
        for (&w, (seq, _)) in &replay {
            let wid = &graph.workers[w].id;
            if o.worker.as_ref().is_some_and(|x| x != wid) {
                continue;
            }
            let pos = |task: &str| seq.iter().position(|&v| graph.task_of(v).is_some_and(|t| graph.tasks[t].id == task));
            if let (Some(a), Some(b)) = (pos(&o.before), pos(&o.after)) {
                if a > b {
                    r.push(Order, format!("{wid} performs {} after {}", o.before, o.after));
                }
            }
        }
    }

    // Task-level times summed over visits, as in the model; 0 when unvisited.
    let times = |task: &str| -> Option<(f64, f64)> {
        let vs = visits.get(task)?;
        let mut s = (0.0, 0.0);
        for &(w, k) in vs {
            let stop = &replay.get(&w)?.1.route[k];
            s.0 += stop.start;
            s.1 += stop.completion;
        }
        Some(s)
    };
    let complete = replay.len() == plan.workers.iter().filter(|w| w.active).count();
    if complete {
        for p in &opts.precedence {
            let done = times(&p.before).map_or(0.0, |t| t.1);
            let start = times(&p.after).map_or(0.0, |t| t.0);
            if exceeds(done, start) {
                r.push(Precedence, format!("{} completes at {done} but {} starts at {start}", p.before, p.after));
            }
        }
        for tw in &opts.windows {
            let (s, c) = times(&tw.task).unwrap_or((0.0, 0.0));
            if exceeds(tw.earliest, s) {
                r.push(TimeWindow, format!("{} starts at {s}, before {}", tw.task, tw.earliest));
            }
            if exceeds(c, tw.latest) {
                r.push(TimeWindow, format!("{} completes at {c}, after {}", tw.task, tw.latest));
            }
        }
        let sims: Vec<WorkerPlan> = replay.values().map(|(_, s)| s.clone()).collect();
        let obj = objective_of(opts.objective, &sims);
        if !close(obj, plan.objective) {
            r.push(Objective, format!("objective is {obj}, plan claims {}", plan.objective));
        }
    }
    r
}
