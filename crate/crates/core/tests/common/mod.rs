//! Shared oracles and instance suites for the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use hmwtpp::costmodels::{weigher_for, Pose2D};
use hmwtpp::instances::{gen_grid, grid_to_instance, parse_tsplib, tsplib_to_instance, GridParams, RandomSpec, Recipe, Selection};
use hmwtpp::routes::ValidationFamily;
use hmwtpp::{
    build_graph, encode, extract_plan, solve, validate_plan, CostSpec, CostType, EncodeOptions, MultiGraph, Objective,
    OrderPair, Plan, Precedence, ProblemInstance, SecMode, SolveLimits, SolveReport, SolveStatus, VarRef,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// One worker at speed 10 from node 1, raw Euclidean distances.
pub fn tsplib(name: &str) -> ProblemInstance {
    let text = std::fs::read_to_string(fixture(&format!("{name}.tsp"))).unwrap();
    tsplib_to_instance(&parse_tsplib(&text).unwrap(), 1, 10.0, 0, &Recipe::default()).unwrap()
}

pub fn graph(inst: &ProblemInstance) -> MultiGraph {
    build_graph(inst, weigher_for(inst).as_ref()).unwrap()
}

pub struct Outcome {
    pub report: SolveReport,
    pub graph: MultiGraph,
    pub options: EncodeOptions,
    pub plan: Option<Plan>,
}

impl Outcome {
    /// The optimum, or `None` when the instance is infeasible.
    pub fn optimum(&self) -> Option<f64> {
        match self.report.status {
            SolveStatus::Optimal => self.report.objective,
            SolveStatus::Infeasible => None,
            s => panic!("solve ended with {s}"),
        }
    }
}

/// Solver plans that passed the validator so far.
pub static VALIDATED: AtomicUsize = AtomicUsize::new(0);

/// Solves to optimality and checks the extracted plan with the validator.
pub fn solve_with(inst: &ProblemInstance, opts: &EncodeOptions) -> Outcome {
    let graph = graph(inst);
    let model = encode(&graph, opts).unwrap();
    let report = solve(&graph, &model, &SolveLimits::default()).unwrap();
    let plan = report.solution.as_ref().map(|x| {
        let plan = extract_plan(&inst.name, &graph, &model, x).unwrap();
        let check = validate_plan(inst, &graph, opts, &plan);
        assert!(check.is_valid(), "{}: solver plan rejected:\n{check}", inst.name);
        assert!((plan.objective - report.objective.unwrap()).abs() <= 1e-6 * plan.objective.abs().max(1.0));
        VALIDATED.fetch_add(1, Ordering::Relaxed);
        plan
    });
    Outcome { report, graph, options: opts.clone(), plan }
}

pub fn solve_mode(inst: &ProblemInstance, sec: SecMode) -> Outcome {
    solve_with(inst, &EncodeOptions::from_instance(inst, sec, Objective::Mtm))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Both infeasible, or both feasible with close optima.
pub fn same_optimum(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => rel_close(a, b, tol),
        _ => false,
    }
}

/// `a <= b` with infeasible read as +inf.
pub fn no_worse(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(a), Some(b)) => a <= b + tol * a.abs().max(b.abs()).max(1.0),
    }
}

// ---------------------------------------------------------------------------
// Random suites

/// DFJ-vs-MTZ suite: at most 10 vertices, one to three workers.
pub fn mode_suite(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let tasks = rng.gen_range(2..=4);
    let spec = RandomSpec {
        tasks,
        workers: rng.gen_range(1..=3),
        max_approaches: 2,
        precedence: rng.gen_range(0..=2),
        order: rng.gen_range(0..=1),
        windows: rng.gen_range(0..=1),
        waiting: rng.gen_bool(0.5),
        energy: false,
        seed,
    };
    hmwtpp::instances::random_instance(&spec)
}

/// Brute-force suite: up to six tasks and two workers, random precedence.
pub fn brute_suite(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
    let tasks = rng.gen_range(3..=6);
    let spec = RandomSpec {
        tasks,
        workers: rng.gen_range(1..=2),
        max_approaches: if tasks > 4 { 1 } else { 2 },
        precedence: rng.gen_range(1..=3),
        order: rng.gen_range(0..=1),
        windows: 0,
        waiting: rng.gen_bool(0.5),
        energy: false,
        seed: 500 + seed,
    };
    hmwtpp::instances::random_instance(&spec)
}

/// One extra precedence or order pair that keeps precedence acyclic.
pub fn tighten(inst: &ProblemInstance, seed: u64) -> Option<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
    let ids: Vec<&str> = inst.tasks.iter().map(|t| t.id.as_str()).collect();
    for _ in 0..100 {
        let (a, b) = (rng.gen_range(0..ids.len()), rng.gen_range(0..ids.len()));
        if a == b {
            continue;
        }
        let mut out = inst.clone();
        if rng.gen_bool(0.5) {
            let p = Precedence { before: ids[a].into(), after: ids[b].into() };
            if out.precedence.contains(&p) {
                continue;
            }
            out.precedence.push(p);
            if hmwtpp::model::precedence_cycle(&out.precedence).is_some() {
                continue;
            }
        } else {
            let w = &inst.workers[rng.gen_range(0..inst.workers.len())];
            let o = OrderPair { worker: Some(w.id.clone()), before: ids[a].into(), after: ids[b].into() };
            if out.order.contains(&o) {
                continue;
            }
            out.order.push(o);
        }
        return Some(out);
    }
    None
}

// ---------------------------------------------------------------------------
// Dubins oracle
//
// Independent of the closed-form word formulas: the first arc angle is
// scanned on a fine grid, and for each word the remaining two segments are
// fixed by a tangency residual whose sign changes are refined by bisection.

const SCAN: usize = 20_000;

fn left_normal(h: f64) -> [f64; 2] {
    [-h.sin(), h.cos()]
}

fn angle(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Pose after turning `t` radians in direction `s` (+1 left, -1 right).
fn after_arc(p: Pose2D, s: f64, t: f64, r: f64) -> ([f64; 2], f64) {
    let n0 = left_normal(p.heading);
    let c = [p.x + r * s * n0[0], p.y + r * s * n0[1]];
    let h = p.heading + s * t;
    let n = left_normal(h);
    ([c[0] - r * s * n[0], c[1] - r * s * n[1]], h)
}

fn roots(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let step = TAU / SCAN as f64;
    let mut out = Vec::new();
    let mut prev = f(0.0);
    if prev == 0.0 {
        out.push(0.0);
    }
    for k in 1..=SCAN {
        let b = k as f64 * step;
        let fb = f(b);
        if fb == 0.0 {
            out.push(b);
        } else if prev * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (b - step, b, prev);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = fb;
    }
    out
}

/// Shortest turn-straight-turn length with turn directions `s1`, `s3`.
fn csc(start: Pose2D, end: Pose2D, r: f64, s1: f64, s3: f64) -> f64 {
    let ne = left_normal(end.heading);
    let ce = [end.x + r * s3 * ne[0], end.y + r * s3 * ne[1]];
    let reach = |t: f64| {
        let (p, h) = after_arc(start, s1, t, r);
        let n = left_normal(h);
        let v = [ce[0] - p[0] - r * s3 * n[0], ce[1] - p[1] - r * s3 * n[1]];
        (h, v)
    };
    let mut best = f64::INFINITY;
    for t in roots(|t| {
        let (h, v) = reach(t);
        h.cos() * v[1] - h.sin() * v[0]
    }) {
        let (h, v) = reach(t);
        let straight = h.cos() * v[0] + h.sin() * v[1];
        if straight < -1e-9 * r {
            continue;
        }
        best = best.min(r * t + straight.max(0.0) + r * angle(s3 * (end.heading - h)));
    }
    best
}

/// Shortest turn-turn-turn length with outer direction `s` and the middle
/// arc turning the other way.
fn ccc(start: Pose2D, end: Pose2D, r: f64, s: f64) -> f64 {
    let ne = left_normal(end.heading);
    let ce = [end.x + r * s * ne[0], end.y + r * s * ne[1]];
    let middle = |t: f64| {
        let (p, h) = after_arc(start, s, t, r);
        let n = left_normal(h);
        ([p[0] - r * s * n[0], p[1] - r * s * n[1]], h)
    };
    let mut best = f64::INFINITY;
    for t in roots(|t| {
        let (cm, _) = middle(t);
        (ce[0] - cm[0]).hypot(ce[1] - cm[1]) - 2.0 * r
    }) {
        let (cm, h) = middle(t);
        let u = [(ce[0] - cm[0]) / 2.0, (ce[1] - cm[1]) / 2.0];
        // on the middle circle, turning -s: u = s r nL(h_m)
        let hm = (-s * u[0]).atan2(s * u[1]);
        let mid = angle(-s * (hm - h));
        let fin = angle(s * (end.heading - hm));
        best = best.min(r * (t + mid + fin));
    }
    best
}

pub fn dubins_oracle(start: Pose2D, end: Pose2D, r: f64) -> f64 {
    let mut best = f64::INFINITY;
    for (s1, s3) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
        best = best.min(csc(start, end, r, s1, s3));
    }
    for s in [1.0, -1.0] {
        best = best.min(ccc(start, end, r, s));
    }
    best
}

pub fn random_pose_pair(rng: &mut ChaCha8Rng, r: f64) -> (Pose2D, Pose2D) {
    // half of the pairs are close enough for three-arc words to matter
    let span = if rng.gen_bool(0.5) { 3.0 * r } else { 20.0 * r };
    let mut pose = || Pose2D::new(rng.gen_range(-span..span), rng.gen_range(-span..span), rng.gen_range(0.0..TAU));
    (pose(), pose())
}

pub const HALF_TURN: f64 = PI;

// ---------------------------------------------------------------------------
// Plan mutations

pub struct Mutation {
    pub kind: &'static str,
    pub plan: Plan,
    pub expected: ValidationFamily,
}

/// A plan rebuilt from edited routes, so only the edit itself is wrong.
fn rebuild(inst: &ProblemInstance, g: &MultiGraph, plan: &Plan, routes: Vec<(Vec<usize>, f64)>) -> Option<Plan> {
    hmwtpp::routes::plan_from_routes(&inst.name, g, plan.objective_kind, &routes).ok()
}

fn routes_of(g: &MultiGraph, plan: &Plan) -> Vec<(Vec<usize>, f64)> {
    plan.workers
        .iter()
        .map(|w| (w.route.iter().map(|s| g.vertex_by_label(&s.vertex).unwrap()).collect(), w.wait))
        .collect()
}

/// Swaps two adjacent visits of one worker that an order pair or a
/// precedence pair constrains.
pub fn swap_adjacent(inst: &ProblemInstance, g: &MultiGraph, plan: &Plan) -> Option<Mutation> {
    let mut routes = routes_of(g, plan);
    for (w, wp) in plan.workers.iter().enumerate() {
        let stops = &wp.route;
        for k in 1..stops.len().saturating_sub(2) {
            let (a, b) = (stops[k].task.as_deref()?, stops[k + 1].task.as_deref()?);
            let ordered = inst.order.iter().any(|o| {
                o.before == a && o.after == b && o.worker.as_ref().is_none_or(|x| *x == wp.worker)
            });
            let preceded = inst.precedence.iter().any(|p| p.before == a && p.after == b);
            if !ordered && !preceded {
                continue;
            }
            routes[w].0.swap(k, k + 1);
            let plan = rebuild(inst, g, plan, routes)?;
            let expected = if ordered { ValidationFamily::Order } else { ValidationFamily::Precedence };
            return Some(Mutation { kind: "swap", plan, expected });
        }
    }
    None
}

/// Moves one visit onto a worker that cannot perform it.
pub fn reassign_incompatible(g: &MultiGraph, plan: &Plan, rng: &mut ChaCha8Rng) -> Option<Mutation> {
    let mut candidates = Vec::new();
    for (w, wp) in plan.workers.iter().enumerate() {
        for (k, stop) in wp.route.iter().enumerate() {
            if stop.task.is_none() {
                continue;
            }
            let v = g.vertex_by_label(&stop.vertex)?;
            for (o, _) in plan.workers.iter().enumerate() {
                if o != w && !g.is_compatible(o, v) {
                    candidates.push((w, k, o));
                }
            }
        }
    }
    if candidates.is_empty() {
        return None;
    }
    let (w, k, o) = candidates[rng.gen_range(0..candidates.len())];
    let mut plan = plan.clone();
    let stop = plan.workers[w].route.remove(k);
    if plan.workers[w].route.len() == 2 {
        plan.workers[w].route.clear();
        plan.workers[w].active = false;
    }
    let target = &mut plan.workers[o];
    if target.route.is_empty() {
        let base = g.vertices[g.workers[o].base].label.clone();
        let at_base = hmwtpp::routes::Stop {
            vertex: base,
            task: None,
            approach: None,
            start: 0.0,
            completion: 0.0,
            energy: 0.0,
        };
        target.route = vec![at_base.clone(), at_base];
        target.active = true;
    }
    let at = rng.gen_range(1..target.route.len());
    target.route.insert(at, stop);
    Some(Mutation { kind: "reassign", plan, expected: ValidationFamily::Compatibility })
}

/// Removes the visit of one mandatory task.
pub fn drop_mandatory(inst: &ProblemInstance, g: &MultiGraph, plan: &Plan, rng: &mut ChaCha8Rng) -> Option<Mutation> {
    let mut visits = Vec::new();
    for (w, wp) in plan.workers.iter().enumerate() {
        for (k, stop) in wp.route.iter().enumerate() {
            if let Some(t) = &stop.task {
                if inst.task(t).is_some_and(|t| t.mandatory) {
                    visits.push((w, k));
                }
            }
        }
    }
    if visits.is_empty() {
        return None;
    }
    let (w, k) = visits[rng.gen_range(0..visits.len())];
    let mut routes = routes_of(g, plan);
    routes[w].0.remove(k);
    if routes[w].0.len() == 2 {
        routes[w] = (vec![], 0.0);
    }
    let plan = rebuild(inst, g, plan, routes)?;
    Some(Mutation { kind: "drop", plan, expected: ValidationFamily::Coverage })
}

/// Instances for the mutation suite: order and precedence pairs, waiting on,
/// and compatibility gaps.
pub fn mutation_suite(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
    let spec = RandomSpec {
        tasks: rng.gen_range(3..=5),
        workers: rng.gen_range(2..=3),
        max_approaches: 2,
        precedence: rng.gen_range(1..=3),
        order: rng.gen_range(1..=3),
        windows: 0,
        waiting: true,
        energy: false,
        seed: 900 + seed,
    };
    hmwtpp::instances::random_instance(&spec)
}

/// Up to `n` mutations of solver plans, cycling through the three kinds.
pub fn mutations(n: usize) -> Vec<(ProblemInstance, MultiGraph, EncodeOptions, Mutation)> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < n && seed < 10 * n as u64 {
        let inst = mutation_suite(seed);
        let solved = solve_mode(&inst, SecMode::DfjLazy);
        seed += 1;
        let Some(plan) = solved.plan.clone() else { continue };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = out.len() % 3;
        for k in 0..3 {
            let m = match (first + k) % 3 {
                0 => swap_adjacent(&inst, &solved.graph, &plan),
                1 => reassign_incompatible(&solved.graph, &plan, &mut rng),
                _ => drop_mandatory(&inst, &solved.graph, &plan, &mut rng),
            };
            if let Some(m) = m {
                out.push((inst.clone(), solved.graph.clone(), solved.options.clone(), m));
                break;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Energy

/// A grid where a single UAV cannot fly the whole tour on one battery: the
/// endurance is the best solo tour time divided by `margin > 1`.
pub fn tight_grid(seed: u64, margin: f64) -> ProblemInstance {
    let grid = gen_grid(&GridParams { towers: 4, segments: 2, multirotors: 2, vtols: 0, max_wind: 3.0, seed }).unwrap();
    let (mut solo, _) = grid_to_instance(&grid, &Selection::all(&grid)).unwrap();
    solo.energy_budget = false;
    let CostSpec::Grid { grid: g } = &mut solo.costs else { unreachable!() };
    g.uavs.truncate(1);
    solo.workers.truncate(1);
    let opts = EncodeOptions::from_instance(&solo, SecMode::DfjLazy, Objective::TotalTime);
    let tour = solve_with(&solo, &opts).optimum().unwrap();
    let (mut inst, _) = grid_to_instance(&grid, &Selection::all(&grid)).unwrap();
    let CostSpec::Grid { grid: g } = &mut inst.costs else { unreachable!() };
    for u in &mut g.uavs {
        u.endurance = tour / margin;
    }
    inst
}

/// Normalised energy `sum of omega_E z` used by each worker in the solution.
pub fn worker_energy(out: &Outcome) -> Vec<f64> {
    let x = out.report.solution.as_ref().expect("a solution");
    let energy = out.graph.cost_index(&CostType::energy()).unwrap();
    let model = encode(&out.graph, &out.options).unwrap();
    (0..out.graph.num_workers())
        .map(|w| out.graph.worker_edges(w).map(|e| out.graph.edges[e].omega(energy) * model.value(x, VarRef::Z(e))).sum())
        .collect()
}
