//! Seeded random instances for property suites.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::*;

#[derive(Clone, Debug, PartialEq)]
pub struct RandomSpec {
    pub tasks: usize,
    pub workers: usize,
    pub max_approaches: usize,
    pub precedence: usize,
    pub order: usize,
    pub windows: usize,
    pub waiting: bool,
    /// Adds an energy cost type with per-worker budgets.
    pub energy: bool,
    pub seed: u64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            tasks: 4,
            workers: 2,
            max_approaches: 2,
            precedence: 0,
            order: 0,
            windows: 0,
            waiting: false,
            energy: false,
            seed: 0,
        }
    }
}

/// Integer coordinates in a 100 x 100 square, speeds from a small menu and
/// integer execution times, so optima are easy to read.
pub fn random_instance(spec: &RandomSpec) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let point = |rng: &mut ChaCha8Rng| [rng.gen_range(0..=100) as f64, rng.gen_range(0..=100) as f64];
    let bases = vec![Base { id: "b".into(), site: None, position: Some(point(&mut rng)) }];
    let tasks: Vec<Task> = (0..spec.tasks)
        .map(|i| {
            let n = rng.gen_range(1..=spec.max_approaches.max(1));
            Task {
                id: format!("t{i}"),
                approaches: (0..n)
                    .map(|k| Approach { id: ((b'a' + k as u8) as char).to_string(), site: None, position: Some(point(&mut rng)) })
                    .collect(),
                mandatory: true,
            }
        })
        .collect();

    let mut workers: Vec<Worker> = (0..spec.workers.max(1))
        .map(|k| {
            let mut params = std::collections::BTreeMap::new();
            params.insert("speed".to_string(), *[5.0, 8.0, 10.0, 12.0].choose(&mut rng).unwrap());
            if spec.energy {
                params.insert("energy_rate".to_string(), 1.0 / rng.gen_range(25..=60) as f64);
            }
            Worker { id: format!("w{k}"), base: "b".into(), compatibility: BTreeSet::new(), params }
        })
        .collect();
    let mut execution = Vec::new();
    for t in &tasks {
        for a in &t.approaches {
            for w in workers.iter_mut() {
                if rng.gen_bool(0.75) {
                    w.compatibility.insert(ApproachRef::new(&t.id, &a.id));
                }
            }
        }
        let covered = workers.iter().any(|w| w.compatibility.iter().any(|c| c.task == t.id));
        if !covered {
            let a = t.approaches.choose(&mut rng).unwrap();
            let k = rng.gen_range(0..workers.len());
            workers[k].compatibility.insert(ApproachRef::new(&t.id, &a.id));
        }
    }
    for w in &workers {
        for c in &w.compatibility {
            execution.push(ExecutionCost {
                worker: w.id.clone(),
                task: c.task.clone(),
                approach: c.approach.clone(),
                value: rng.gen_range(0..=30) as f64,
            });
        }
    }

    let ids: Vec<String> = tasks.iter().map(|t| t.id.clone()).collect();
    let mut rank: Vec<usize> = (0..ids.len()).collect();
    rank.shuffle(&mut rng);
    let mut precedence = Vec::new();
    let mut order = Vec::new();
    let mut tries = 0;
    while ids.len() > 1 && (precedence.len() < spec.precedence || order.len() < spec.order) && tries < 10_000 {
        tries += 1;
        let (a, b) = (rng.gen_range(0..ids.len()), rng.gen_range(0..ids.len()));
        if a == b {
            continue;
        }
        let (a, b) = if rank[a] < rank[b] { (a, b) } else { (b, a) };
        if precedence.len() < spec.precedence {
            let p = Precedence { before: ids[a].clone(), after: ids[b].clone() };
            if !precedence.contains(&p) {
                precedence.push(p);
            }
        } else {
            let w = &workers[rng.gen_range(0..workers.len())];
            let o = OrderPair { worker: Some(w.id.clone()), before: ids[a].clone(), after: ids[b].clone() };
            if !order.contains(&o) {
                order.push(o);
            }
        }
    }
    let windows = ids
        .choose_multiple(&mut rng, spec.windows.min(ids.len()))
        .map(|t| {
            let earliest = rng.gen_range(0..=40) as f64;
            TimeWindow { task: t.clone(), earliest, latest: earliest + rng.gen_range(60..=200) as f64 }
        })
        .collect();

    let mut cost_types = vec![CostType::time()];
    if spec.energy {
        cost_types.push(CostType::energy());
    }
    ProblemInstance {
        name: format!("random-{}", spec.seed),
        cost_types,
        bases,
        tasks,
        workers,
        order,
        precedence,
        windows,
        waiting: spec.waiting,
        energy_budget: spec.energy,
        costs: CostSpec::Euclidean { distance: DistanceRule::Exact, execution },
        seed: Some(spec.seed),
    }
}
