//! TSPLIB `NODE_COORD_SECTION` files with `EUC_2D` or `ATT` weights.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costmodels::distance;
use crate::error::{Error, Result};
use crate::model::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeWeightType {
    Euc2d,
    Att,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsplibProblem {
    pub name: String,
    pub dimension: usize,
    pub edge_weight_type: EdgeWeightType,
    pub coords: Vec<[f64; 2]>,
}

impl TsplibProblem {
    /// Integer distance per the TSPLIB convention of the weight type.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let rule = match self.edge_weight_type {
            EdgeWeightType::Euc2d => DistanceRule::Rounded,
            EdgeWeightType::Att => DistanceRule::Att,
        };
        distance(rule, self.coords[i], self.coords[j])
    }

    /// Unrounded Euclidean distance.
    pub fn euclidean(&self, i: usize, j: usize) -> f64 {
        distance(DistanceRule::Exact, self.coords[i], self.coords[j])
    }
}

pub fn parse_tsplib(text: &str) -> Result<TsplibProblem> {
    let mut header = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    let mut in_coords = false;
    for (_, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("NODE_COORD_SECTION") {
            in_coords = true;
            break;
        }
        if line == "EOF" {
            break;
        }
        let (key, value) = line.split_once(':').unwrap_or((line, ""));
        header.insert(key.trim().to_uppercase(), value.trim().to_string());
    }
    let weight = header.get("EDGE_WEIGHT_TYPE").map(String::as_str).unwrap_or("");
    let edge_weight_type = match weight {
        "EUC_2D" => EdgeWeightType::Euc2d,
        "ATT" => EdgeWeightType::Att,
        other => return Err(Error::UnsupportedWeightType(if other.is_empty() { "(missing)".into() } else { other.into() })),
    };
    if !in_coords {
        return Err(Error::Tsplib("no NODE_COORD_SECTION".into()));
    }
    let dimension: usize = header
        .get("DIMENSION")
        .ok_or_else(|| Error::Tsplib("no DIMENSION".into()))?
        .parse()
        .map_err(|e| Error::Tsplib(format!("bad DIMENSION: {e}")))?;

    let mut coords = Vec::with_capacity(dimension);
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" || line.ends_with("_SECTION") {
            break;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Tsplib(format!("line {}: {e}", no + 1)));
        if f.len() != 3 {
            return Err(Error::Tsplib(format!("line {}: expected `index x y`", no + 1)));
        }
        let index: usize = f[0].parse().map_err(|e| Error::Tsplib(format!("line {}: {e}", no + 1)))?;
        if index != coords.len() + 1 {
            return Err(Error::Tsplib(format!("line {}: node {index} out of sequence", no + 1)));
        }
        coords.push([parse(f[1])?, parse(f[2])?]);
    }
    if coords.len() != dimension {
        return Err(Error::Tsplib(format!("DIMENSION {dimension} but {} coordinates", coords.len())));
    }
    Ok(TsplibProblem {
        name: header.get("NAME").cloned().unwrap_or_default(),
        dimension,
        edge_weight_type,
        coords,
    })
}

/// Random side constraints layered on a TSPLIB instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Recipe {
    /// Number of tasks that lose one randomly chosen worker.
    pub compatibility: usize,
    pub order: usize,
    pub precedence: usize,
    pub seed: u64,
    pub distance: DistanceRule,
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe { compatibility: 0, order: 0, precedence: 0, seed: 0, distance: DistanceRule::Exact }
    }
}

/// One single-approach task per non-base node, travel time = distance / speed,
/// no execution cost.
pub fn tsplib_to_instance(p: &TsplibProblem, n_w: usize, speed: f64, base: usize, recipe: &Recipe) -> Result<ProblemInstance> {
    if base >= p.dimension {
        return Err(Error::Tsplib(format!("base node {base} out of range")));
    }
    if n_w == 0 {
        return Err(Error::Tsplib("need at least one worker".into()));
    }
    let width = p.dimension.to_string().len();
    let node_id = |i: usize| format!("n{:0width$}", i + 1);
    let tasks: Vec<Task> = (0..p.dimension)
        .filter(|&i| i != base)
        .map(|i| Task {
            id: node_id(i),
            approaches: vec![Approach { id: "a".into(), site: None, position: Some(p.coords[i]) }],
            mandatory: true,
        })
        .collect();
    let task_ids: Vec<String> = tasks.iter().map(|t| t.id.clone()).collect();
    let mut workers: Vec<Worker> = (0..n_w)
        .map(|k| Worker {
            id: format!("w{}", k + 1),
            base: "depot".into(),
            compatibility: task_ids.iter().map(|t| ApproachRef::new(t, "a")).collect(),
            params: [("speed".to_string(), speed)].into(),
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    if n_w > 1 {
        let chosen: Vec<&String> = task_ids.choose_multiple(&mut rng, recipe.compatibility.min(task_ids.len())).collect();
        for t in chosen {
            let k = rng.gen_range(0..n_w);
            workers[k].compatibility.remove(&ApproachRef::new(t, "a"));
        }
    }
    let mut rank: Vec<usize> = (0..task_ids.len()).collect();
    rank.shuffle(&mut rng);
    let mut order = Vec::new();
    let mut precedence = Vec::new();
    let mut guard = 0;
    while (order.len() < recipe.order || precedence.len() < recipe.precedence) && task_ids.len() > 1 && guard < 100_000 {
        guard += 1;
        let a = rng.gen_range(0..task_ids.len());
        let b = rng.gen_range(0..task_ids.len());
        if a == b {
            continue;
        }
        let (a, b) = if rank[a] < rank[b] { (a, b) } else { (b, a) };
        let (ta, tb) = (&task_ids[a], &task_ids[b]);
        if order.len() < recipe.order {
            let both: Vec<&Worker> = workers
                .iter()
                .filter(|w| w.is_compatible(&ApproachRef::new(ta, "a")) && w.is_compatible(&ApproachRef::new(tb, "a")))
                .collect();
            if let Some(w) = both.choose(&mut rng) {
                let pair = OrderPair { worker: Some(w.id.clone()), before: ta.clone(), after: tb.clone() };
                if !order.contains(&pair) {
                    order.push(pair);
                }
            }
        } else {
            let pair = Precedence { before: ta.clone(), after: tb.clone() };
            if !precedence.contains(&pair) {
                precedence.push(pair);
            }
        }
    }

    Ok(ProblemInstance {
        name: if p.name.is_empty() { "tsplib".into() } else { p.name.clone() },
        cost_types: vec![CostType::time()],
        bases: vec![Base { id: "depot".into(), site: None, position: Some(p.coords[base]) }],
        tasks,
        workers,
        order,
        precedence,
        windows: vec![],
        waiting: false,
        energy_budget: false,
        costs: CostSpec::Euclidean { distance: recipe.distance, execution: vec![] },
        seed: (recipe.compatibility + recipe.order + recipe.precedence > 0).then_some(recipe.seed),
    })
}
