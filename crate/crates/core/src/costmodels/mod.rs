//! Edge weighers: explicit tables, straight-line travel and grid geometry.

pub mod dubins;
pub mod uav;

use crate::error::{Error, Result};
use crate::graph::{CostPair, Vertex, VertexKind, Weigher, Weights};
use crate::model::{CostSpec, CostTable, CostType, DistanceRule, ExecutionCost, ProblemInstance, Worker};

pub use dubins::{dubins_shortest, DubinsPath, DubinsWord, Pose2D};
pub use uav::{inspection_cost, transit_cost, Element, GridWeigher, UavKind, UavSpec};

/// The weigher implied by the instance's own cost specification.
pub fn weigher_for(inst: &ProblemInstance) -> Box<dyn Weigher + '_> {
    match &inst.costs {
        CostSpec::Table { tables } => Box::new(TableWeigher { inst, tables }),
        CostSpec::Euclidean { distance, execution } => {
            Box::new(EuclideanWeigher { inst, rule: *distance, execution })
        }
        CostSpec::Grid { grid } => Box::new(GridWeigher::new(grid)),
    }
}

fn execution_of(list: &[ExecutionCost], worker: &Worker, to: &Vertex) -> f64 {
    match to.approach() {
        Some(a) => list
            .iter()
            .find(|e| e.worker == worker.id && e.task == a.task && e.approach == a.approach)
            .map_or(0.0, |e| e.value),
        None => 0.0,
    }
}

struct TableWeigher<'a> {
    inst: &'a ProblemInstance,
    tables: &'a [CostTable],
}

impl TableWeigher<'_> {
    fn site(&self, v: &Vertex) -> String {
        match &v.kind {
            VertexKind::Base(id) => self.inst.base(id).and_then(|b| b.site.clone()).unwrap_or_else(|| id.clone()),
            VertexKind::Approach(a) => self
                .inst
                .task(&a.task)
                .and_then(|t| t.approaches.iter().find(|x| x.id == a.approach))
                .and_then(|x| x.site.clone())
                .unwrap_or_else(|| a.to_string()),
        }
    }
}

impl Weigher for TableWeigher<'_> {
    fn weigh(&self, worker: &Worker, from: &Vertex, to: &Vertex) -> Result<Weights> {
        let (sf, st) = (self.site(from), self.site(to));
        let mut out = Weights::new();
        for t in self.tables {
            let matched = t.transitions.iter().find(|tr| {
                (tr.from == "*" || tr.from == sf)
                    && (tr.to == "*" || tr.to == st)
                    && tr.worker.as_ref().map_or(true, |w| *w == worker.id)
            });
            let transition = match matched {
                Some(tr) => tr.value,
                None if sf == st => t.same_site_transition,
                None => t.default_transition,
            };
            out.insert(t.cost_type.clone(), CostPair::new(transition, execution_of(&t.execution, worker, to)));
        }
        Ok(out)
    }
}

struct EuclideanWeigher<'a> {
    inst: &'a ProblemInstance,
    rule: DistanceRule,
    execution: &'a [ExecutionCost],
}

impl EuclideanWeigher<'_> {
    fn position(&self, v: &Vertex) -> Result<[f64; 2]> {
        let p = match &v.kind {
            VertexKind::Base(id) => self.inst.base(id).and_then(|b| b.position),
            VertexKind::Approach(a) => self
                .inst
                .task(&a.task)
                .and_then(|t| t.approaches.iter().find(|x| x.id == a.approach))
                .and_then(|x| x.position),
        };
        p.ok_or_else(|| Error::Cost(format!("{} has no position", v.label)))
    }
}

/// Distance between two points under `rule`.
pub fn distance(rule: DistanceRule, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    match rule {
        DistanceRule::Exact => dx.hypot(dy),
        DistanceRule::Rounded => (dx.hypot(dy) + 0.5).floor(),
        DistanceRule::Att => {
            let r = ((dx * dx + dy * dy) / 10.0).sqrt();
            let t = (r + 0.5).floor();
            if t < r {
                t + 1.0
            } else {
                t
            }
        }
    }
}

impl Weigher for EuclideanWeigher<'_> {
    fn weigh(&self, worker: &Worker, from: &Vertex, to: &Vertex) -> Result<Weights> {
        let speed = worker.param("speed").ok_or_else(|| Error::Cost(format!("worker {} has no speed", worker.id)))?;
        let d = distance(self.rule, self.position(from)?, self.position(to)?);
        let time = CostPair::new(d / speed, execution_of(self.execution, worker, to));
        let mut out = Weights::new();
        for mu in &self.inst.cost_types {
            if *mu == CostType::time() {
                out.insert(mu.clone(), time);
            } else if *mu == CostType::energy() {
                let rate = worker
                    .param("energy_rate")
                    .ok_or_else(|| Error::Cost(format!("worker {} has no energy_rate", worker.id)))?;
                out.insert(mu.clone(), CostPair::new(rate * time.transition, rate * time.execution));
            } else {
                return Err(Error::Cost(format!("straight-line costs cannot price {mu}")));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_rules() {
        assert_eq!(distance(DistanceRule::Exact, [0.0, 0.0], [3.0, 4.0]), 5.0);
        assert_eq!(distance(DistanceRule::Rounded, [0.0, 0.0], [1.0, 1.0]), 1.0);
        assert_eq!(distance(DistanceRule::Rounded, [0.0, 0.0], [1.0, 2.0]), 2.0);
        // sqrt(100/10) = 3.162.. rounds to 3 < r, so ATT bumps it to 4
        assert_eq!(distance(DistanceRule::Att, [0.0, 0.0], [6.0, 8.0]), 4.0);
        assert_eq!(distance(DistanceRule::Att, [0.0, 0.0], [0.0, 0.0]), 0.0);
    }
}
