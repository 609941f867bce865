//! Two workers assembling a guitar at three workbenches.

use crate::model::*;

const HOUR: f64 = 3600.0;
const MOVE: f64 = 5.0;

/// Worker `w_a` cuts and finishes the body (T1, T2) at WB1, `w_b` the neck
/// (T3, T4) at WB2; either may glue (T5, two approaches) and finish (T6)
/// at WB3.
///
/// Moving between workbenches, or from the base to one, takes 5 s. Staying
/// at a workbench and returning to the base are free.
pub fn build_guitar() -> ProblemInstance {
    let bench = |approach: &str, site: &str| Approach {
        id: approach.into(),
        site: Some(site.into()),
        position: None,
    };
    let task = |id: &str, approaches: Vec<Approach>| Task { id: id.into(), approaches, mandatory: true };
    let tasks = vec![
        task("T1", vec![bench("A", "WB1")]),
        task("T2", vec![bench("A", "WB1")]),
        task("T3", vec![bench("A", "WB2")]),
        task("T4", vec![bench("A", "WB2")]),
        task("T5", vec![bench("A", "WB3"), bench("B", "WB3")]),
        task("T6", vec![bench("A", "WB3")]),
    ];
    let durations: [(&str, &str, &str, f64); 10] = [
        ("w_a", "T1", "A", 1.0),
        ("w_a", "T2", "A", 1.0),
        ("w_a", "T5", "A", 0.5),
        ("w_a", "T5", "B", 3.0),
        ("w_a", "T6", "A", 1.0),
        ("w_b", "T3", "A", 2.0),
        ("w_b", "T4", "A", 2.0),
        ("w_b", "T5", "A", 1.0),
        ("w_b", "T5", "B", 3.0),
        ("w_b", "T6", "A", 2.0),
    ];
    let workers = ["w_a", "w_b"]
        .iter()
        .map(|w| Worker {
            id: w.to_string(),
            base: "base".into(),
            compatibility: durations
                .iter()
                .filter(|d| d.0 == *w)
                .map(|d| ApproachRef::new(d.1, d.2))
                .collect(),
            params: Default::default(),
        })
        .collect();
    let execution = durations
        .iter()
        .map(|&(w, t, a, h)| ExecutionCost { worker: w.into(), task: t.into(), approach: a.into(), value: h * HOUR })
        .collect();
    let prec = |a: &str, b: &str| Precedence { before: a.into(), after: b.into() };

    ProblemInstance {
        name: "guitar".into(),
        cost_types: vec![CostType::time()],
        bases: vec![Base { id: "base".into(), site: None, position: None }],
        tasks,
        workers,
        order: vec![],
        precedence: vec![prec("T1", "T2"), prec("T3", "T4"), prec("T2", "T5"), prec("T4", "T5"), prec("T5", "T6")],
        windows: vec![],
        waiting: false,
        energy_budget: false,
        costs: CostSpec::Table {
            tables: vec![CostTable {
                cost_type: CostType::time(),
                default_transition: MOVE,
                same_site_transition: 0.0,
                transitions: vec![SiteTransition { from: "*".into(), to: "base".into(), worker: None, value: 0.0 }],
                execution,
            }],
        },
        seed: None,
    }
}
