mod common;

use hmwtpp::instances::{grid_to_instance, toomany, Selection};
use hmwtpp::routes::brute_force;
use hmwtpp::SecMode;

use common::{same_optimum, solve_mode, tight_grid, worker_energy};

#[test]
fn slower_uav_stays_home() {
    let grid = toomany();
    let (inst, _) = grid_to_instance(&grid, &Selection::all(&grid)).unwrap();
    for sec in [SecMode::DfjLazy, SecMode::Mtz] {
        let out = solve_mode(&inst, sec);
        let plan = out.plan.unwrap();
        assert!(!plan.worker("slow").unwrap().active, "{sec}");
        assert_eq!(plan.workers.iter().filter(|w| w.active).count(), 4);
    }
}


#[test]
fn energy_budget_splits_or_refuses() {
    let mut outcomes = Vec::new();
    for (seed, margin) in [(1, 1.2), (2, 1.5), (3, 1.8), (4, 3.0)] {
        let inst = tight_grid(seed, margin);
        let out = solve_mode(&inst, SecMode::DfjLazy);
        let brute = brute_force(&inst, &out.graph, &out.options).unwrap().map(|b| b.objective);
        assert!(same_optimum(out.optimum(), brute, 1e-6), "seed {seed}: {:?} vs {brute:?}", out.optimum());
        if out.report.solution.is_some() {
            for (w, used) in worker_energy(&out).into_iter().enumerate() {
                assert!(used <= 1.0 + 1e-7, "seed {seed}: worker {w} uses {used}");
            }
            let active = out.plan.as_ref().unwrap().workers.iter().filter(|w| w.active).count();
            assert_eq!(active, 2, "seed {seed}: one UAV cannot cover the tour");
        }
        outcomes.push(out.optimum().is_some());
    }
    // both outcomes occur
    assert!(outcomes.contains(&true) && outcomes.contains(&false), "{outcomes:?}");
}
