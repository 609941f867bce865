use milp::{solve_lp, solve_milp, LpStatus, MilpOptions, MilpStatus, Problem, Row, Sense, VarKind};
use proptest::prelude::*;

/// Random pure-binary program plus its exhaustive optimum (None when infeasible).
fn binary_program(n: usize, rows: Vec<(Vec<i32>, i32, u8)>, costs: Vec<i32>) -> (Problem, Option<f64>) {
    let mut p = Problem::new();
    for j in 0..n {
        p.add_var(format!("x{j:02}"), VarKind::Binary, 0.0, 1.0);
    }
    p.objective = costs.iter().enumerate().map(|(j, &c)| (j, c as f64)).collect();
    for (k, (coefs, rhs, sense)) in rows.iter().enumerate() {
        let sense = match sense % 3 {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        let terms = coefs.iter().enumerate().map(|(j, &a)| (j, a as f64)).collect();
        p.add_row(Row::new(format!("r{k}"), terms, sense, *rhs as f64));
    }
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| (mask >> j & 1) as f64).collect();
        if p.max_violation(&x) <= 1e-9 {
            let v = p.objective_value(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    (p, best)
}

fn program_strategy() -> impl Strategy<Value = (usize, Vec<(Vec<i32>, i32, u8)>, Vec<i32>)> {
    (2usize..=8).prop_flat_map(|n| {
        let row = (prop::collection::vec(-4i32..=4, n), -3i32..=6, any::<u8>());
        (Just(n), prop::collection::vec(row, 1..=5), prop::collection::vec(-10i32..=10, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn branch_and_bound_matches_enumeration((n, rows, costs) in program_strategy()) {
        let (p, best) = binary_program(n, rows, costs);
        let sol = solve_milp(&p, &MilpOptions::default()).unwrap();
        match best {
            None => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
            Some(v) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                prop_assert!((sol.objective.unwrap() - v).abs() < 1e-6, "{:?} vs {}", sol.objective, v);
                prop_assert!(sol.max_residual <= 1e-7);
            }
        }
    }

    #[test]
    fn relaxation_bounds_the_integer_optimum((n, rows, costs) in program_strategy()) {
        let (p, best) = binary_program(n, rows, costs);
        let lp = solve_lp(&p, None).unwrap();
        if let Some(v) = best {
            prop_assert_eq!(lp.status, LpStatus::Optimal);
            prop_assert!(lp.objective <= v + 1e-7);
            prop_assert!(lp.max_residual <= 1e-7, "residual {}", lp.max_residual);
        } else if lp.status == LpStatus::Optimal {
            prop_assert!(lp.max_residual <= 1e-7);
        }
    }
}

#[test]
fn deterministic_reports() {
    let (p, _) = binary_program(
        6,
        vec![(vec![3, 2, 2, 1, 4, 1], 5, 1), (vec![1, 1, 1, 1, 1, 1], 3, 0)],
        vec![4, 3, 3, 2, 5, 1],
    );
    let a = solve_milp(&p, &MilpOptions::default()).unwrap();
    let b = solve_milp(&p, &MilpOptions::default()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.nodes, b.nodes);
}
