use lec_milp::{solve_lp, solve_milp, verify_solution, LpStatus, MilpConfig, MilpProblem, Sense, SolveError};
use proptest::prelude::*;

fn sense_of(code: u8) -> Sense {
    match code % 3 {
        0 => Sense::Le,
        1 => Sense::Ge,
        _ => Sense::Eq,
    }
}

/// Minimum over every binary assignment, checking rows directly.
fn enumerate_binary(costs: &[f64], rows: &[(Vec<f64>, Sense, f64)]) -> Option<f64> {
    let n = costs.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|i| f64::from((mask >> i) & 1)).collect();
        let ok = rows.iter().all(|(a, s, b)| {
            let lhs: f64 = a.iter().zip(&x).map(|(a, x)| a * x).sum();
            match s {
                Sense::Le => lhs <= b + 1e-9,
                Sense::Ge => lhs >= b - 1e-9,
                Sense::Eq => (lhs - b).abs() <= 1e-9,
            }
        });
        if ok {
            let obj: f64 = costs.iter().zip(&x).map(|(c, x)| c * x).sum();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

/// 2-D LP oracle: every vertex is the intersection of two active lines.
fn enumerate_vertices(cost: [f64; 2], bounds: [(f64, f64); 2], rows: &[([f64; 2], Sense, f64)]) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = rows.iter().map(|(a, _, b)| (*a, *b)).collect();
    lines.push(([1.0, 0.0], bounds[0].0));
    lines.push(([1.0, 0.0], bounds[0].1));
    lines.push(([0.0, 1.0], bounds[1].0));
    lines.push(([0.0, 1.0], bounds[1].1));
    let feasible = |x: [f64; 2]| {
        let tol = 1e-7;
        x[0] >= bounds[0].0 - tol
            && x[0] <= bounds[0].1 + tol
            && x[1] >= bounds[1].0 - tol
            && x[1] <= bounds[1].1 + tol
            && rows.iter().all(|(a, s, b)| {
                let lhs = a[0] * x[0] + a[1] * x[1];
                match s {
                    Sense::Le => lhs <= b + tol,
                    Sense::Ge => lhs >= b - tol,
                    Sense::Eq => (lhs - b).abs() <= tol,
                }
            })
    };
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (a, b) = (lines[i], lines[j]);
            let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(a.1 * b.0[1] - a.0[1] * b.1) / det, (a.0[0] * b.1 - a.1 * b.0[0]) / det];
            if feasible(x) {
                let obj = cost[0] * x[0] + cost[1] * x[1];
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn binary_problems_match_enumeration(
        costs in prop::collection::vec(-5i32..=5, 2..=7),
        raw_rows in prop::collection::vec((prop::collection::vec(-4i32..=4, 7), 0u8..3, -6i32..=8), 0..=4),
    ) {
        let n = costs.len();
        let costs: Vec<f64> = costs.into_iter().map(f64::from).collect();
        let rows: Vec<(Vec<f64>, Sense, f64)> = raw_rows
            .into_iter()
            .map(|(a, s, b)| (a[..n].iter().map(|&v| f64::from(v)).collect(), sense_of(s), f64::from(b)))
            .collect();
        let mut p = MilpProblem::new("enum");
        let cols: Vec<usize> = costs.iter().enumerate().map(|(i, &c)| p.add_binary(format!("b{i}"), c)).collect();
        for (k, (a, s, b)) in rows.iter().enumerate() {
            p.add_row(format!("r{k}"), cols.iter().zip(a).map(|(&j, &v)| (j, v)), *s, *b);
        }
        let expected = enumerate_binary(&costs, &rows);
        match (solve_milp(&p, &MilpConfig::default()), expected) {
            (Ok(sol), Some(best)) => {
                prop_assert!((sol.objective() - best).abs() < 1e-6, "solver {} oracle {}", sol.objective(), best);
                prop_assert!(verify_solution(&p, sol.values()).is_empty());
                prop_assert_eq!(sol.gap, 0.0);
                prop_assert!(sol.incumbent_trace.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
            }
            (Err(SolveError::Infeasible), None) => {}
            (other, expected) => prop_assert!(false, "solver {:?} oracle {:?}", other.map(|s| s.objective()), expected),
        }
    }

    #[test]
    fn two_dimensional_lps_match_vertex_enumeration(
        cost in (-5.0f64..5.0, -5.0f64..5.0),
        lo in (-5.0f64..0.0, -5.0f64..0.0),
        width in (0.5f64..10.0, 0.5f64..10.0),
        raw_rows in prop::collection::vec(((-3.0f64..3.0, -3.0f64..3.0), 0u8..2, -4.0f64..6.0), 0..=4),
    ) {
        let bounds = [(lo.0, lo.0 + width.0), (lo.1, lo.1 + width.1)];
        let rows: Vec<([f64; 2], Sense, f64)> = raw_rows.into_iter().map(|(a, s, b)| ([a.0, a.1], sense_of(s), b)).collect();
        let mut p = MilpProblem::new("lp2");
        let x = p.add_column("x", bounds[0].0, bounds[0].1, cost.0);
        let y = p.add_column("y", bounds[1].0, bounds[1].1, cost.1);
        for (k, (a, s, b)) in rows.iter().enumerate() {
            p.add_row(format!("r{k}"), [(x, a[0]), (y, a[1])], *s, *b);
        }
        let sol = solve_lp(&p, true).unwrap();
        match enumerate_vertices([cost.0, cost.1], bounds, &rows) {
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() < 1e-6, "solver {} oracle {}", sol.objective, best);
                prop_assert!(verify_solution(&p, &sol.values).is_empty());
                let dual = sol.dual_bound.expect("bounded box gives a finite dual bound");
                prop_assert!(sol.objective >= dual - 1e-6);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}

#[test]
fn identical_problems_give_identical_solutions() {
    let mut p = MilpProblem::new("det");
    let cols: Vec<usize> = (0..6).map(|i| p.add_binary(format!("b{i}"), -1.0 - i as f64 * 0.1)).collect();
    p.add_row("cap", cols.iter().map(|&c| (c, 1.0 + (c % 3) as f64)), Sense::Le, 5.5);
    let a = solve_milp(&p, &MilpConfig::default()).unwrap();
    let b = solve_milp(&p.clone(), &MilpConfig::default()).unwrap();
    assert_eq!(a.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.nodes, b.nodes);
}
