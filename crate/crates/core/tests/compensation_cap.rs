//! Days with enough PV that the surplus-compensation cap binds.

use lec_core::fixture;
use lec_core::ingest::RunConfig;
use lec_core::scenario::{solve_window, RunOptions, Scenario};
use lec_core::{build, CommunitySpec, Objective, SharingStrategy};
use lec_milp::{solve_milp, MilpConfig};

/// HiGHS optimum of the static price model for fixture day 0 with PV tripled.
const TRIPLED_PV_OPTIMUM: f64 = 85.58925793890458;

fn day0_with_pv(scale: f64, cap: bool) -> CommunitySpec {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::load(&fixture::write(dir.path()).unwrap()).unwrap();
    let mut day = config.load_inputs().unwrap().spec.window(0, 24);
    day.pv.generation = day.pv.generation.map(|v| v * scale);
    day.compensation_cap_enabled = cap;
    day
}

fn optimum(spec: &CommunitySpec) -> f64 {
    let model = build(spec, Objective::Price, SharingStrategy::FixedCoefficients).unwrap();
    solve_milp(&model.problem, &MilpConfig::default()).unwrap().objective()
}

const PRICE_STATIC: Scenario = Scenario { objective: Objective::Price, sharing: SharingStrategy::FixedCoefficients };

fn cap_rows_hold(spec: &CommunitySpec, values: &[f64], problem: &lec_milp::MilpProblem) {
    for participant in &spec.participants {
        let row = &problem.rows()[problem.row_index(&format!("comp_{}", participant.id)).unwrap()];
        assert!(row.activity(values) <= 1e-6, "{}: {}", participant.id, row.activity(values));
    }
}

#[test]
fn binding_cap_raises_the_bill_and_is_proven_optimal() {
    let free = optimum(&day0_with_pv(2.8, false));
    let capped = day0_with_pv(2.8, true);
    let solved = solve_window(&capped, PRICE_STATIC, &RunOptions::default()).unwrap();
    assert!(solved.objective > free + 0.1, "{} vs uncapped {free}", solved.objective);
    assert_eq!(solved.gap, 0.0);
    cap_rows_hold(&capped, &solved.values, &solved.model.problem);
}

#[test]
fn limited_search_keeps_a_feasible_schedule() {
    let capped = day0_with_pv(3.0, true);
    let mut options = RunOptions::default();
    options.milp.node_limit = Some(50);
    let solved = solve_window(&capped, PRICE_STATIC, &options).unwrap();
    cap_rows_hold(&capped, &solved.values, &solved.model.problem);
    assert!(solved.objective >= TRIPLED_PV_OPTIMUM - 1e-6);
    assert!(solved.gap > 0.0);
    let bound = solved.objective - solved.gap;
    assert!(bound <= TRIPLED_PV_OPTIMUM + 1e-6, "bound {bound} above the optimum");
    // The first schedule found is within a few percent of the optimum.
    assert!(solved.objective < TRIPLED_PV_OPTIMUM * 1.05, "{}", solved.objective);
}
