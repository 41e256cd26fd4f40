//! Report layout checked against committed golden files built from the
//! case-study reference figures. Set UPDATE_GOLDEN=1 to rewrite them.

use std::fs;
use std::path::PathBuf;

use lec_core::report::{
    baseline_csv, baseline_table, settlement_csv, settlement_from_json, settlement_table, to_json, trace_csv,
};
use lec_core::scenario::{SettlementRow, WindowSummary, COMMUNITY_ROW};
use lec_core::{compare, BaselineResult, Figures, Objective, SettlementReport, SharingStrategy};

const IDS: [&str; 4] = ["B1", "B2", "B3", "B4"];
const BASELINE: [(f64, f64); 4] = [(13_414.72, 18.81), (6_004.96, 7.04), (390.46, 0.47), (30_326.32, 35.63)];
const PRICE: [(f64, f64); 4] = [(9_529.01, 21.65), (4_301.87, 11.15), (184.17, 5.64), (24_658.09, 36.14)];
const ENVIRONMENT: [(f64, f64); 4] = [(10_131.23, 16.82), (4_590.18, 7.30), (210.17, 2.28), (25_757.76, 31.88)];

fn figures(id: &str, (cost, ghg): (f64, f64)) -> Figures {
    Figures { id: id.to_string(), cost_eur: cost, emissions_t: ghg }
}

fn baseline() -> BaselineResult {
    BaselineResult::from_participants(IDS.iter().zip(BASELINE).map(|(id, v)| figures(id, v)).collect())
}

fn report(objective: Objective, values: [(f64, f64); 4]) -> SettlementReport {
    let base = baseline();
    let participants: Vec<SettlementRow> = IDS
        .iter()
        .zip(values)
        .zip(&base.participants)
        .map(|((id, (c, e)), b)| SettlementRow::new(id.to_string(), c, e, b))
        .collect();
    let total = SettlementRow::new(
        COMMUNITY_ROW.to_string(),
        participants.iter().map(|r| r.cost_eur).sum(),
        participants.iter().map(|r| r.emissions_t).sum(),
        &base.total,
    );
    SettlementReport {
        scenario: format!("{}-static", objective.as_str()),
        objective,
        sharing: SharingStrategy::FixedCoefficients,
        objective_value: total.cost_eur,
        participants,
        total,
        windows: vec![WindowSummary {
            start: "2022-03-03T00:00:00".into(),
            hours: 24,
            objective: 0.0,
            nodes: 1,
            fast_path: true,
            gap: 0.0,
        }],
        hours: Vec::new(),
    }
}

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}");
}

#[test]
fn baseline_totals_match_reference_row() {
    let b = baseline();
    // Building rows sum one cent and 0.01 t above the reference totals (rounded inputs).
    assert!((b.total.cost_eur - 50_136.46).abs() < 1e-6);
    assert!((b.total.emissions_t - 61.95).abs() < 1e-6);
    let table = baseline_table(&b);
    assert!(table.contains("50 136.46"));
    assert!(table.contains("13 414.72"));
}

#[test]
fn price_totals_reproduce_reference_deltas() {
    let r = report(Objective::Price, PRICE);
    assert!((r.total.cost_eur - 38_673.14).abs() < 1e-6);
    let d = compare(&r, &baseline()).unwrap();
    let cost = d.total.cost_delta_pct.unwrap();
    assert!((cost - -22.9).abs() < 0.05, "{cost}");
    let csv = settlement_csv(&r);
    assert!(csv.lines().last().unwrap().starts_with("LEC,38673.14,-22.9,↓,74.58,"));
    // Per-building deltas recompute from absolutes within rounding of the table.
    for (row, expected) in d.participants.iter().zip([-29.0, -28.4, -52.8, -18.7]) {
        assert!((row.cost_delta_pct.unwrap() - expected).abs() < 0.05, "{}", row.id);
    }
}

#[test]
fn environment_emission_delta_is_minus_five_point_nine() {
    let base = Figures { id: COMMUNITY_ROW.into(), cost_eur: 0.0, emissions_t: 61.94 };
    let row = SettlementRow::new(COMMUNITY_ROW.into(), 40_689.35, 58.27, &base);
    assert!((row.emissions_delta_pct.unwrap() - -5.9).abs() < 0.05);
    assert_eq!(row.cost_delta_pct, None, "zero baseline cost leaves the delta undefined");
    let r = report(Objective::Environment, ENVIRONMENT);
    assert!((r.total.cost_eur - 40_689.34).abs() < 1e-6);
    assert!((r.total.emissions_t - 58.28).abs() < 1e-6);
}

#[test]
fn golden_files() {
    golden("baseline.csv", &baseline_csv(&baseline()));
    golden("baseline.txt", &baseline_table(&baseline()));
    let price = report(Objective::Price, PRICE);
    golden("price-static.csv", &settlement_csv(&price));
    golden("price-static.txt", &settlement_table(&price));
    golden("price-static.json", &to_json(&price));
    let environment = report(Objective::Environment, ENVIRONMENT);
    golden("environment-static.csv", &settlement_csv(&environment));
    golden("environment-static.txt", &settlement_table(&environment));
}

#[test]
fn json_round_trip() {
    let r = report(Objective::Environment, ENVIRONMENT);
    assert_eq!(settlement_from_json(&to_json(&r)).unwrap(), r);
}

#[test]
fn rows_are_four_buildings_plus_totals() {
    let csv = settlement_csv(&report(Objective::Price, PRICE));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "building,cost_eur,cost_delta_pct,cost_direction,ghg_t,ghg_delta_pct,ghg_direction");
    let ids: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["B1", "B2", "B3", "B4", "LEC"]);
    assert_eq!(trace_csv(&report(Objective::Price, PRICE)).trim_end(), lines_header_trace());
}

fn lines_header_trace() -> &'static str {
    "ts,price_buy,price_sell,gwp_grid,soc,charge,discharge,baseline_load,lec_load,pv,sold"
}
