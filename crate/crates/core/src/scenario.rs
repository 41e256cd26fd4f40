//! Baseline, scenario runs and per-participant settlement.
//!
//! Multi-day horizons are cut into independent day windows that share the
//! battery's start/end state of charge. Days are solved concurrently and
//! merged in day order, so reports do not depend on scheduling.

use std::fmt;

use lec_milp::{solve_milp, verify_with_tolerance, MilpConfig, MilpProblem, SolveError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_community, CommunitySpec, ValidationReport, TIMESTAMP_FORMAT};
use crate::model::{
    build, net_generation, participant_shares, realized_coefficients, scenario_label, CommunityModel, ModelError,
    Objective, SharingStrategy, VarKind,
};

pub const COMMUNITY_ROW: &str = "LEC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scenario {
    pub objective: Objective,
    pub sharing: SharingStrategy,
}

impl Scenario {
    pub const fn new(objective: Objective, sharing: SharingStrategy) -> Self {
        Self { objective, sharing }
    }

    /// Every objective × sharing combination.
    pub fn matrix() -> Vec<Scenario> {
        let mut all = Vec::new();
        for objective in [Objective::Price, Objective::Environment] {
            for sharing in [SharingStrategy::FixedCoefficients, SharingStrategy::OptimizeHourlyAllocation] {
                all.push(Scenario::new(objective, sharing));
            }
        }
        all
    }

    pub fn label(&self) -> String {
        scenario_label(self.objective, self.sharing)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub milp: MilpConfig,
    /// Length of each independently optimised window, hours.
    pub window_hours: usize,
    /// Tolerance of the post-solve feasibility check.
    pub verify_tolerance: f64,
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { milp: MilpConfig::default(), window_hours: 24, verify_tolerance: 1e-6, parallel: true }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("community spec is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{}", infeasible_message(.window, .families))]
    Infeasible { window: String, families: Vec<String> },
    #[error("window starting {window} is unbounded")]
    Unbounded { window: String },
    #[error("solver stopped early on window starting {window}: {message}")]
    Solver { window: String, message: String },
    #[error("solution for window starting {window} failed verification:\n{violations}")]
    Verification { window: String, violations: String },
    #[error("participant sets differ: report has {report:?}, baseline has {baseline:?}")]
    ParticipantMismatch { report: Vec<String>, baseline: Vec<String> },
}

fn infeasible_message(window: &str, families: &[String]) -> String {
    if families.is_empty() {
        format!("window starting {window} is infeasible; no single constraint family explains it")
    } else {
        format!("window starting {window} is infeasible; binding constraint families: {}", families.join(", "))
    }
}

/// Cost in € and emissions in t CO2-eq for one participant or the community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figures {
    pub id: String,
    pub cost_eur: f64,
    pub emissions_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub participants: Vec<Figures>,
    pub total: Figures,
}

impl BaselineResult {
    pub fn from_participants(participants: Vec<Figures>) -> Self {
        let total = Figures {
            id: COMMUNITY_ROW.to_string(),
            cost_eur: participants.iter().map(|f| f.cost_eur).sum(),
            emissions_t: participants.iter().map(|f| f.emissions_t).sum(),
        };
        Self { participants, total }
    }

    pub fn rows(&self) -> impl Iterator<Item = &Figures> {
        self.participants.iter().chain(std::iter::once(&self.total))
    }
}

/// Every participant buys its whole load from the grid.
pub fn compute_baseline(spec: &CommunitySpec) -> BaselineResult {
    let participants = spec
        .participants
        .iter()
        .map(|p| {
            let hours = 0..spec.horizon_hours;
            Figures {
                id: p.id.clone(),
                cost_eur: hours.clone().map(|t| p.buy_price[t] * p.load[t]).sum(),
                emissions_t: hours.map(|t| spec.grid_intensity[t] * p.load[t]).sum::<f64>() / 1000.0,
            }
        })
        .collect();
    BaselineResult::from_participants(participants)
}

/// Signed change in percent; undefined for a zero baseline.
pub fn percent_delta(optimized: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (optimized - baseline) / baseline.abs() * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Down,
    Up,
    Unchanged,
    Undefined,
}

impl Direction {
    pub fn of(delta: Option<f64>) -> Self {
        match delta {
            None => Direction::Undefined,
            Some(d) if d < 0.0 => Direction::Down,
            Some(d) if d > 0.0 => Direction::Up,
            Some(_) => Direction::Unchanged,
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Down => "↓",
            Direction::Up => "↑",
            Direction::Unchanged => "=",
            Direction::Undefined => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementRow {
    pub id: String,
    pub cost_eur: f64,
    pub emissions_t: f64,
    pub baseline_cost_eur: f64,
    pub baseline_emissions_t: f64,
    pub cost_delta_pct: Option<f64>,
    pub emissions_delta_pct: Option<f64>,
}

impl SettlementRow {
    pub fn new(id: String, cost_eur: f64, emissions_t: f64, baseline: &Figures) -> Self {
        Self {
            id,
            cost_eur,
            emissions_t,
            baseline_cost_eur: baseline.cost_eur,
            baseline_emissions_t: baseline.emissions_t,
            cost_delta_pct: percent_delta(cost_eur, baseline.cost_eur),
            emissions_delta_pct: percent_delta(emissions_t, baseline.emissions_t),
        }
    }
}

/// Community state for one hour, shaped for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourTrace {
    pub ts: String,
    /// Mean over participants, €/kWh.
    pub price_buy: f64,
    pub price_sell: f64,
    pub gwp_grid: f64,
    pub soc: f64,
    pub charge: f64,
    pub discharge: f64,
    pub baseline_load: f64,
    /// Community grid purchases.
    pub lec_load: f64,
    pub pv: f64,
    pub sold: f64,
    /// Net generation `pv + discharge − charge`.
    pub net_generation: f64,
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
    pub share: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub start: String,
    pub hours: usize,
    pub objective: f64,
    pub nodes: usize,
    pub fast_path: bool,
    /// Objective minus the search's lower bound; 0 once optimality is proven.
    #[serde(default)]
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementReport {
    pub scenario: String,
    pub objective: Objective,
    pub sharing: SharingStrategy,
    /// Sum of window objectives (€ or kg CO2-eq).
    pub objective_value: f64,
    pub participants: Vec<SettlementRow>,
    pub total: SettlementRow,
    pub windows: Vec<WindowSummary>,
    pub hours: Vec<HourTrace>,
}

impl SettlementReport {
    pub fn rows(&self) -> impl Iterator<Item = &SettlementRow> {
        self.participants.iter().chain(std::iter::once(&self.total))
    }

    pub fn participant_ids(&self) -> Vec<String> {
        self.participants.iter().map(|r| r.id.clone()).collect()
    }

    pub fn nodes(&self) -> usize {
        self.windows.iter().map(|w| w.nodes).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub id: String,
    pub cost_delta_pct: Option<f64>,
    pub cost_direction: Direction,
    pub emissions_delta_pct: Option<f64>,
    pub emissions_direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub scenario: String,
    pub participants: Vec<DeltaRow>,
    pub total: DeltaRow,
}

/// Percent changes recomputed from absolute values.
pub fn compare(report: &SettlementReport, baseline: &BaselineResult) -> Result<DeltaReport, ScenarioError> {
    let ids: Vec<String> = baseline.participants.iter().map(|f| f.id.clone()).collect();
    if report.participant_ids() != ids {
        return Err(ScenarioError::ParticipantMismatch { report: report.participant_ids(), baseline: ids });
    }
    let row = |r: &SettlementRow, b: &Figures| {
        let cost = percent_delta(r.cost_eur, b.cost_eur);
        let ghg = percent_delta(r.emissions_t, b.emissions_t);
        DeltaRow {
            id: r.id.clone(),
            cost_delta_pct: cost,
            cost_direction: Direction::of(cost),
            emissions_delta_pct: ghg,
            emissions_direction: Direction::of(ghg),
        }
    };
    Ok(DeltaReport {
        scenario: report.scenario.clone(),
        participants: report.participants.iter().zip(&baseline.participants).map(|(r, b)| row(r, b)).collect(),
        total: row(&report.total, &baseline.total),
    })
}

struct WindowOutcome {
    summary: WindowSummary,
    cost: Vec<f64>,
    emissions_kg: Vec<f64>,
    hours: Vec<HourTrace>,
}

/// Solved and verified model for one window.
pub struct SolvedWindow {
    pub spec: CommunitySpec,
    pub model: CommunityModel,
    pub values: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
    pub fast_path: bool,
    pub gap: f64,
}

fn window_start(spec: &CommunitySpec) -> String {
    spec.start().format(TIMESTAMP_FORMAT).to_string()
}

/// Builds, solves and verifies one window.
pub fn solve_window(
    spec: &CommunitySpec,
    scenario: Scenario,
    options: &RunOptions,
) -> Result<SolvedWindow, ScenarioError> {
    let model = build(spec, scenario.objective, scenario.sharing)?;
    let window = window_start(spec);
    let solution = match solve_milp(&model.problem, &options.milp) {
        Ok(s) => s,
        Err(SolveError::Infeasible) => {
            return Err(ScenarioError::Infeasible { window, families: diagnose(&model.problem, &options.milp) })
        }
        Err(SolveError::Unbounded) => return Err(ScenarioError::Unbounded { window }),
        // A configured limit stopped the search: keep the best schedule found.
        Err(SolveError::LimitReached { incumbent: Some(best), lower_bound, nodes, .. }) => {
            log::warn!(
                "window {window}: search stopped after {nodes} nodes, objective {:.6} vs bound {lower_bound:.6}",
                best.objective()
            );
            *best
        }
        Err(e) => return Err(ScenarioError::Solver { window, message: e.to_string() }),
    };
    let report = verify_with_tolerance(&model.problem, solution.values(), options.verify_tolerance);
    if !report.is_empty() {
        return Err(ScenarioError::Verification { window, violations: report.to_string() });
    }
    Ok(SolvedWindow {
        spec: spec.clone(),
        values: solution.values().to_vec(),
        objective: solution.objective(),
        nodes: solution.nodes,
        fast_path: solution.fast_path,
        gap: solution.gap,
        model,
    })
}

/// Solves every window of the horizon and settles costs and emissions per
/// participant.
pub fn run_scenario(
    spec: &CommunitySpec,
    scenario: Scenario,
    options: &RunOptions,
) -> Result<SettlementReport, ScenarioError> {
    let report = validate_community(spec);
    if !report.is_empty() {
        return Err(ScenarioError::Invalid(report));
    }
    let window = options.window_hours.max(1);
    let windows: Vec<CommunitySpec> =
        (0..spec.horizon_hours).step_by(window).map(|offset| spec.window(offset, window)).collect();
    let run = |w: &CommunitySpec| solve_window(w, scenario, options).map(|solved| settle_window(&solved));
    let outcomes: Vec<WindowOutcome> = if options.parallel {
        windows.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        windows.iter().map(run).collect::<Result<_, _>>()?
    };

    let baseline = compute_baseline(spec);
    let n = spec.participants.len();
    let mut cost = vec![0.0; n];
    let mut emissions_kg = vec![0.0; n];
    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut hours = Vec::with_capacity(spec.horizon_hours);
    for outcome in outcomes {
        for p in 0..n {
            cost[p] += outcome.cost[p];
            emissions_kg[p] += outcome.emissions_kg[p];
        }
        summaries.push(outcome.summary);
        hours.extend(outcome.hours);
    }
    let participants: Vec<SettlementRow> = (0..n)
        .map(|p| SettlementRow::new(spec.participants[p].id.clone(), cost[p], emissions_kg[p] / 1000.0, &baseline.participants[p]))
        .collect();
    let total = SettlementRow::new(
        COMMUNITY_ROW.to_string(),
        participants.iter().map(|r| r.cost_eur).sum(),
        participants.iter().map(|r| r.emissions_t).sum(),
        &baseline.total,
    );
    Ok(SettlementReport {
        scenario: scenario.label(),
        objective: scenario.objective,
        sharing: scenario.sharing,
        objective_value: summaries.iter().map(|s| s.objective).sum(),
        participants,
        total,
        windows: summaries,
        hours,
    })
}

/// Runs several scenarios; results keep the input order.
pub fn run_matrix(
    spec: &CommunitySpec,
    scenarios: &[Scenario],
    options: &RunOptions,
) -> Vec<Result<SettlementReport, ScenarioError>> {
    scenarios.par_iter().map(|&s| run_scenario(spec, s, options)).collect()
}

fn settle_window(solved: &SolvedWindow) -> WindowOutcome {
    let SolvedWindow { spec, model, values, .. } = solved;
    let index = &model.index;
    let bess = &spec.bess;
    let n = index.participants();
    let theta = net_generation(spec, index, values);
    let shares = participant_shares(spec, index, values);
    let betas = realized_coefficients(spec, index, values);

    let mut cost = vec![0.0; n];
    let mut emissions_kg = vec![0.0; n];
    let mut hours = Vec::with_capacity(index.hours());
    for t in 0..index.hours() {
        let ch = values[index.hour(VarKind::SigmaCh, t)];
        let dis = values[index.hour(VarKind::SigmaDis, t)];
        let pv = spec.pv.generation[t];
        let battery_cost = bess.calendar_cost_per_hour + bess.throughput_cost_per_kwh * (ch + dis);
        let shared_emissions = spec.pv.emission_factor * pv + bess.emission_factor_discharge * dis;
        let buy: Vec<f64> = (0..n).map(|p| values[index.at(VarKind::ChiBuy, t, p)]).collect();
        let sell: Vec<f64> = (0..n).map(|p| values[index.at(VarKind::ChiSell, t, p)]).collect();
        for (p, participant) in spec.participants.iter().enumerate() {
            cost[p] += participant.buy_price[t] * buy[p] - participant.sell_price[t] * sell[p] + betas[t][p] * battery_cost;
            emissions_kg[p] += spec.grid_intensity[t] * buy[p] + betas[t][p] * shared_emissions;
        }
        let mean = |f: &dyn Fn(usize) -> f64| (0..n).map(f).sum::<f64>() / n as f64;
        hours.push(HourTrace {
            ts: spec.grid_intensity.timestamp(t).format(TIMESTAMP_FORMAT).to_string(),
            price_buy: mean(&|p| spec.participants[p].buy_price[t]),
            price_sell: mean(&|p| spec.participants[p].sell_price[t]),
            gwp_grid: spec.grid_intensity[t],
            soc: values[index.hour(VarKind::Soc, t)],
            charge: ch,
            discharge: dis,
            baseline_load: spec.participants.iter().map(|p| p.load[t]).sum(),
            lec_load: buy.iter().sum(),
            pv,
            sold: sell.iter().sum(),
            net_generation: theta[t],
            buy,
            sell,
            share: shares[t].clone(),
            beta: betas[t].clone(),
        });
    }
    WindowOutcome {
        summary: WindowSummary {
            start: window_start(spec),
            hours: index.hours(),
            objective: solved.objective,
            nodes: solved.nodes,
            fast_path: solved.fast_path,
            gap: solved.gap,
        },
        cost,
        emissions_kg,
        hours,
    }
}

/// Constraint family: row-name prefixes plus column kinds whose bounds
/// restate the same limit.
struct Family {
    label: &'static str,
    rows: &'static [&'static str],
    columns: &'static [&'static str],
}

const FAMILIES: &[Family] = &[
    Family { label: "energy balance", rows: &["bal_"], columns: &[] },
    Family { label: "buy/sell exclusivity", rows: &["excl_"], columns: &[] },
    Family { label: "import limit", rows: &["imp_"], columns: &["chi_buy_"] },
    Family { label: "export limit", rows: &["exp_"], columns: &["chi_sell_"] },
    Family { label: "battery power", rows: &["chcap_", "discap_", "bexcl_"], columns: &["sigma_ch_", "sigma_dis_"] },
    Family { label: "SOC dynamics", rows: &["soc_"], columns: &[] },
    Family { label: "SOC limits", rows: &[], columns: &["soc_"] },
    Family { label: "terminal SOC", rows: &["soc_end"], columns: &[] },
    Family { label: "sharing", rows: &["share_", "gpos_", "gneg_"], columns: &["alloc_"] },
    Family { label: "compensation cap", rows: &["comp_"], columns: &[] },
];

/// Families whose removal alone restores feasibility.
fn diagnose(problem: &MilpProblem, config: &MilpConfig) -> Vec<String> {
    let probe = MilpConfig { node_limit: Some(500), ..config.clone() };
    FAMILIES
        .iter()
        .filter(|family| {
            let mut relaxed = problem.clone();
            let before = relaxed.num_rows();
            relaxed.retain_rows(|row| !family.rows.iter().any(|prefix| row.name.starts_with(prefix)));
            let mut changed = relaxed.num_rows() != before;
            for j in 0..relaxed.num_columns() {
                let column = relaxed.column(j);
                if !column.binary && family.columns.iter().any(|prefix| column.name.starts_with(prefix)) {
                    relaxed.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
                    changed = true;
                }
            }
            changed
                && match solve_milp(&relaxed, &probe) {
                    Ok(_) => true,
                    Err(SolveError::Unbounded) => true,
                    Err(SolveError::LimitReached { incumbent, .. }) => incumbent.is_some(),
                    Err(_) => false,
                }
        })
        .map(|family| family.label.to_string())
        .collect()
}
