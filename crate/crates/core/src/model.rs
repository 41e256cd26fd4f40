//! Community scheduling MILP.
//!
//! Columns are laid out kind-major: every `(kind, t, p)` maps to
//! `base(kind) + t * P + p` (or `base(kind) + t` for per-hour kinds), so the
//! index is a bijection computable in both directions.

use std::fmt;

use lec_milp::{MilpProblem, ProblemError, RoundingHint, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_community, CommunitySpec, ValidationReport, TIMESTAMP_FORMAT};

/// |θ| below this leaves the hourly coefficient undefined.
pub const THETA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Price,
    Environment,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Price => "price",
            Objective::Environment => "environment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SharingStrategy {
    /// Coefficients are data (static, or fixed hourly series).
    FixedCoefficients,
    /// Hourly allocation of net generation is a decision.
    OptimizeHourlyAllocation,
}

impl SharingStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SharingStrategy::FixedCoefficients => "static",
            SharingStrategy::OptimizeHourlyAllocation => "variable",
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("community spec is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    ChiBuy,
    ChiSell,
    DeltaBuy,
    DeltaSell,
    SigmaCh,
    SigmaDis,
    DeltaCh,
    DeltaDis,
    Soc,
    Alloc,
    ThetaPos,
}

impl VarKind {
    pub const ALL: [VarKind; 11] = [
        VarKind::ChiBuy,
        VarKind::ChiSell,
        VarKind::DeltaBuy,
        VarKind::DeltaSell,
        VarKind::SigmaCh,
        VarKind::SigmaDis,
        VarKind::DeltaCh,
        VarKind::DeltaDis,
        VarKind::Soc,
        VarKind::Alloc,
        VarKind::ThetaPos,
    ];

    pub fn per_participant(self) -> bool {
        matches!(self, VarKind::ChiBuy | VarKind::ChiSell | VarKind::DeltaBuy | VarKind::DeltaSell | VarKind::Alloc)
    }

    pub fn is_binary(self) -> bool {
        matches!(self, VarKind::DeltaBuy | VarKind::DeltaSell | VarKind::DeltaCh | VarKind::DeltaDis | VarKind::ThetaPos)
    }

    pub fn prefix(self) -> &'static str {
        match self {
            VarKind::ChiBuy => "chi_buy",
            VarKind::ChiSell => "chi_sell",
            VarKind::DeltaBuy => "delta_buy",
            VarKind::DeltaSell => "delta_sell",
            VarKind::SigmaCh => "sigma_ch",
            VarKind::SigmaDis => "sigma_dis",
            VarKind::DeltaCh => "delta_ch",
            VarKind::DeltaDis => "delta_dis",
            VarKind::Soc => "soc",
            VarKind::Alloc => "alloc",
            VarKind::ThetaPos => "theta_pos",
        }
    }

    fn optimized_sharing_only(self) -> bool {
        matches!(self, VarKind::Alloc | VarKind::ThetaPos)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableIndex {
    hours: usize,
    participant_ids: Vec<String>,
    allocation: bool,
}

impl VariableIndex {
    pub fn new(hours: usize, participant_ids: Vec<String>, allocation: bool) -> Self {
        Self { hours, participant_ids, allocation }
    }

    pub fn hours(&self) -> usize {
        self.hours
    }

    pub fn participants(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn participant_ids(&self) -> &[String] {
        &self.participant_ids
    }

    pub fn has_allocation(&self) -> bool {
        self.allocation
    }

    pub fn contains(&self, kind: VarKind) -> bool {
        self.allocation || !kind.optimized_sharing_only()
    }

    fn block(&self, kind: VarKind) -> usize {
        if kind.per_participant() {
            self.hours * self.participants()
        } else {
            self.hours
        }
    }

    fn base(&self, kind: VarKind) -> usize {
        VarKind::ALL.iter().take_while(|&&k| k != kind).filter(|&&k| self.contains(k)).map(|&k| self.block(k)).sum()
    }

    pub fn num_columns(&self) -> usize {
        VarKind::ALL.iter().filter(|&&k| self.contains(k)).map(|&k| self.block(k)).sum()
    }

    /// Column of a per-participant kind.
    pub fn at(&self, kind: VarKind, t: usize, p: usize) -> usize {
        debug_assert!(kind.per_participant() && self.contains(kind));
        debug_assert!(t < self.hours && p < self.participants());
        self.base(kind) + t * self.participants() + p
    }

    /// Column of a per-hour kind.
    pub fn hour(&self, kind: VarKind, t: usize) -> usize {
        debug_assert!(!kind.per_participant() && self.contains(kind));
        debug_assert!(t < self.hours);
        self.base(kind) + t
    }

    /// Inverse of [`at`](Self::at) / [`hour`](Self::hour).
    pub fn decode(&self, column: usize) -> Option<(VarKind, usize, Option<usize>)> {
        let mut base = 0;
        for kind in VarKind::ALL.into_iter().filter(|&k| self.contains(k)) {
            let size = self.block(kind);
            if column < base + size {
                let offset = column - base;
                return Some(if kind.per_participant() {
                    (kind, offset / self.participants(), Some(offset % self.participants()))
                } else {
                    (kind, offset, None)
                });
            }
            base += size;
        }
        None
    }

    pub fn name(&self, kind: VarKind, t: usize, p: Option<usize>) -> String {
        match p {
            Some(p) => format!("{}_{t}_{}", kind.prefix(), self.participant_ids[p]),
            None => format!("{}_{t}", kind.prefix()),
        }
    }
}

/// Closed-form problem size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub columns: usize,
    pub rows: usize,
    pub binaries: usize,
}

impl Dimensions {
    pub fn expected(hours: usize, participants: usize, strategy: SharingStrategy, compensation_cap: bool) -> Self {
        let (t, p) = (hours, participants);
        let mut d = Dimensions { columns: 4 * t * p + 5 * t, rows: 4 * t * p + 4 * t + 1, binaries: t * (2 + 2 * p) };
        if strategy == SharingStrategy::OptimizeHourlyAllocation {
            d.columns += t * p + t;
            d.rows += t + 2 * t * p;
            d.binaries += t;
        }
        if compensation_cap {
            d.rows += p;
        }
        d
    }
}

#[derive(Debug, Clone)]
pub struct CommunityModel {
    pub problem: MilpProblem,
    pub index: VariableIndex,
    pub objective: Objective,
    pub sharing: SharingStrategy,
}

impl CommunityModel {
    pub fn dimensions(&self) -> Dimensions {
        Dimensions {
            columns: self.problem.num_columns(),
            rows: self.problem.num_rows(),
            binaries: self.problem.num_binaries(),
        }
    }
}

pub fn scenario_label(objective: Objective, sharing: SharingStrategy) -> String {
    format!("{}-{}", objective.as_str(), sharing.as_str())
}

/// Builds the full model for one scenario.
pub fn build(spec: &CommunitySpec, objective: Objective, sharing: SharingStrategy) -> Result<CommunityModel, ModelError> {
    let report = validate_community(spec);
    if !report.is_empty() {
        return Err(ModelError::Invalid(report));
    }
    let (mut problem, index) = allocate_columns(spec, sharing);
    add_energy_balance(&mut problem, &index, spec);
    add_exclusivity(&mut problem, &index, spec);
    add_battery(&mut problem, &index, spec);
    add_sharing(&mut problem, &index, spec);
    if spec.compensation_cap_enabled {
        add_compensation_cap(&mut problem, &index, spec);
    }
    match objective {
        Objective::Price => set_price_objective(&mut problem, &index, spec),
        Objective::Environment => set_environment_objective(&mut problem, &index, spec),
    }
    problem.check()?;
    Ok(CommunityModel { problem, index, objective, sharing })
}

/// Creates every column with its bounds, zero cost and rounding hints.
pub fn allocate_columns(spec: &CommunitySpec, sharing: SharingStrategy) -> (MilpProblem, VariableIndex) {
    let index = VariableIndex::new(
        spec.horizon_hours,
        spec.participant_ids(),
        sharing == SharingStrategy::OptimizeHourlyAllocation,
    );
    let mut problem = MilpProblem::new(sharing.as_str());
    let (hours, n) = (index.hours(), index.participants());
    let b = &spec.bess;

    for kind in VarKind::ALL.into_iter().filter(|&k| index.contains(k)) {
        for t in 0..hours {
            let pv = spec.pv.generation[t];
            let participants: Vec<Option<usize>> =
                if kind.per_participant() { (0..n).map(Some).collect() } else { vec![None] };
            for p in participants {
                let name = index.name(kind, t, p);
                if kind.is_binary() {
                    problem.add_binary(name, 0.0);
                    continue;
                }
                let (lo, hi) = match (kind, p) {
                    (VarKind::ChiBuy, Some(p)) => (0.0, spec.participants[p].import_limit(t)),
                    (VarKind::ChiSell, Some(p)) => (0.0, spec.participants[p].export_limit(t)),
                    (VarKind::SigmaCh, _) => (0.0, b.p_ch_max),
                    (VarKind::SigmaDis, _) => (0.0, b.p_dis_max),
                    (VarKind::Soc, _) => (b.soc_min, b.soc_max),
                    (VarKind::Alloc, _) => ((pv - b.p_ch_max).min(0.0), pv + b.p_dis_max),
                    _ => unreachable!("continuous kinds are covered"),
                };
                problem.add_column(name, lo, hi, 0.0);
            }
        }
    }
    debug_assert_eq!(problem.num_columns(), index.num_columns());

    for t in 0..hours {
        for p in 0..n {
            let buy = index.at(VarKind::DeltaBuy, t, p);
            let sell = index.at(VarKind::DeltaSell, t, p);
            problem.set_hint(buy, RoundingHint::Switch { flow: index.at(VarKind::ChiBuy, t, p) });
            problem.set_hint(sell, RoundingHint::Switch { flow: index.at(VarKind::ChiSell, t, p) });
            problem.add_exclusive_pair(buy, sell);
        }
        let ch = index.hour(VarKind::DeltaCh, t);
        let dis = index.hour(VarKind::DeltaDis, t);
        problem.set_hint(ch, RoundingHint::Switch { flow: index.hour(VarKind::SigmaCh, t) });
        problem.set_hint(dis, RoundingHint::Switch { flow: index.hour(VarKind::SigmaDis, t) });
        problem.add_exclusive_pair(ch, dis);
        if index.has_allocation() {
            problem.set_hint(
                index.hour(VarKind::ThetaPos, t),
                RoundingHint::Sign {
                    terms: vec![(index.hour(VarKind::SigmaDis, t), 1.0), (index.hour(VarKind::SigmaCh, t), -1.0)],
                    constant: spec.pv.generation[t],
                },
            );
        }
    }
    (problem, index)
}

/// `β(pv + dis − ch) + χbuy − χsell = load`, or `g + χbuy − χsell = load`
/// when allocations are decisions.
pub fn add_energy_balance(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec) {
    for t in 0..index.hours() {
        let pv = spec.pv.generation[t];
        for (p, participant) in spec.participants.iter().enumerate() {
            let flows = [(index.at(VarKind::ChiBuy, t, p), 1.0), (index.at(VarKind::ChiSell, t, p), -1.0)];
            let load = participant.load[t];
            let name = format!("bal_{t}_{}", participant.id);
            if index.has_allocation() {
                let terms = flows.into_iter().chain([(index.at(VarKind::Alloc, t, p), 1.0)]);
                problem.add_row(name, terms, Sense::Eq, load);
            } else {
                let beta = spec.sharing.coefficient(t, p);
                let terms = flows.into_iter().chain([
                    (index.hour(VarKind::SigmaDis, t), beta),
                    (index.hour(VarKind::SigmaCh, t), -beta),
                ]);
                problem.add_row(name, terms, Sense::Eq, load - beta * pv);
            }
        }
    }
}

/// Buy/sell exclusivity and contracted-power limits with the active tariff
/// period's power as big-M.
pub fn add_exclusivity(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec) {
    for t in 0..index.hours() {
        for (p, participant) in spec.participants.iter().enumerate() {
            let id = &participant.id;
            let (buy, sell) = (index.at(VarKind::ChiBuy, t, p), index.at(VarKind::ChiSell, t, p));
            let (d_buy, d_sell) = (index.at(VarKind::DeltaBuy, t, p), index.at(VarKind::DeltaSell, t, p));
            problem.add_row(format!("excl_{t}_{id}"), [(d_buy, 1.0), (d_sell, 1.0)], Sense::Le, 1.0);
            problem.add_row(
                format!("imp_{t}_{id}"),
                [(buy, 1.0), (d_buy, -participant.import_limit(t))],
                Sense::Le,
                0.0,
            );
            problem.add_row(
                format!("exp_{t}_{id}"),
                [(sell, 1.0), (d_sell, -participant.export_limit(t))],
                Sense::Le,
                0.0,
            );
        }
    }
}

/// SOC dynamics, terminal condition and charge/discharge enabling.
pub fn add_battery(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec) {
    let b = &spec.bess;
    let hours = index.hours();
    for t in 0..hours {
        let soc = index.hour(VarKind::Soc, t);
        let ch = index.hour(VarKind::SigmaCh, t);
        let dis = index.hour(VarKind::SigmaDis, t);
        let mut terms = vec![(soc, 1.0), (ch, -b.eta_ch), (dis, 1.0 / b.eta_dis)];
        let rhs = if t == 0 {
            b.soc_initial
        } else {
            terms.push((index.hour(VarKind::Soc, t - 1), -1.0));
            0.0
        };
        problem.add_row(format!("soc_{t}"), terms, Sense::Eq, rhs);
    }
    problem.add_row("soc_end", [(index.hour(VarKind::Soc, hours - 1), 1.0)], Sense::Eq, b.soc_final);
    for t in 0..hours {
        let (ch, dis) = (index.hour(VarKind::SigmaCh, t), index.hour(VarKind::SigmaDis, t));
        let (d_ch, d_dis) = (index.hour(VarKind::DeltaCh, t), index.hour(VarKind::DeltaDis, t));
        problem.add_row(format!("chcap_{t}"), [(ch, 1.0), (d_ch, -b.p_ch_max)], Sense::Le, 0.0);
        problem.add_row(format!("discap_{t}"), [(dis, 1.0), (d_dis, -b.p_dis_max)], Sense::Le, 0.0);
        problem.add_row(format!("bexcl_{t}"), [(d_ch, 1.0), (d_dis, 1.0)], Sense::Le, 1.0);
    }
}

/// Allocations partition net generation and share its sign. No rows when
/// coefficients are data.
pub fn add_sharing(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec) {
    if !index.has_allocation() {
        return;
    }
    let b = &spec.bess;
    for t in 0..index.hours() {
        let pv = spec.pv.generation[t];
        let ch = index.hour(VarKind::SigmaCh, t);
        let dis = index.hour(VarKind::SigmaDis, t);
        let terms = (0..index.participants())
            .map(|p| (index.at(VarKind::Alloc, t, p), 1.0))
            .chain([(dis, -1.0), (ch, 1.0)]);
        problem.add_row(format!("share_{t}"), terms, Sense::Eq, pv);
    }
    for t in 0..index.hours() {
        let pv = spec.pv.generation[t];
        let m_pos = pv + b.p_dis_max;
        let m_neg = (b.p_ch_max - pv).max(0.0);
        let sign = index.hour(VarKind::ThetaPos, t);
        for (p, participant) in spec.participants.iter().enumerate() {
            let g = index.at(VarKind::Alloc, t, p);
            // sign = 1: g ≥ 0; sign = 0: g ≤ 0.
            problem.add_row(format!("gpos_{t}_{}", participant.id), [(g, 1.0), (sign, -m_pos)], Sense::Le, 0.0);
            problem.add_row(format!("gneg_{t}_{}", participant.id), [(g, 1.0), (sign, -m_neg)], Sense::Ge, -m_neg);
        }
    }
}

/// Compensated surplus value may not exceed imported value over the horizon.
pub fn add_compensation_cap(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec) {
    for (p, participant) in spec.participants.iter().enumerate() {
        let terms = (0..index.hours()).flat_map(|t| {
            [
                (index.at(VarKind::ChiSell, t, p), participant.sell_price[t]),
                (index.at(VarKind::ChiBuy, t, p), -participant.buy_price[t]),
            ]
        });
        problem.add_row(format!("comp_{}", participant.id), terms, Sense::Le, 0.0);
    }
}

/// Bill minimisation: `Σ Pbuy χbuy − Psell χsell + Σ_t Kcal`, plus the
/// optional throughput cost on charge and discharge.
pub fn set_price_objective(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec) {
    clear_objective(problem);
    for t in 0..index.hours() {
        for (p, participant) in spec.participants.iter().enumerate() {
            problem.set_cost(index.at(VarKind::ChiBuy, t, p), participant.buy_price[t]);
            problem.set_cost(index.at(VarKind::ChiSell, t, p), -participant.sell_price[t]);
        }
        let kwh = spec.bess.throughput_cost_per_kwh;
        problem.set_cost(index.hour(VarKind::SigmaCh, t), kwh);
        problem.set_cost(index.hour(VarKind::SigmaDis, t), kwh);
    }
    problem.add_objective_constant(spec.bess.calendar_cost_per_hour * index.hours() as f64);
    annotate(problem, index, spec, Objective::Price);
}

/// Footprint minimisation: grid imports at the hourly intensity, battery
/// discharge at its factor, PV generation as a constant. Sales carry nothing.
pub fn set_environment_objective(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec) {
    clear_objective(problem);
    let mut pv_constant = 0.0;
    for t in 0..index.hours() {
        for p in 0..index.participants() {
            problem.set_cost(index.at(VarKind::ChiBuy, t, p), spec.grid_intensity[t]);
        }
        problem.set_cost(index.hour(VarKind::SigmaDis, t), spec.bess.emission_factor_discharge);
        pv_constant += spec.pv.emission_factor * spec.pv.generation[t];
    }
    problem.add_objective_constant(pv_constant);
    annotate(problem, index, spec, Objective::Environment);
}

fn clear_objective(problem: &mut MilpProblem) {
    for j in 0..problem.num_columns() {
        problem.set_cost(j, 0.0);
    }
    let constant = problem.objective_constant();
    problem.add_objective_constant(-constant);
}

fn annotate(problem: &mut MilpProblem, index: &VariableIndex, spec: &CommunitySpec, objective: Objective) {
    let sharing = if index.has_allocation() {
        SharingStrategy::OptimizeHourlyAllocation
    } else {
        SharingStrategy::FixedCoefficients
    };
    let label = scenario_label(objective, sharing);
    problem.set_label(label.as_str());
    problem.clear_comments();
    problem.add_comment(format!("Scenario: {label}"));
    problem.add_comment(format!(
        "Horizon: {} h from {}",
        index.hours(),
        spec.start().format(TIMESTAMP_FORMAT)
    ));
    problem.add_comment(format!("Participants: {}", index.participant_ids().join(" ")));
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for SharingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Community net generation `pv + dis − ch` per hour.
pub fn net_generation(spec: &CommunitySpec, index: &VariableIndex, values: &[f64]) -> Vec<f64> {
    (0..index.hours())
        .map(|t| {
            spec.pv.generation[t] + values[index.hour(VarKind::SigmaDis, t)] - values[index.hour(VarKind::SigmaCh, t)]
        })
        .collect()
}

/// Per-participant net generation `θ[t][p]`.
pub fn participant_shares(spec: &CommunitySpec, index: &VariableIndex, values: &[f64]) -> Vec<Vec<f64>> {
    let theta = net_generation(spec, index, values);
    (0..index.hours())
        .map(|t| {
            (0..index.participants())
                .map(|p| {
                    if index.has_allocation() {
                        values[index.at(VarKind::Alloc, t, p)]
                    } else {
                        spec.sharing.coefficient(t, p) * theta[t]
                    }
                })
                .collect()
        })
        .collect()
}

/// Realised coefficients `β[t][p]`; hours without net generation fall back
/// to the static coefficients.
pub fn realized_coefficients(spec: &CommunitySpec, index: &VariableIndex, values: &[f64]) -> Vec<Vec<f64>> {
    let theta = net_generation(spec, index, values);
    (0..index.hours())
        .map(|t| {
            (0..index.participants())
                .map(|p| {
                    if !index.has_allocation() {
                        spec.sharing.coefficient(t, p)
                    } else if theta[t].abs() > THETA_EPS {
                        values[index.at(VarKind::Alloc, t, p)] / theta[t]
                    } else {
                        spec.sharing.static_coefficients[p]
                    }
                })
                .collect()
        })
        .collect()
}
