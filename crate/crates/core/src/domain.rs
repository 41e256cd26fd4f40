//! Community data model and validation.
//!
//! The optimisation step is one hour, so kW limits and kWh-per-hour flows are
//! numerically interchangeable. Buy prices are tax-inclusive by the time they
//! reach these types.

use std::collections::HashSet;
use std::fmt;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Default life-cycle factor for the shared PV plant, kg CO2-eq/kWh.
///
/// Not a case-study value: override it with the plant's own figure.
pub const DEFAULT_PV_EMISSION_FACTOR: f64 = 0.045;

/// Life-cycle factor for battery discharge, kg CO2-eq/kWh.
pub const BATTERY_EMISSION_FACTOR: f64 = 0.060;

const SUM_TOL: f64 = 1e-9;

/// Gap-free hourly series starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    start: NaiveDateTime,
    values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(start: NaiveDateTime, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn constant(start: NaiveDateTime, len: usize, value: f64) -> Self {
        Self { start, values: vec![value; len] }
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::hours(index as i64)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = NaiveDateTime> + '_ {
        (0..self.values.len()).map(|i| self.timestamp(i))
    }

    /// Sub-series `[offset, offset + len)`, clipped to the available data.
    pub fn window(&self, offset: usize, len: usize) -> HourlySeries {
        let end = (offset + len).min(self.values.len());
        let offset = offset.min(end);
        HourlySeries { start: self.timestamp(offset), values: self.values[offset..end].to_vec() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> HourlySeries {
        HourlySeries { start: self.start, values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

impl std::ops::Index<usize> for HourlySeries {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub id: String,
    /// Inflexible consumption, kWh per hour.
    pub load: HourlySeries,
    /// Tax-inclusive purchase price, €/kWh.
    pub buy_price: HourlySeries,
    /// Surplus compensation price, €/kWh.
    pub sell_price: HourlySeries,
    /// Contracted import power per tariff period (index 0 is period 1), kW.
    pub max_import: Vec<f64>,
    /// Export limit per tariff period, kW.
    pub max_export: Vec<f64>,
    /// Tariff period (1-based) in force at each hour of the horizon.
    pub tariff_periods: Vec<u8>,
}

impl Participant {
    /// Participant with a single tariff period and export capped like import.
    pub fn new(
        id: impl Into<String>,
        load: HourlySeries,
        buy_price: HourlySeries,
        sell_price: HourlySeries,
        max_import: f64,
    ) -> Self {
        let hours = load.len();
        Self {
            id: id.into(),
            load,
            buy_price,
            sell_price,
            max_import: vec![max_import],
            max_export: vec![max_import],
            tariff_periods: vec![1; hours],
        }
    }

    pub fn import_limit(&self, hour: usize) -> f64 {
        self.max_import[usize::from(self.tariff_periods[hour]) - 1]
    }

    pub fn export_limit(&self, hour: usize) -> f64 {
        self.max_export[usize::from(self.tariff_periods[hour]) - 1]
    }

    fn window(&self, offset: usize, len: usize) -> Participant {
        let end = (offset + len).min(self.tariff_periods.len());
        Participant {
            id: self.id.clone(),
            load: self.load.window(offset, len),
            buy_price: self.buy_price.window(offset, len),
            sell_price: self.sell_price.window(offset, len),
            max_import: self.max_import.clone(),
            max_export: self.max_export.clone(),
            tariff_periods: self.tariff_periods[offset.min(end)..end].to_vec(),
        }
    }
}

/// Missing fields in a config take the case-study values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BessSpec {
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_initial: f64,
    pub soc_final: f64,
    /// Calendar-ageing cost, €/h.
    pub calendar_cost_per_hour: f64,
    /// Optional cost per kWh charged or discharged, €/kWh.
    pub throughput_cost_per_kwh: f64,
    /// kg CO2-eq per kWh discharged.
    pub emission_factor_discharge: f64,
}

impl Default for BessSpec {
    fn default() -> Self {
        Self::case_study()
    }
}

impl BessSpec {
    /// The case-study Li-ion unit: 90 kW both ways, 31.65–189.9 kWh,
    /// 95 % efficiencies, 150 kWh at both ends of the day.
    pub fn case_study() -> Self {
        Self {
            p_ch_max: 90.0,
            p_dis_max: 90.0,
            soc_max: 189.9,
            soc_min: 31.65,
            eta_ch: 0.95,
            eta_dis: 0.95,
            soc_initial: 150.0,
            soc_final: 150.0,
            calendar_cost_per_hour: 0.0,
            throughput_cost_per_kwh: 0.0,
            emission_factor_discharge: BATTERY_EMISSION_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvSpec {
    /// kWh per hour.
    pub generation: HourlySeries,
    /// kg CO2-eq/kWh.
    pub emission_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharingMode {
    Static,
    HourlyVariable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharingScheme {
    pub mode: SharingMode,
    /// One coefficient per participant. Also the fallback whenever an hourly
    /// coefficient is undefined (no net generation to share).
    pub static_coefficients: Vec<f64>,
    /// Externally fixed hourly coefficients, one series per participant.
    pub variable_coefficients: Option<Vec<HourlySeries>>,
}

impl SharingScheme {
    pub fn fixed(coefficients: Vec<f64>) -> Self {
        Self { mode: SharingMode::Static, static_coefficients: coefficients, variable_coefficients: None }
    }

    /// Coefficient used when sharing is not optimised.
    pub fn coefficient(&self, hour: usize, participant: usize) -> f64 {
        match (&self.mode, &self.variable_coefficients) {
            (SharingMode::HourlyVariable, Some(series)) => series[participant][hour],
            _ => self.static_coefficients[participant],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunitySpec {
    pub participants: Vec<Participant>,
    pub bess: BessSpec,
    pub pv: PvSpec,
    pub sharing: SharingScheme,
    /// Hourly grid carbon intensity, kg CO2-eq/kWh.
    pub grid_intensity: HourlySeries,
    /// Already folded into buy prices; kept for reporting.
    pub vat_rate: f64,
    pub horizon_hours: usize,
    pub compensation_cap_enabled: bool,
    pub allow_negative_prices: bool,
}

impl CommunitySpec {
    pub fn start(&self) -> NaiveDateTime {
        self.grid_intensity.start()
    }

    pub fn participant_ids(&self) -> Vec<String> {
        self.participants.iter().map(|p| p.id.clone()).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_community(self)
    }

    /// Sub-horizon `[offset, offset + len)` with the same battery endpoints.
    pub fn window(&self, offset: usize, len: usize) -> CommunitySpec {
        let len = len.min(self.horizon_hours.saturating_sub(offset));
        CommunitySpec {
            participants: self.participants.iter().map(|p| p.window(offset, len)).collect(),
            bess: self.bess.clone(),
            pv: PvSpec { generation: self.pv.generation.window(offset, len), emission_factor: self.pv.emission_factor },
            sharing: SharingScheme {
                mode: self.sharing.mode,
                static_coefficients: self.sharing.static_coefficients.clone(),
                variable_coefficients: self
                    .sharing
                    .variable_coefficients
                    .as_ref()
                    .map(|all| all.iter().map(|s| s.window(offset, len)).collect()),
            },
            grid_intensity: self.grid_intensity.window(offset, len),
            vat_rate: self.vat_rate,
            horizon_hours: len,
            compensation_cap_enabled: self.compensation_cap_enabled,
            allow_negative_prices: self.allow_negative_prices,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue { path: path.into(), message: message.into() });
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.issues.iter().any(|i| i.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Lists every violated invariant. Never fails; an empty report means the
/// spec can be handed to the model builder.
pub fn validate_community(spec: &CommunitySpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let hours = spec.horizon_hours;
    let start = spec.start();

    if hours == 0 {
        report.push("horizon_hours", "horizon must be at least one hour");
    }
    if spec.participants.is_empty() {
        report.push("participants", "at least one participant is required");
    }
    if !spec.vat_rate.is_finite() || spec.vat_rate < 0.0 {
        report.push("vat_rate", format!("VAT rate {} must be a non-negative number", spec.vat_rate));
    }

    check_series(&mut report, "grid_intensity", &spec.grid_intensity, start, hours);
    check_non_negative(&mut report, "grid_intensity", &spec.grid_intensity);
    check_series(&mut report, "pv.generation", &spec.pv.generation, start, hours);
    check_non_negative(&mut report, "pv.generation", &spec.pv.generation);
    check_factor(&mut report, "pv.emission_factor", spec.pv.emission_factor);

    let mut ids = HashSet::new();
    for (i, p) in spec.participants.iter().enumerate() {
        let path = format!("participants[{i}]");
        if p.id.is_empty() || !p.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            report.push(format!("{path}.id"), format!("id {:?} must be non-empty ASCII letters, digits or '_'", p.id));
        }
        if !ids.insert(p.id.as_str()) {
            report.push(format!("{path}.id"), format!("duplicate participant id {}", p.id));
        }
        check_series(&mut report, &format!("{path}.load"), &p.load, start, hours);
        check_non_negative(&mut report, &format!("{path}.load"), &p.load);
        check_series(&mut report, &format!("{path}.buy_price"), &p.buy_price, start, hours);
        check_series(&mut report, &format!("{path}.sell_price"), &p.sell_price, start, hours);
        check_prices(&mut report, &path, p, spec.allow_negative_prices);

        if p.max_import.is_empty() {
            report.push(format!("{path}.max_import"), "at least one tariff period is required");
        }
        for (k, &v) in p.max_import.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                report.push(format!("{path}.max_import[{k}]"), format!("contracted power {v} must be positive"));
            }
        }
        if p.max_export.len() != p.max_import.len() {
            report.push(
                format!("{path}.max_export"),
                format!("{} export limits for {} tariff periods", p.max_export.len(), p.max_import.len()),
            );
        }
        for (k, &v) in p.max_export.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                report.push(format!("{path}.max_export[{k}]"), format!("export limit {v} must be non-negative"));
            }
        }
        if p.tariff_periods.len() != hours {
            report.push(
                format!("{path}.tariff_periods"),
                format!("{} tariff periods for a {hours} h horizon", p.tariff_periods.len()),
            );
        }
        let periods = p.max_import.len().min(p.max_export.len());
        if let Some((t, &k)) =
            p.tariff_periods.iter().enumerate().find(|(_, &k)| k == 0 || usize::from(k) > periods)
        {
            report.push(
                format!("{path}.tariff_periods[{t}]"),
                format!("tariff period {k} outside 1..={periods}"),
            );
        }
    }

    check_bess(&mut report, &spec.bess);
    check_sharing(&mut report, spec, start, hours);
    report
}

fn check_series(report: &mut ValidationReport, path: &str, series: &HourlySeries, start: NaiveDateTime, hours: usize) {
    if series.len() != hours {
        report.push(path, format!("series has {} hours, horizon is {hours}", series.len()));
    }
    if series.start() != start {
        report.push(
            path,
            format!(
                "series starts at {}, horizon starts at {}",
                series.start().format(TIMESTAMP_FORMAT),
                start.format(TIMESTAMP_FORMAT)
            ),
        );
    }
    if let Some(i) = series.values().iter().position(|v| !v.is_finite()) {
        report.push(path, format!("missing value at {}", series.timestamp(i).format(TIMESTAMP_FORMAT)));
    }
}

fn check_non_negative(report: &mut ValidationReport, path: &str, series: &HourlySeries) {
    if let Some(i) = series.values().iter().position(|&v| v < 0.0) {
        report.push(path, format!("negative value {} at {}", series[i], series.timestamp(i).format(TIMESTAMP_FORMAT)));
    }
}

fn check_factor(report: &mut ValidationReport, path: &str, value: f64) {
    if !(value.is_finite() && value >= 0.0) {
        report.push(path, format!("emission factor {value} must be non-negative"));
    }
}

fn check_prices(report: &mut ValidationReport, path: &str, p: &Participant, allow_negative: bool) {
    let pairs = p.buy_price.values().iter().zip(p.sell_price.values());
    if let Some((i, (b, s))) = pairs.enumerate().find(|(_, (b, s))| b < s) {
        report.push(
            format!("{path}.buy_price"),
            format!("buy price {b} below sell price {s} at {}", p.buy_price.timestamp(i).format(TIMESTAMP_FORMAT)),
        );
    }
    if !allow_negative {
        if let Some(i) = p.sell_price.values().iter().position(|&v| v < 0.0) {
            report.push(
                format!("{path}.sell_price"),
                format!(
                    "negative sell price {} at {} (negative prices not enabled)",
                    p.sell_price[i],
                    p.sell_price.timestamp(i).format(TIMESTAMP_FORMAT)
                ),
            );
        }
    }
}

fn check_bess(report: &mut ValidationReport, b: &BessSpec) {
    let finite = [
        ("p_ch_max", b.p_ch_max),
        ("p_dis_max", b.p_dis_max),
        ("soc_max", b.soc_max),
        ("soc_min", b.soc_min),
        ("soc_initial", b.soc_initial),
        ("soc_final", b.soc_final),
        ("calendar_cost_per_hour", b.calendar_cost_per_hour),
        ("throughput_cost_per_kwh", b.throughput_cost_per_kwh),
    ];
    for (name, v) in finite {
        if !v.is_finite() {
            report.push(format!("bess.{name}"), format!("{name} must be finite"));
        }
    }
    if b.p_ch_max <= 0.0 {
        report.push("bess.p_ch_max", "charging power must be positive");
    }
    if b.p_dis_max <= 0.0 {
        report.push("bess.p_dis_max", "discharging power must be positive");
    }
    if b.soc_min < 0.0 {
        report.push("bess.soc_min", "soc_min must be non-negative");
    }
    if b.soc_min > b.soc_max {
        report.push("bess.soc_min", "soc_min above soc_max");
    }
    for (name, label, v) in [("soc_initial", "initial", b.soc_initial), ("soc_final", "final", b.soc_final)] {
        if v > b.soc_max {
            report.push(format!("bess.{name}"), format!("{label} SOC above soc_max"));
        }
        if v < b.soc_min {
            report.push(format!("bess.{name}"), format!("{label} SOC below soc_min"));
        }
    }
    for (name, v) in [("eta_ch", b.eta_ch), ("eta_dis", b.eta_dis)] {
        if !(v > 0.0 && v <= 1.0) {
            report.push(format!("bess.{name}"), format!("efficiency {v} outside (0, 1]"));
        }
    }
    if b.calendar_cost_per_hour < 0.0 || b.throughput_cost_per_kwh < 0.0 {
        report.push("bess", "battery costs must be non-negative");
    }
    check_factor(report, "bess.emission_factor_discharge", b.emission_factor_discharge);
}

fn check_sharing(report: &mut ValidationReport, spec: &CommunitySpec, start: NaiveDateTime, hours: usize) {
    let n = spec.participants.len();
    let coefficients = &spec.sharing.static_coefficients;
    if coefficients.len() != n {
        report.push(
            "sharing.static_coefficients",
            format!("{} coefficients for {n} participants", coefficients.len()),
        );
    }
    for (i, &b) in coefficients.iter().enumerate() {
        if !(0.0..=1.0).contains(&b) {
            report.push(format!("sharing.static_coefficients[{i}]"), format!("coefficient {b} outside [0, 1]"));
        }
    }
    let sum: f64 = coefficients.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        report.push("sharing.static_coefficients", format!("sharing coefficients sum {sum} ≠ 1"));
    }

    match (&spec.sharing.mode, &spec.sharing.variable_coefficients) {
        (SharingMode::Static, Some(_)) => {
            report.push("sharing.variable_coefficients", "hourly coefficients given in static mode");
        }
        (SharingMode::HourlyVariable, Some(series)) => {
            if series.len() != n {
                report.push("sharing.variable_coefficients", format!("{} series for {n} participants", series.len()));
                return;
            }
            for (i, s) in series.iter().enumerate() {
                let path = format!("sharing.variable_coefficients[{i}]");
                check_series(report, &path, s, start, hours);
                if let Some(t) = s.values().iter().position(|b| !(0.0..=1.0).contains(b)) {
                    report.push(&path, format!("coefficient {} outside [0, 1] at hour {t}", s[t]));
                }
            }
            let len = series.iter().map(HourlySeries::len).min().unwrap_or(0);
            if let Some(t) = (0..len).find(|&t| (series.iter().map(|s| s[t]).sum::<f64>() - 1.0).abs() > SUM_TOL) {
                let sum: f64 = series.iter().map(|s| s[t]).sum();
                report.push(
                    "sharing.variable_coefficients",
                    format!("sharing coefficients sum {sum} ≠ 1 at {}", series[0].timestamp(t).format(TIMESTAMP_FORMAT)),
                );
            }
        }
        _ => {}
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2022, 3, 3).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    /// Four Table-4/Table-5 style buildings with flat data.
    pub(crate) fn four_buildings(hours: usize) -> CommunitySpec {
        let s = |v: f64| HourlySeries::constant(t0(), hours, v);
        let limits = [70.0, 43.65, 20.785, 75.0];
        let participants = ["B1", "B2", "B3", "B4"]
            .iter()
            .zip(limits)
            .map(|(id, cap)| Participant {
                max_import: vec![cap; 6],
                max_export: vec![cap; 6],
                tariff_periods: vec![1; hours],
                ..Participant::new(*id, s(10.0), s(0.2), s(0.1), cap)
            })
            .collect();
        CommunitySpec {
            participants,
            bess: BessSpec::case_study(),
            pv: PvSpec { generation: s(20.0), emission_factor: DEFAULT_PV_EMISSION_FACTOR },
            sharing: SharingScheme::fixed(vec![0.35, 0.15, 0.02, 0.48]),
            grid_intensity: s(0.2),
            vat_rate: 0.21,
            horizon_hours: hours,
            compensation_cap_enabled: false,
            allow_negative_prices: false,
        }
    }

    #[test]
    fn case_study_coefficients_are_valid() {
        let report = validate_community(&four_buildings(24));
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn coefficient_sum_violation() {
        let mut spec = four_buildings(24);
        spec.participants.truncate(2);
        spec.sharing = SharingScheme::fixed(vec![0.5, 0.6]);
        let report = validate_community(&spec);
        assert!(report.mentions("sharing coefficients sum 1.1 ≠ 1"), "{report}");
    }

    #[test]
    fn initial_soc_above_max() {
        let mut spec = four_buildings(24);
        spec.bess.soc_initial = 200.0;
        let report = validate_community(&spec);
        assert!(report.mentions("initial SOC above soc_max"), "{report}");
    }

    #[test]
    fn misaligned_and_missing_series() {
        let mut spec = four_buildings(24);
        spec.participants[1].load = HourlySeries::constant(t0(), 23, 1.0);
        let mut gappy = vec![1.0; 24];
        gappy[5] = f64::NAN;
        spec.participants[2].load = HourlySeries::new(t0(), gappy);
        let report = validate_community(&spec);
        assert!(report.mentions("series has 23 hours"));
        assert!(report.mentions("missing value at 2022-03-03T05:00:00"));
    }

    #[test]
    fn price_and_limit_rules() {
        let mut spec = four_buildings(4);
        spec.participants[0].sell_price = HourlySeries::constant(t0(), 4, 0.3);
        spec.participants[1].sell_price = HourlySeries::constant(t0(), 4, -0.01);
        spec.participants[2].max_import[0] = 0.0;
        spec.participants[3].tariff_periods[2] = 7;
        let report = validate_community(&spec);
        assert!(report.mentions("below sell price"));
        assert!(report.mentions("negative sell price"));
        assert!(report.mentions("contracted power 0 must be positive"));
        assert!(report.mentions("tariff period 7 outside 1..=6"));

        spec.allow_negative_prices = true;
        assert!(!validate_community(&spec).mentions("negative sell price"));
    }

    #[test]
    fn hourly_coefficients_must_sum_to_one_each_hour() {
        let mut spec = four_buildings(3);
        spec.sharing.mode = SharingMode::HourlyVariable;
        let mut b4 = vec![0.48; 3];
        b4[1] = 0.5;
        spec.sharing.variable_coefficients = Some(vec![
            HourlySeries::constant(t0(), 3, 0.35),
            HourlySeries::constant(t0(), 3, 0.15),
            HourlySeries::constant(t0(), 3, 0.02),
            HourlySeries::new(t0(), b4),
        ]);
        let report = validate_community(&spec);
        assert_eq!(report.issues.len(), 1, "{report}");
        assert!(report.mentions("at 2022-03-03T01:00:00"));
    }

    #[test]
    fn window_keeps_alignment() {
        let spec = four_buildings(48);
        let day = spec.window(24, 24);
        assert_eq!(day.horizon_hours, 24);
        assert_eq!(day.start(), t0() + Duration::hours(24));
        assert!(validate_community(&day).is_empty());
    }

    #[test]
    fn validation_is_idempotent() {
        let mut spec = four_buildings(6);
        spec.bess.eta_ch = 1.5;
        spec.sharing.static_coefficients[0] = 0.9;
        assert_eq!(validate_community(&spec), validate_community(&spec));
    }
}
