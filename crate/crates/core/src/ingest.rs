//! CSV series, generation mix and TOML run configuration.
//!
//! Every table has an ISO-8601 timestamp column followed by numeric columns.
//! Rows must be strictly hourly; gaps and duplicates are errors, never filled.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::Deserialize;
use thiserror::Error;

use crate::domain::{
    BessSpec, CommunitySpec, HourlySeries, Participant, PvSpec, SharingMode, SharingScheme, DEFAULT_PV_EMISSION_FACTOR,
    TIMESTAMP_FORMAT,
};
use crate::scenario::RunOptions;
use crate::gwp::{intensity_series_with_warning, unknown_sources, EmissionFactorTable, GenerationMixHour, GwpError};

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{path}: hourly series broken at {timestamp}: {detail}")]
    GapInSeries { path: String, timestamp: String, detail: String },
    #[error("{path}: non-numeric cell {value:?} at row {row}, column {column:?}")]
    NonNumericCell { path: String, row: usize, column: String, value: String },
    #[error("{path}: unreadable timestamp {value:?} at row {row}")]
    BadTimestamp { path: String, row: usize, value: String },
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Gwp(#[from] GwpError),
}

impl IngestError {
    fn config(path: &Path, message: impl Into<String>) -> Self {
        IngestError::Config { path: path.display().to_string(), message: message.into() }
    }
}

pub fn parse_timestamp(value: &str) -> Option<NaiveDateTime> {
    let value = value.trim();
    TIMESTAMP_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(value, f).ok())
}

/// Hourly table: one timestamp column and numeric columns in header order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub start: NaiveDateTime,
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    source: String,
}

impl Table {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    pub fn series(&self, name: &str) -> Result<HourlySeries, IngestError> {
        let i = self.headers.iter().position(|h| h == name).ok_or_else(|| IngestError::MissingColumn {
            path: self.source.clone(),
            column: name.to_string(),
        })?;
        Ok(HourlySeries::new(self.start, self.columns[i].clone()))
    }

    pub fn timestamp(&self, row: usize) -> NaiveDateTime {
        self.start + Duration::hours(row as i64)
    }
}

/// Column selection for [`load_series_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub timestamp: String,
    pub value: String,
}

impl ColumnSpec {
    pub fn new(timestamp: impl Into<String>, value: impl Into<String>) -> Self {
        Self { timestamp: timestamp.into(), value: value.into() }
    }
}

/// Reads an hourly table. `source` names the input in error messages.
pub fn read_table(reader: impl Read, source: &str, timestamp_column: &str) -> Result<Table, IngestError> {
    let csv_error = |e| IngestError::Csv { path: source.to_string(), source: e };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let ts_index = header.iter().position(|h| h == timestamp_column).ok_or_else(|| IngestError::MissingColumn {
        path: source.to_string(),
        column: timestamp_column.to_string(),
    })?;
    let headers: Vec<String> = header.iter().enumerate().filter(|&(i, _)| i != ts_index).map(|(_, h)| h.clone()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    let mut start: Option<NaiveDateTime> = None;
    let mut previous: Option<NaiveDateTime> = None;

    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = n + 2; // 1-based, after the header
        let raw_ts = record.get(ts_index).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| IngestError::BadTimestamp {
            path: source.to_string(),
            row,
            value: raw_ts.to_string(),
        })?;
        if let Some(prev) = previous {
            let expected = prev + Duration::hours(1);
            if ts != expected {
                let (timestamp, detail) = if ts <= prev {
                    (ts, "duplicate or out-of-order timestamp")
                } else {
                    (expected, "first missing hour")
                };
                return Err(IngestError::GapInSeries {
                    path: source.to_string(),
                    timestamp: timestamp.format(TIMESTAMP_FORMAT).to_string(),
                    detail: detail.to_string(),
                });
            }
        }
        start.get_or_insert(ts);
        previous = Some(ts);
        let cells = record.iter().enumerate().filter(|&(i, _)| i != ts_index).map(|(_, c)| c);
        for ((cell, column), name) in cells.zip(columns.iter_mut()).zip(&headers) {
            let value: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                IngestError::NonNumericCell {
                    path: source.to_string(),
                    row,
                    column: name.clone(),
                    value: cell.to_string(),
                }
            })?;
            column.push(value);
        }
    }
    let Some(start) = start else {
        return Err(IngestError::GapInSeries {
            path: source.to_string(),
            timestamp: "-".into(),
            detail: "no data rows".into(),
        });
    };
    Ok(Table { start, headers, columns, source: source.to_string() })
}

pub fn load_table(path: &Path, timestamp_column: &str) -> Result<Table, IngestError> {
    let file = fs::File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    read_table(file, &path.display().to_string(), timestamp_column)
}

pub fn load_series_csv(path: &Path, columns: &ColumnSpec) -> Result<HourlySeries, IngestError> {
    load_table(path, &columns.timestamp)?.series(&columns.value)
}

/// Wide mix table: timestamp plus one MWh column per generation source.
pub fn read_mix(reader: impl Read, source: &str, timestamp_column: &str) -> Result<Vec<GenerationMixHour>, IngestError> {
    let table = read_table(reader, source, timestamp_column)?;
    Ok((0..table.len())
        .map(|row| GenerationMixHour {
            timestamp: table.timestamp(row),
            energy_mwh: table.headers.iter().zip(&table.columns).map(|(h, c)| (h.clone(), c[row])).collect(),
        })
        .collect())
}

pub fn load_mix_csv(path: &Path) -> Result<Vec<GenerationMixHour>, IngestError> {
    load_mix_csv_with(path, DEFAULT_TIMESTAMP_COLUMN)
}

pub fn load_mix_csv_with(path: &Path, timestamp_column: &str) -> Result<Vec<GenerationMixHour>, IngestError> {
    let file = fs::File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    read_mix(file, &path.display().to_string(), timestamp_column)
}

/// `source,factor` rows applied over the default table.
pub fn read_factor_overrides(reader: impl Read, source: &str) -> Result<Vec<(String, f64)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let csv_error = |e| IngestError::Csv { path: source.to_string(), source: e };
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    for column in ["source", "factor"] {
        if !header.iter().any(|h| h == column) {
            return Err(IngestError::MissingColumn { path: source.to_string(), column: column.into() });
        }
    }
    let name_at = header.iter().position(|h| h == "source").unwrap_or(0);
    let value_at = header.iter().position(|h| h == "factor").unwrap_or(1);
    let mut pairs = Vec::new();
    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let raw = record.get(value_at).unwrap_or("");
        let value = raw.parse::<f64>().map_err(|_| IngestError::NonNumericCell {
            path: source.to_string(),
            row: n + 2,
            column: "factor".into(),
            value: raw.to_string(),
        })?;
        pairs.push((record.get(name_at).unwrap_or("").to_string(), value));
    }
    Ok(pairs)
}

pub fn load_factor_overrides(path: &Path) -> Result<Vec<(String, f64)>, IngestError> {
    let file = fs::File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    read_factor_overrides(file, &path.display().to_string())
}

/// Default table with `overrides` applied.
pub fn factor_table(overrides: &[(String, f64)]) -> Result<EmissionFactorTable, GwpError> {
    let mut table = EmissionFactorTable::default();
    for (source, value) in overrides {
        table.set(source, *value)?;
    }
    Ok(table)
}

pub const DEFAULT_TIMESTAMP_COLUMN: &str = "ts";

fn default_ts() -> String {
    DEFAULT_TIMESTAMP_COLUMN.to_string()
}

fn default_coverage() -> f64 {
    crate::gwp::DEFAULT_COVERAGE_WARNING
}

fn default_pv_factor() -> f64 {
    DEFAULT_PV_EMISSION_FACTOR
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    /// `ts` plus one kWh column per participant id.
    pub load: PathBuf,
    /// `ts, buy, sell`; `buy_<id>` / `sell_<id>` override per participant.
    /// Buy prices are pre-tax.
    pub prices: PathBuf,
    /// `ts, pv` in kWh.
    pub pv: PathBuf,
    /// Wide generation mix in MWh.
    pub mix: Option<PathBuf>,
    /// `ts, gwp` in kg CO2-eq/kWh, used when no mix is given.
    pub intensity: Option<PathBuf>,
    /// `source, factor` overrides.
    pub factors: Option<PathBuf>,
    /// `ts` plus one coefficient column per participant id.
    pub sharing: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantConfig {
    pub id: String,
    /// kW per tariff period.
    pub max_import: Vec<f64>,
    pub max_export: Option<Vec<f64>>,
    /// Static sharing coefficient.
    pub sharing: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffConfig {
    /// Tariff period for each hour of the day.
    pub periods: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvConfig {
    #[serde(default = "default_pv_factor")]
    pub emission_factor: f64,
}

impl Default for PvConfig {
    fn default() -> Self {
        Self { emission_factor: DEFAULT_PV_EMISSION_FACTOR }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SharingModeConfig {
    #[default]
    Static,
    HourlyVariable,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SharingConfig {
    #[serde(default)]
    pub mode: SharingModeConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnsConfig {
    #[serde(default = "default_ts")]
    pub timestamp: String,
}

impl Default for ColumnsConfig {
    fn default() -> Self {
        Self { timestamp: default_ts() }
    }
}

/// Per-window search budget when the config sets none. Only days where the
/// compensation cap binds come near it; the best schedule found is kept.
pub const DEFAULT_TIME_LIMIT_SECONDS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: Option<f64>,
    pub node_limit: Option<usize>,
    pub time_limit_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub vat_rate: f64,
    #[serde(default)]
    pub compensation_cap: bool,
    #[serde(default)]
    pub allow_negative_prices: bool,
    #[serde(default = "default_coverage")]
    pub coverage_warning: f64,
    pub output_dir: Option<PathBuf>,
    pub inputs: InputPaths,
    #[serde(default)]
    pub columns: ColumnsConfig,
    pub tariff: Option<TariffConfig>,
    pub participants: Vec<ParticipantConfig>,
    pub bess: Option<BessSpec>,
    #[serde(default)]
    pub pv: PvConfig,
    #[serde(default)]
    pub sharing: SharingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Directory relative paths resolve against; set by [`RunConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Everything read for one run.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub spec: CommunitySpec,
    pub factors: EmissionFactorTable,
    /// Empty when intensity was given directly.
    pub mix: Vec<GenerationMixHour>,
    /// Mix sources without an emission factor.
    pub unknown_sources: Vec<String>,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, IngestError> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| IngestError::config(base_dir, e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            IngestError::Config { message, .. } => IngestError::Config { path: path.display().to_string(), message },
            other => other,
        })
    }

    /// Solver settings from the `[solver]` section over the defaults.
    pub fn run_options(&self) -> RunOptions {
        let mut options = RunOptions::default();
        if let Some(tol) = self.solver.tolerance {
            options.verify_tolerance = tol;
        }
        options.milp.node_limit = self.solver.node_limit;
        let seconds = self.solver.time_limit_seconds.unwrap_or(DEFAULT_TIME_LIMIT_SECONDS);
        options.milp.time_limit = Some(std::time::Duration::from_secs_f64(seconds));
        options
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Reads every input and assembles the (unvalidated) community.
    pub fn load_inputs(&self) -> Result<LoadedRun, IngestError> {
        let ts = self.columns.timestamp.as_str();
        let inputs = &self.inputs;
        let loads = load_table(&self.resolve(&inputs.load), ts)?;
        let prices = load_table(&self.resolve(&inputs.prices), ts)?;
        let pv = load_table(&self.resolve(&inputs.pv), ts)?.series("pv")?;
        let overrides = match &inputs.factors {
            Some(path) => load_factor_overrides(&self.resolve(path))?,
            None => Vec::new(),
        };
        let factors = factor_table(&overrides)?;
        let (grid_intensity, mix, unknown) = match (&inputs.mix, &inputs.intensity) {
            (Some(path), _) => {
                let mix = load_mix_csv_with(&self.resolve(path), ts)?;
                let series = intensity_series_with_warning(&mix, &factors, self.coverage_warning)?;
                let unknown = unknown_sources(&mix, &factors);
                (series, mix, unknown)
            }
            (None, Some(path)) => (load_table(&self.resolve(path), ts)?.series("gwp")?, Vec::new(), Vec::new()),
            (None, None) => {
                return Err(IngestError::config(&self.base_dir, "inputs need either `mix` or `intensity`"));
            }
        };

        let hours = loads.len();
        let tariff_of_hour = |t: usize| -> u8 {
            match &self.tariff {
                Some(tariff) => {
                    let hour = (loads.timestamp(t).hour()) as usize;
                    tariff.periods.get(hour).copied().unwrap_or(0)
                }
                None => 1,
            }
        };
        let tariff_periods: Vec<u8> = (0..hours).map(tariff_of_hour).collect();
        if let Some(tariff) = &self.tariff {
            if tariff.periods.len() != 24 {
                return Err(IngestError::config(
                    &self.base_dir,
                    format!("tariff.periods needs 24 entries, found {}", tariff.periods.len()),
                ));
            }
        }

        let gross = 1.0 + self.vat_rate;
        let mut participants = Vec::with_capacity(self.participants.len());
        for p in &self.participants {
            let price = |kind: &str| -> Result<HourlySeries, IngestError> {
                let own = format!("{kind}_{}", p.id);
                prices.series(if prices.has_column(&own) { &own } else { kind })
            };
            participants.push(Participant {
                id: p.id.clone(),
                load: loads.series(&p.id)?,
                buy_price: price("buy")?.map(|v| v * gross),
                sell_price: price("sell")?,
                max_import: p.max_import.clone(),
                max_export: p.max_export.clone().unwrap_or_else(|| p.max_import.clone()),
                tariff_periods: tariff_periods.clone(),
            });
        }

        let mode = match self.sharing.mode {
            SharingModeConfig::Static => SharingMode::Static,
            SharingModeConfig::HourlyVariable => SharingMode::HourlyVariable,
        };
        let variable_coefficients = match &inputs.sharing {
            Some(path) => {
                let table = load_table(&self.resolve(path), ts)?;
                Some(self.participants.iter().map(|p| table.series(&p.id)).collect::<Result<Vec<_>, _>>()?)
            }
            None => None,
        };
        let spec = CommunitySpec {
            participants,
            bess: self.bess.clone().unwrap_or_else(BessSpec::case_study),
            pv: PvSpec { generation: pv, emission_factor: self.pv.emission_factor },
            sharing: SharingScheme {
                mode,
                static_coefficients: self.participants.iter().map(|p| p.sharing).collect(),
                variable_coefficients,
            },
            grid_intensity,
            vat_rate: self.vat_rate,
            horizon_hours: hours,
            compensation_cap_enabled: self.compensation_cap,
            allow_negative_prices: self.allow_negative_prices,
        };
        Ok(LoadedRun { spec, factors, mix, unknown_sources: unknown })
    }
}

/// Formats a series as `ts,<column>` CSV.
pub fn series_csv(series: &HourlySeries, column: &str) -> String {
    let mut out = format!("{DEFAULT_TIMESTAMP_COLUMN},{column}\n");
    for (ts, v) in series.timestamps().zip(series.values()) {
        out.push_str(&format!("{},{}\n", ts.format(TIMESTAMP_FORMAT), v));
    }
    out
}

/// Columns of a wide table in header order, for callers that need raw data.
pub fn table_columns(table: &Table) -> BTreeMap<&str, &[f64]> {
    table.headers.iter().map(String::as_str).zip(table.columns.iter().map(Vec::as_slice)).collect()
}
