//! Hourly grid carbon intensity from the scheduled generation mix.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime};
use log::warn;
use thiserror::Error;

use crate::domain::{HourlySeries, BATTERY_EMISSION_FACTOR, DEFAULT_PV_EMISSION_FACTOR, TIMESTAMP_FORMAT};

/// Coverage below this fraction triggers a warning.
pub const DEFAULT_COVERAGE_WARNING: f64 = 0.90;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GwpError {
    #[error("no generation covered by the emission-factor table{}", at(.timestamp))]
    ZeroCoveredGeneration { timestamp: Option<NaiveDateTime> },
    #[error("total generation is zero{}", at(.timestamp))]
    ZeroTotalGeneration { timestamp: Option<NaiveDateTime> },
    #[error("mix timestamps must increase hourly: {previous} followed by {next}")]
    NonHourlyTimestamps { previous: String, next: String },
    #[error("empty generation mix series")]
    EmptyMix,
    #[error("invalid emission factor {value} for {name}")]
    InvalidFactor { name: String, value: f64 },
    #[error("invalid energy {value} MWh for {name}{}", at(.timestamp))]
    InvalidEnergy { name: String, value: f64, timestamp: Option<NaiveDateTime> },
}

fn at(timestamp: &Option<NaiveDateTime>) -> String {
    timestamp.map(|t| format!(" at {}", t.format(TIMESTAMP_FORMAT))).unwrap_or_default()
}

/// Lowercase, trimmed, `_`/`-` as spaces, single spaces.
pub fn normalize_source_name(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Life-cycle range of a generation source, kg CO2-eq/kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionFactorTable {
    factors: BTreeMap<String, f64>,
    ranges: BTreeMap<String, FactorRange>,
    aliases: BTreeMap<String, String>,
}

/// Source name, average factor and optional (min, max) range.
type FactorRow = (&'static str, f64, Option<(f64, f64)>);

impl Default for EmissionFactorTable {
    /// Average life-cycle factors per source; solar has no reference
    /// figure and uses the configurable default.
    fn default() -> Self {
        let rows: [FactorRow; 9] = [
            ("hard coal", 0.855, Some((0.660, 1.05))),
            ("lignite", 1.05, Some((0.800, 1.30))),
            ("natural gas", 0.690, Some((0.38, 1.0))),
            ("nuclear", 0.019, Some((0.003, 0.035))),
            ("biomass", 0.069, Some((0.008, 0.130))),
            ("hydro", 0.011, Some((0.002, 0.02))),
            ("wind", 0.022, Some((0.003, 0.041))),
            ("battery", BATTERY_EMISSION_FACTOR, None),
            ("solar", DEFAULT_PV_EMISSION_FACTOR, None),
        ];
        let mut table = Self::empty();
        for (name, avg, range) in rows {
            table.factors.insert(name.to_string(), avg);
            if let Some((min, max)) = range {
                table.ranges.insert(name.to_string(), FactorRange { min, max });
            }
        }
        for (alias, target) in [
            ("coal", "hard coal"),
            ("gas", "natural gas"),
            ("combined cycle", "natural gas"),
            ("hydro power", "hydro"),
            ("hydropower", "hydro"),
            ("hydroelectric", "hydro"),
            ("solar pv", "solar"),
            ("photovoltaic", "solar"),
            ("pv", "solar"),
        ] {
            table.aliases.insert(alias.to_string(), target.to_string());
        }
        table
    }
}

impl EmissionFactorTable {
    pub fn empty() -> Self {
        Self { factors: BTreeMap::new(), ranges: BTreeMap::new(), aliases: BTreeMap::new() }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self, GwpError> {
        let mut table = Self::empty();
        for (name, value) in pairs {
            table.set(name, value)?;
        }
        Ok(table)
    }

    /// Inserts or overrides a factor. An alias name overrides its target's
    /// mapping for that name only.
    pub fn set(&mut self, source: &str, value: f64) -> Result<(), GwpError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(GwpError::InvalidFactor { name: source.to_string(), value });
        }
        let key = normalize_source_name(source);
        self.aliases.remove(&key);
        self.factors.insert(key, value);
        Ok(())
    }

    pub fn alias(&mut self, alias: &str, target: &str) {
        self.aliases.insert(normalize_source_name(alias), normalize_source_name(target));
    }

    pub fn factor(&self, source: &str) -> Option<f64> {
        let key = normalize_source_name(source);
        let key = self.aliases.get(&key).unwrap_or(&key);
        self.factors.get(key).copied()
    }

    pub fn range(&self, source: &str) -> Option<FactorRange> {
        let key = normalize_source_name(source);
        let key = self.aliases.get(&key).unwrap_or(&key);
        self.ranges.get(key).copied()
    }

    pub fn sources(&self) -> impl Iterator<Item = (&str, f64)> {
        self.factors.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Scheduled energy per source for one hour, MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationMixHour {
    pub timestamp: NaiveDateTime,
    pub energy_mwh: BTreeMap<String, f64>,
}

impl GenerationMixHour {
    pub fn new<'a>(timestamp: NaiveDateTime, energy: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self { timestamp, energy_mwh: energy.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
    }

    fn check(&self) -> Result<(), GwpError> {
        match self.energy_mwh.iter().find(|(_, &v)| !(v.is_finite() && v >= 0.0)) {
            Some((source, &value)) => {
                Err(GwpError::InvalidEnergy { name: source.clone(), value, timestamp: Some(self.timestamp) })
            }
            None => Ok(()),
        }
    }

    fn split(&self, factors: &EmissionFactorTable) -> (f64, f64, f64) {
        let (mut weighted, mut covered, mut total) = (0.0, 0.0, 0.0);
        for (source, &e) in &self.energy_mwh {
            total += e;
            if let Some(f) = factors.factor(source) {
                weighted += e * f;
                covered += e;
            }
        }
        (weighted, covered, total)
    }
}

/// Generation-weighted mean factor over sources with a known factor,
/// kg CO2-eq/kWh.
pub fn hourly_intensity(mix: &GenerationMixHour, factors: &EmissionFactorTable) -> Result<f64, GwpError> {
    mix.check()?;
    let (weighted, covered, _) = mix.split(factors);
    if covered <= 0.0 {
        return Err(GwpError::ZeroCoveredGeneration { timestamp: Some(mix.timestamp) });
    }
    Ok(weighted / covered)
}

/// Share of generation with a known factor.
pub fn coverage_ratio(mix: &GenerationMixHour, factors: &EmissionFactorTable) -> Result<f64, GwpError> {
    mix.check()?;
    let (_, covered, total) = mix.split(factors);
    if total <= 0.0 {
        return Err(GwpError::ZeroTotalGeneration { timestamp: Some(mix.timestamp) });
    }
    Ok(covered / total)
}

/// Sources appearing in any hour without a factor, normalised and sorted.
pub fn unknown_sources(mix_hours: &[GenerationMixHour], factors: &EmissionFactorTable) -> Vec<String> {
    let mut unknown: Vec<String> = mix_hours
        .iter()
        .flat_map(|h| h.energy_mwh.keys())
        .filter(|s| factors.factor(s).is_none())
        .map(|s| normalize_source_name(s))
        .collect();
    unknown.sort();
    unknown.dedup();
    unknown
}

pub fn intensity_series(
    mix_hours: &[GenerationMixHour],
    factors: &EmissionFactorTable,
) -> Result<HourlySeries, GwpError> {
    intensity_series_with_warning(mix_hours, factors, DEFAULT_COVERAGE_WARNING)
}

/// Like [`intensity_series`], logging hours whose coverage falls below
/// `coverage_warning` and every unmapped source.
pub fn intensity_series_with_warning(
    mix_hours: &[GenerationMixHour],
    factors: &EmissionFactorTable,
    coverage_warning: f64,
) -> Result<HourlySeries, GwpError> {
    let first = mix_hours.first().ok_or(GwpError::EmptyMix)?;
    for pair in mix_hours.windows(2) {
        if pair[1].timestamp - pair[0].timestamp != Duration::hours(1) {
            return Err(GwpError::NonHourlyTimestamps {
                previous: pair[0].timestamp.format(TIMESTAMP_FORMAT).to_string(),
                next: pair[1].timestamp.format(TIMESTAMP_FORMAT).to_string(),
            });
        }
    }
    for source in unknown_sources(mix_hours, factors) {
        warn!("generation source {source:?} has no emission factor and is excluded");
    }
    let mut values = Vec::with_capacity(mix_hours.len());
    for hour in mix_hours {
        values.push(hourly_intensity(hour, factors)?);
        let coverage = coverage_ratio(hour, factors)?;
        if coverage < coverage_warning {
            warn!(
                "emission factors cover {:.1}% of generation at {}",
                coverage * 100.0,
                hour.timestamp.format(TIMESTAMP_FORMAT)
            );
        }
    }
    Ok(HourlySeries::new(first.timestamp, values))
}
