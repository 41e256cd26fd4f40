//! Local energy community scheduling: data model and validation, grid carbon
//! intensity, MILP construction, scenario settlement, ingestion and reports.

pub mod domain;
pub mod fixture;
pub mod gwp;
pub mod ingest;
pub mod model;
pub mod report;
pub mod scenario;

pub use domain::{
    validate_community, BessSpec, CommunitySpec, HourlySeries, Participant, PvSpec, SharingMode, SharingScheme,
    ValidationIssue, ValidationReport,
};
pub use gwp::{
    coverage_ratio, hourly_intensity, intensity_series, EmissionFactorTable, GenerationMixHour, GwpError,
};
pub use model::{build, CommunityModel, Dimensions, ModelError, Objective, SharingStrategy, VarKind, VariableIndex};
pub use scenario::{
    compare, compute_baseline, percent_delta, run_matrix, run_scenario, BaselineResult, DeltaReport, Figures, RunOptions, Scenario, ScenarioError,
    SettlementReport,
};
