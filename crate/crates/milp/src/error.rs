use thiserror::Error;

use crate::branch::MilpSolution;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProblemError {
    #[error("non-finite value in {location}")]
    NonFinite { location: String },
    #[error("column {column} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { column: String, lower: f64, upper: f64 },
    #[error("binary column {column} has bounds outside [0, 1]")]
    BinaryBounds { column: String },
    #[error("duplicate name {name}")]
    DuplicateName { name: String },
    #[error("{row} references column {column}, which does not exist")]
    ColumnOutOfRange { row: String, column: usize },
    #[error("binary column {column} is not fixed and relaxation was not requested")]
    UnfixedBinary { column: String },
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("search limit reached after {nodes} nodes (lower bound {lower_bound}, gap {gap})")]
    LimitReached { incumbent: Option<Box<MilpSolution>>, lower_bound: f64, gap: f64, nodes: usize },
}

#[derive(Debug, Error)]
pub enum SolutionFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("solution file has no value for column {name}")]
    MissingColumn { name: String },
    #[error("solution file names unknown column {name}")]
    UnknownColumn { name: String },
}
