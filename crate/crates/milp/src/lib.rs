//! Small exact mixed-binary linear programming toolkit: a sparse problem
//! representation, a dense bounded primal simplex, best-first
//! branch-and-bound, an independent solution verifier and LP text export.

pub mod branch;
pub mod error;
pub mod lp_format;
pub mod problem;
pub mod simplex;
pub mod verify;

pub use branch::{solve_milp, MilpConfig, MilpSolution};
pub use error::{ProblemError, SolutionFileError, SolveError};
pub use lp_format::{export_lp_text, read_solution_text};
pub use problem::{Column, MilpProblem, RoundingHint, Row, Sense};
pub use simplex::{solve_lp, LpSolution, LpStatus};
pub use verify::{verify_solution, verify_with_tolerance, Violation, ViolationReport};
