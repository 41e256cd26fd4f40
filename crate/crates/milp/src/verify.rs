//! Independent re-check of a candidate point against every row, bound and
//! integrality marker. Shares nothing with the simplex beyond the problem data.

use std::fmt;

use crate::problem::{MilpProblem, Sense};

pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension { expected: usize, found: usize },
    NonFinite { column: String, value: f64 },
    Row { row: String, activity: f64, sense: Sense, rhs: f64 },
    Bound { column: String, value: f64, lower: f64, upper: f64 },
    Integrality { column: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            Violation::NonFinite { column, value } => write!(f, "{column} = {value} is not finite"),
            Violation::Row { row, activity, sense, rhs } => {
                write!(f, "row {row}: activity {activity} violates {sense} {rhs}")
            }
            Violation::Bound { column, value, lower, upper } => {
                write!(f, "{column} = {value} outside [{lower}, {upper}]")
            }
            Violation::Integrality { column, value } => write!(f, "binary {column} = {value} is fractional"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// Names of violated rows.
    pub fn rows(&self) -> impl Iterator<Item = &str> {
        self.violations.iter().filter_map(|v| match v {
            Violation::Row { row, .. } => Some(row.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn verify_solution(problem: &MilpProblem, values: &[f64]) -> ViolationReport {
    verify_with_tolerance(problem, values, VERIFY_TOL)
}

pub fn verify_with_tolerance(problem: &MilpProblem, values: &[f64], tol: f64) -> ViolationReport {
    let mut violations = Vec::new();
    if values.len() != problem.num_columns() {
        violations.push(Violation::Dimension { expected: problem.num_columns(), found: values.len() });
        return ViolationReport { violations };
    }
    for (c, &v) in problem.columns().iter().zip(values) {
        if !v.is_finite() {
            violations.push(Violation::NonFinite { column: c.name.clone(), value: v });
            continue;
        }
        if v < c.lower - tol || v > c.upper + tol {
            violations.push(Violation::Bound { column: c.name.clone(), value: v, lower: c.lower, upper: c.upper });
        }
        if c.binary && (v - v.round()).abs() > tol {
            violations.push(Violation::Integrality { column: c.name.clone(), value: v });
        }
    }
    if violations.iter().any(|v| matches!(v, Violation::NonFinite { .. })) {
        return ViolationReport { violations };
    }
    for row in problem.rows() {
        if row.violation(values) > tol {
            violations.push(Violation::Row {
                row: row.name.clone(),
                activity: row.activity(values),
                sense: row.sense,
                rhs: row.rhs,
            });
        }
    }
    ViolationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MilpProblem {
        let mut p = MilpProblem::new("toy");
        let a = p.add_binary("delta_buy", 0.0);
        let b = p.add_binary("delta_sell", 0.0);
        let x = p.add_column("x", 0.0, 10.0, 1.0);
        p.add_row("excl", [(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
        p.add_row("cap", [(x, 1.0), (a, -10.0)], Sense::Le, 0.0);
        p
    }

    #[test]
    fn feasible_point_has_empty_report() {
        assert!(verify_solution(&toy(), &[1.0, 0.0, 4.0]).is_empty());
    }

    #[test]
    fn both_switches_on_is_reported() {
        let report = verify_solution(&toy(), &[1.0, 1.0, 0.0]);
        assert_eq!(report.rows().collect::<Vec<_>>(), vec!["excl"]);
    }

    #[test]
    fn bounds_integrality_and_dimension() {
        let report = verify_solution(&toy(), &[0.5, 0.0, 11.0]);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Integrality { .. })));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Bound { .. })));
        assert!(report.rows().any(|r| r == "cap"));
        let report = verify_solution(&toy(), &[0.0]);
        assert!(matches!(report.violations[0], Violation::Dimension { expected: 3, found: 1 }));
    }
}
