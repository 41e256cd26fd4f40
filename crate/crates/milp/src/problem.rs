//! Sparse mixed-binary linear program: columns with bounds and costs, rows
//! with a sense and right-hand side, and a set of binary markers.
//!
//! Problems are assembled through the `add_*` methods and are read-only
//! afterwards as far as the solver is concerned.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::ProblemError;

/// Row sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    /// Terms sorted by column index, no duplicates, no zero coefficients.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Signed amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// How a binary column should be rounded from a relaxed solution.
///
/// Used by the branch-and-bound heuristics: a hinted binary is derived from
/// the continuous part of the relaxation instead of its own fractional value.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundingHint {
    /// The binary enables `flow` (`flow <= M * binary`): 1 iff the flow is positive.
    Switch { flow: usize },
    /// The binary flags the sign of `constant + Σ terms`: 1 iff non-negative.
    Sign { terms: Vec<(usize, f64)>, constant: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    label: String,
    comments: Vec<String>,
    columns: Vec<Column>,
    rows: Vec<Row>,
    objective_constant: f64,
    hints: BTreeMap<usize, RoundingHint>,
    exclusive_pairs: Vec<(usize, usize)>,
}

impl MilpProblem {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), ..Self::default() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    pub fn add_comment(&mut self, comment: impl Into<String>) {
        self.comments.push(comment.into());
    }

    pub fn clear_comments(&mut self) {
        self.comments.clear();
    }

    pub fn add_column(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.columns.push(Column { name: name.into(), lower, upper, cost, binary: false });
        self.columns.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.columns.push(Column { name: name.into(), lower: 0.0, upper: 1.0, cost, binary: true });
        self.columns.len() - 1
    }

    /// Adds a row. Duplicate column entries are summed and exact zeros dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, a) in terms {
            *merged.entry(j).or_insert(0.0) += a;
        }
        let terms = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.rows.push(Row { name: name.into(), terms, sense, rhs });
        self.rows.len() - 1
    }

    /// Keeps only the rows for which `keep` returns true.
    pub fn retain_rows(&mut self, keep: impl FnMut(&Row) -> bool) {
        self.rows.retain(keep);
    }

    pub fn set_cost(&mut self, column: usize, cost: f64) {
        self.columns[column].cost = cost;
    }

    pub fn set_bounds(&mut self, column: usize, lower: f64, upper: f64) {
        self.columns[column].lower = lower;
        self.columns[column].upper = upper;
    }

    pub fn add_objective_constant(&mut self, value: f64) {
        self.objective_constant += value;
    }

    pub fn set_hint(&mut self, binary: usize, hint: RoundingHint) {
        self.hints.insert(binary, hint);
    }

    /// Declares two binaries whose enabled flows should never both be positive.
    pub fn add_exclusive_pair(&mut self, a: usize, b: usize) {
        self.exclusive_pairs.push((a, b));
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn hints(&self) -> &BTreeMap<usize, RoundingHint> {
        &self.hints
    }

    pub fn exclusive_pairs(&self) -> &[(usize, usize)] {
        &self.exclusive_pairs
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns.iter().enumerate().filter(|(_, c)| c.binary).map(|(j, _)| j)
    }

    pub fn num_binaries(&self) -> usize {
        self.columns.iter().filter(|c| c.binary).count()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn row_index(&self, name: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.name == name)
    }

    /// Objective value including the constant term.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.columns.iter().zip(values).map(|(c, v)| c.cost * v).sum::<f64>()
    }

    /// Structural checks: finite data, consistent bounds and indices, unique names.
    pub fn check(&self) -> Result<(), ProblemError> {
        if !self.objective_constant.is_finite() {
            return Err(ProblemError::NonFinite { location: "objective constant".into() });
        }
        let mut names = HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(ProblemError::DuplicateName { name: c.name.clone() });
            }
            if !c.cost.is_finite() {
                return Err(ProblemError::NonFinite { location: format!("cost of {}", c.name) });
            }
            if c.lower.is_nan() || c.upper.is_nan() || c.lower == f64::INFINITY || c.upper == f64::NEG_INFINITY {
                return Err(ProblemError::NonFinite { location: format!("bounds of {}", c.name) });
            }
            if c.lower > c.upper {
                return Err(ProblemError::InvertedBounds { column: c.name.clone(), lower: c.lower, upper: c.upper });
            }
            if c.binary && (c.lower < 0.0 || c.upper > 1.0) {
                return Err(ProblemError::BinaryBounds { column: c.name.clone() });
            }
        }
        let mut row_names = HashSet::new();
        for r in &self.rows {
            if !row_names.insert(r.name.as_str()) {
                return Err(ProblemError::DuplicateName { name: r.name.clone() });
            }
            if !r.rhs.is_finite() {
                return Err(ProblemError::NonFinite { location: format!("rhs of {}", r.name) });
            }
            for &(j, a) in &r.terms {
                if j >= self.columns.len() {
                    return Err(ProblemError::ColumnOutOfRange { row: r.name.clone(), column: j });
                }
                if !a.is_finite() {
                    return Err(ProblemError::NonFinite { location: format!("row {}", r.name) });
                }
            }
        }
        for (&b, hint) in &self.hints {
            let referenced: Vec<usize> = match hint {
                RoundingHint::Switch { flow } => vec![b, *flow],
                RoundingHint::Sign { terms, .. } => std::iter::once(b).chain(terms.iter().map(|t| t.0)).collect(),
            };
            if let Some(&j) = referenced.iter().find(|&&j| j >= self.columns.len()) {
                return Err(ProblemError::ColumnOutOfRange { row: "rounding hint".into(), column: j });
            }
        }
        for &(a, b) in &self.exclusive_pairs {
            if a >= self.columns.len() || b >= self.columns.len() {
                return Err(ProblemError::ColumnOutOfRange { row: "exclusive pair".into(), column: a.max(b) });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_row_merges_duplicates_and_drops_zeros() {
        let mut p = MilpProblem::new("t");
        let x = p.add_column("x", 0.0, 1.0, 0.0);
        let y = p.add_column("y", 0.0, 1.0, 0.0);
        p.add_row("r", [(y, 1.0), (x, 2.0), (y, -1.0), (x, 0.5)], Sense::Le, 1.0);
        assert_eq!(p.rows()[0].terms, vec![(x, 2.5)]);
    }

    #[test]
    fn check_rejects_bad_data() {
        let mut p = MilpProblem::new("t");
        p.add_column("x", 1.0, 0.0, 0.0);
        assert!(matches!(p.check(), Err(ProblemError::InvertedBounds { .. })));

        let mut p = MilpProblem::new("t");
        let x = p.add_column("x", 0.0, 1.0, f64::NAN);
        let _ = x;
        assert!(matches!(p.check(), Err(ProblemError::NonFinite { .. })));

        let mut p = MilpProblem::new("t");
        p.add_column("x", 0.0, 1.0, 0.0);
        p.add_column("x", 0.0, 1.0, 0.0);
        assert!(matches!(p.check(), Err(ProblemError::DuplicateName { .. })));

        let mut p = MilpProblem::new("t");
        p.add_row("r", [(3, 1.0)], Sense::Eq, 0.0);
        assert!(matches!(p.check(), Err(ProblemError::ColumnOutOfRange { .. })));
    }

    #[test]
    fn violation_by_sense() {
        let row = Row { name: "r".into(), terms: vec![(0, 1.0)], sense: Sense::Ge, rhs: 2.0 };
        assert_eq!(row.violation(&[1.5]), 0.5);
        assert_eq!(row.violation(&[3.0]), 0.0);
    }
}
