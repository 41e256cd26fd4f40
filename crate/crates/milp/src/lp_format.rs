//! CPLEX-style LP text export, plus a reader for `name value` solution files
//! produced by external solvers.
//!
//! Output is deterministic: columns and rows keep their insertion order and
//! numbers use Rust's shortest round-trip formatting.

use std::collections::HashMap;
use std::fmt::Write;

use crate::error::SolutionFileError;
use crate::problem::{MilpProblem, Sense};

const LINE_WIDTH: usize = 100;

pub fn export_lp_text(problem: &MilpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", problem.label());
    for comment in problem.comments() {
        for line in comment.lines() {
            let _ = writeln!(out, "\\ {line}");
        }
    }
    let _ = writeln!(out, "\\ Objective constant: {}", number(problem.objective_constant()));
    out.push_str("Minimize\n");

    let objective: Vec<(usize, f64)> = problem
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.cost != 0.0)
        .map(|(j, c)| (j, c.cost))
        .collect();
    write_expression(&mut out, problem, "obj", &objective);
    out.push('\n');

    out.push_str("Subject To\n");
    for row in problem.rows() {
        write_expression(&mut out, problem, &row.name, &row.terms);
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {sense} {}", number(row.rhs));
    }

    out.push_str("Bounds\n");
    for c in problem.columns().iter().filter(|c| !c.binary) {
        let _ = match (c.lower.is_finite(), c.upper.is_finite()) {
            (true, true) if c.lower == c.upper => writeln!(out, " {} = {}", c.name, number(c.lower)),
            (true, true) => writeln!(out, " {} <= {} <= {}", number(c.lower), c.name, number(c.upper)),
            (true, false) => writeln!(out, " {} >= {}", c.name, number(c.lower)),
            (false, true) => writeln!(out, " -inf <= {} <= {}", c.name, number(c.upper)),
            (false, false) => writeln!(out, " {} free", c.name),
        };
    }
    // Binaries default to [0, 1]; only tighter bounds need stating.
    for c in problem.columns().iter().filter(|c| c.binary && (c.lower != 0.0 || c.upper != 1.0)) {
        let _ = writeln!(out, " {} <= {} <= {}", number(c.lower), c.name, number(c.upper));
    }

    if problem.num_binaries() > 0 {
        out.push_str("Binaries\n");
        let mut line = String::new();
        for c in problem.columns().iter().filter(|c| c.binary) {
            if line.len() + c.name.len() + 1 > LINE_WIDTH {
                let _ = writeln!(out, "{line}");
                line.clear();
            }
            line.push(' ');
            line.push_str(&c.name);
        }
        if !line.is_empty() {
            let _ = writeln!(out, "{line}");
        }
    }
    out.push_str("End\n");
    out
}

/// Writes ` label: a x + b y ...` without a trailing newline, wrapping long
/// expressions onto indented continuation lines.
fn write_expression(out: &mut String, problem: &MilpProblem, label: &str, terms: &[(usize, f64)]) {
    let mut line = format!(" {label}:");
    let mut first = true;
    let emit = |piece: String, line: &mut String, out: &mut String| {
        if line.len() + piece.len() > LINE_WIDTH {
            out.push_str(line);
            out.push('\n');
            line.clear();
            line.push_str("  ");
        }
        line.push_str(&piece);
    };
    if terms.is_empty() {
        // A zero expression still needs one term to be parseable.
        let name = problem.columns().first().map_or("x0", |c| c.name.as_str());
        emit(format!(" 0 {name}"), &mut line, out);
    }
    for &(j, a) in terms {
        let name = &problem.column(j).name;
        let piece = if first {
            if a == 1.0 {
                format!(" {name}")
            } else if a == -1.0 {
                format!(" - {name}")
            } else if a < 0.0 {
                format!(" - {} {name}", number(-a))
            } else {
                format!(" {} {name}", number(a))
            }
        } else if a == 1.0 {
            format!(" + {name}")
        } else if a == -1.0 {
            format!(" - {name}")
        } else if a < 0.0 {
            format!(" - {} {name}", number(-a))
        } else {
            format!(" + {} {name}", number(a))
        };
        first = false;
        emit(piece, &mut line, out);
    }
    out.push_str(&line);
}

fn number(v: f64) -> String {
    if v == 0.0 {
        // Avoid "-0".
        return "0".into();
    }
    format!("{v}")
}

/// Parses `name value` pairs (whitespace or comma separated, `#` comments,
/// optional header line) into a value vector ordered like the problem's
/// columns.
pub fn read_solution_text(problem: &MilpProblem, text: &str) -> Result<Vec<f64>, SolutionFileError> {
    let index: HashMap<&str, usize> = problem.columns().iter().enumerate().map(|(j, c)| (c.name.as_str(), j)).collect();
    let mut values: Vec<Option<f64>> = vec![None; problem.num_columns()];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(SolutionFileError::Parse { line: n + 1, message: format!("expected `name value`, got {raw:?}") });
        }
        let value: f64 = match fields[1].parse() {
            Ok(v) => v,
            Err(_) if n == 0 => continue, // header
            Err(_) => {
                return Err(SolutionFileError::Parse { line: n + 1, message: format!("bad number {:?}", fields[1]) })
            }
        };
        let Some(&j) = index.get(fields[0]) else {
            return Err(SolutionFileError::UnknownColumn { name: fields[0].to_string() });
        };
        values[j] = Some(value);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| SolutionFileError::MissingColumn { name: problem.column(j).name.clone() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_problem() {
        let mut p = MilpProblem::new("one");
        let x = p.add_column("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        p.add_row("c1", [(x, 1.0)], Sense::Ge, 1.0);
        let text = export_lp_text(&p);
        assert!(text.contains("Minimize"));
        assert_eq!(text.matches("Subject To").count(), 1);
        assert!(text.contains(" c1: x >= 1\n"));
        assert!(text.contains(" x free\n"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn binaries_listed_in_their_section() {
        let mut p = MilpProblem::new("bin");
        let x = p.add_column("chi_buy_0_B1", 0.0, 70.0, 0.2);
        let d = p.add_binary("delta_buy_0_B1", 0.0);
        p.add_row("imp_0_B1", [(x, 1.0), (d, -70.0)], Sense::Le, 0.0);
        let text = export_lp_text(&p);
        let binaries = text.split("Binaries\n").nth(1).unwrap();
        assert!(binaries.contains("delta_buy_0_B1"));
        assert!(!binaries.contains("chi_buy_0_B1"));
        assert!(text.contains(" imp_0_B1: chi_buy_0_B1 - 70 delta_buy_0_B1 <= 0\n"));
        assert_eq!(text, export_lp_text(&p.clone()));
    }

    #[test]
    fn long_rows_wrap() {
        let mut p = MilpProblem::new("wide");
        let cols: Vec<usize> = (0..40).map(|i| p.add_column(format!("column_{i}"), 0.0, 1.0, 1.5)).collect();
        p.add_row("wide", cols.iter().map(|&c| (c, 2.0)), Sense::Le, 5.0);
        let text = export_lp_text(&p);
        assert!(text.lines().all(|l| l.len() <= LINE_WIDTH + 30));
    }

    #[test]
    fn solution_text_round_trip() {
        let mut p = MilpProblem::new("s");
        p.add_column("a", 0.0, 1.0, 0.0);
        p.add_column("b", 0.0, 1.0, 0.0);
        let v = read_solution_text(&p, "name,value\nb,0.25\na 1 # comment\n").unwrap();
        assert_eq!(v, vec![1.0, 0.25]);
        assert!(matches!(read_solution_text(&p, "a 1\n"), Err(SolutionFileError::MissingColumn { .. })));
        assert!(matches!(read_solution_text(&p, "a 1\nb 2\nc 3\n"), Err(SolutionFileError::UnknownColumn { .. })));
    }
}
