//! Dense bounded-variable primal simplex.
//!
//! Every original column is mapped onto one or two internal columns living in
//! `[0, ub]` (shift by a finite lower bound, reflect around a finite upper
//! bound, or split a free column). Rows get a slack or surplus column; rows
//! that cannot start from their slack get an artificial column for phase 1.
//! Nonbasic columns sit at either bound, so binaries and capacity limits never
//! need explicit rows.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule (lowest index enters, lowest basic index leaves on
//! ties) until the objective moves again, which rules out cycling.

use crate::error::ProblemError;
use crate::problem::{MilpProblem, Sense};

pub const FEASIBILITY_TOL: f64 = 1e-7;
const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// One value per problem column; meaningful only when `Optimal`.
    pub values: Vec<f64>,
    /// Objective including the problem's constant term.
    pub objective: f64,
    pub iterations: usize,
    /// Lagrangian bound from the final row duals; `None` if it is not finite.
    pub dual_bound: Option<f64>,
}

impl LpSolution {
    fn failed(status: LpStatus, columns: usize, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self { status, values: vec![0.0; columns], objective, iterations, dual_bound: None }
    }
}

/// Solves the linear program. With `relax_binaries` the binary columns are
/// treated as continuous in `[0, 1]`; without it every binary must already be
/// fixed by its bounds.
pub fn solve_lp(problem: &MilpProblem, relax_binaries: bool) -> Result<LpSolution, ProblemError> {
    problem.check()?;
    if !relax_binaries {
        if let Some(c) = problem.columns().iter().find(|c| c.binary && c.lower != c.upper) {
            return Err(ProblemError::UnfixedBinary { column: c.name.clone() });
        }
    }
    let lower: Vec<f64> = problem.columns().iter().map(|c| c.lower).collect();
    let upper: Vec<f64> = problem.columns().iter().map(|c| c.upper).collect();
    Ok(solve_with_bounds(problem, &lower, &upper))
}

/// Solves the relaxation with column bounds replaced by `lower`/`upper`.
/// The problem is assumed to have passed [`MilpProblem::check`].
pub(crate) fn solve_with_bounds(problem: &MilpProblem, lower: &[f64], upper: &[f64]) -> LpSolution {
    let n_orig = problem.num_columns();
    if (0..n_orig).any(|j| lower[j] > upper[j]) {
        return LpSolution::failed(LpStatus::Infeasible, n_orig, 0);
    }
    let mut tableau = Tableau::build(problem, lower, upper);
    let mut iterations = 0;

    if tableau.has_artificials() {
        match tableau.run(Phase::One, &mut iterations) {
            RunOutcome::Optimal => {}
            // Phase 1 is bounded below by zero.
            RunOutcome::Unbounded => unreachable!("phase 1 objective is bounded"),
            RunOutcome::IterationLimit => {
                return LpSolution::failed(LpStatus::IterationLimit, n_orig, iterations);
            }
        }
        if tableau.infeasibility() > FEASIBILITY_TOL * tableau.rhs_scale {
            return LpSolution::failed(LpStatus::Infeasible, n_orig, iterations);
        }
        tableau.retire_artificials();
    }

    match tableau.run(Phase::Two, &mut iterations) {
        RunOutcome::Optimal => {}
        RunOutcome::Unbounded => return LpSolution::failed(LpStatus::Unbounded, n_orig, iterations),
        RunOutcome::IterationLimit => {
            return LpSolution::failed(LpStatus::IterationLimit, n_orig, iterations);
        }
    }

    let mut values = tableau.primal_values(n_orig);
    for j in 0..n_orig {
        // Snap round-off just outside a bound back onto it.
        if values[j] < lower[j] && values[j] > lower[j] - 1e-9 {
            values[j] = lower[j];
        }
        if values[j] > upper[j] && values[j] < upper[j] + 1e-9 {
            values[j] = upper[j];
        }
    }
    let objective = problem.objective_value(&values);
    let duals = tableau.row_duals();
    let dual_bound = lagrangian_bound(problem, lower, upper, &duals);
    LpSolution { status: LpStatus::Optimal, values, objective, iterations, dual_bound }
}

/// Weak-duality bound `min_x L(x, y)` over the column box for sign-feasible `y`.
fn lagrangian_bound(problem: &MilpProblem, lower: &[f64], upper: &[f64], duals: &[f64]) -> Option<f64> {
    let mut reduced: Vec<f64> = problem.columns().iter().map(|c| c.cost).collect();
    let mut bound = problem.objective_constant();
    for (row, &y) in problem.rows().iter().zip(duals) {
        let y = match row.sense {
            Sense::Le => y.min(0.0),
            Sense::Ge => y.max(0.0),
            Sense::Eq => y,
        };
        bound += y * row.rhs;
        for &(j, a) in &row.terms {
            reduced[j] -= y * a;
        }
    }
    for (j, &d) in reduced.iter().enumerate() {
        if d.abs() <= OPTIMALITY_TOL {
            continue;
        }
        let at = if d > 0.0 { lower[j] } else { upper[j] };
        if !at.is_finite() {
            return None;
        }
        bound += d * at;
    }
    Some(bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum RunOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy)]
struct InternalColumn {
    original: usize,
    sign: f64,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `B^-1 A`.
    body: Vec<f64>,
    /// Values of the basic variables, one per row.
    basic_values: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    reduced_phase1: Vec<f64>,
    reduced_phase2: Vec<f64>,
    structural: Vec<InternalColumn>,
    offsets: Vec<f64>,
    first_artificial: usize,
    /// Column that formed the identity for each row in the starting basis.
    start_column: Vec<usize>,
    row_sign: Vec<f64>,
    rhs_scale: f64,
}

impl Tableau {
    fn build(problem: &MilpProblem, lower: &[f64], upper: &[f64]) -> Self {
        let n_orig = problem.num_columns();
        let mut structural = Vec::with_capacity(n_orig);
        let mut internal_of: Vec<Vec<usize>> = vec![Vec::new(); n_orig];
        let mut internal_upper = Vec::with_capacity(n_orig);
        let mut offsets = vec![0.0; n_orig];
        for j in 0..n_orig {
            let (l, u) = (lower[j], upper[j]);
            let mut push = |sign: f64, ub: f64| {
                internal_of[j].push(structural.len());
                structural.push(InternalColumn { original: j, sign });
                internal_upper.push(ub);
            };
            if l.is_finite() {
                offsets[j] = l;
                push(1.0, u - l);
            } else if u.is_finite() {
                offsets[j] = u;
                push(-1.0, f64::INFINITY);
            } else {
                push(1.0, f64::INFINITY);
                push(-1.0, f64::INFINITY);
            }
        }

        let m = problem.num_rows();
        let n_struct = structural.len();
        let n_slack = problem.rows().iter().filter(|r| r.sense != Sense::Eq).count();

        // Shifted right-hand sides decide the row orientation and which rows
        // need an artificial.
        let mut rhs = Vec::with_capacity(m);
        let mut row_sign = Vec::with_capacity(m);
        let mut needs_artificial = Vec::with_capacity(m);
        for row in problem.rows() {
            let shifted = row.rhs - row.terms.iter().map(|&(j, a)| a * offsets[j]).sum::<f64>();
            let sign = if shifted < 0.0 { -1.0 } else { 1.0 };
            let slack_coef = match row.sense {
                Sense::Le => Some(sign),
                Sense::Ge => Some(-sign),
                Sense::Eq => None,
            };
            rhs.push(shifted * sign);
            row_sign.push(sign);
            needs_artificial.push(slack_coef != Some(1.0));
        }
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let cols = n_struct + n_slack + n_art;
        let first_artificial = n_struct + n_slack;

        let mut body = vec![0.0; m * cols];
        let mut upper_all = internal_upper;
        upper_all.resize(cols, f64::INFINITY);
        let mut basis = vec![0; m];
        let mut start_column = vec![0; m];
        let mut slack = n_struct;
        let mut art = first_artificial;
        for (i, row) in problem.rows().iter().enumerate() {
            let sign = row_sign[i];
            let base = i * cols;
            for &(j, a) in &row.terms {
                for &k in &internal_of[j] {
                    body[base + k] += sign * a * structural[k].sign;
                }
            }
            let slack_col = match row.sense {
                Sense::Eq => None,
                Sense::Le => {
                    body[base + slack] = sign;
                    slack += 1;
                    Some(slack - 1)
                }
                Sense::Ge => {
                    body[base + slack] = -sign;
                    slack += 1;
                    Some(slack - 1)
                }
            };
            if needs_artificial[i] {
                body[base + art] = 1.0;
                basis[i] = art;
                art += 1;
            } else {
                basis[i] = slack_col.expect("row without artificial has a slack");
            }
            start_column[i] = basis[i];
        }

        let mut reduced_phase2 = vec![0.0; cols];
        for (k, ic) in structural.iter().enumerate() {
            reduced_phase2[k] = problem.column(ic.original).cost * ic.sign;
        }
        let mut reduced_phase1 = vec![0.0; cols];
        for r in reduced_phase1.iter_mut().skip(first_artificial) {
            *r = 1.0;
        }
        for i in 0..m {
            if basis[i] >= first_artificial {
                let base = i * cols;
                for k in 0..cols {
                    reduced_phase1[k] -= body[base + k];
                }
            }
        }

        let mut is_basic = vec![false; cols];
        for &b in &basis {
            is_basic[b] = true;
        }
        let rhs_scale = rhs.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));

        Tableau {
            rows: m,
            cols,
            body,
            basic_values: rhs,
            basis,
            is_basic,
            at_upper: vec![false; cols],
            upper: upper_all,
            reduced_phase1,
            reduced_phase2,
            structural,
            offsets,
            first_artificial,
            start_column,
            row_sign,
            rhs_scale,
        }
    }

    fn has_artificials(&self) -> bool {
        self.first_artificial < self.cols
    }

    fn infeasibility(&self) -> f64 {
        let basic: f64 = (0..self.rows)
            .filter(|&i| self.basis[i] >= self.first_artificial)
            .map(|i| self.basic_values[i])
            .sum();
        let nonbasic: f64 = (self.first_artificial..self.cols)
            .filter(|&k| !self.is_basic[k] && self.at_upper[k])
            .map(|k| self.upper[k])
            .sum();
        basic + nonbasic
    }

    /// Pins every artificial at zero; basic ones leave on the next pivot
    /// through their row.
    fn retire_artificials(&mut self) {
        for k in self.first_artificial..self.cols {
            self.upper[k] = 0.0;
            self.at_upper[k] = false;
        }
        for i in 0..self.rows {
            if self.basis[i] >= self.first_artificial {
                self.basic_values[i] = 0.0;
            }
        }
    }

    fn run(&mut self, phase: Phase, iterations: &mut usize) -> RunOutcome {
        let limit = 50 * (self.rows + self.cols) + 1000;
        let mut degenerate = 0usize;
        loop {
            if *iterations >= limit {
                return RunOutcome::IterationLimit;
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            let Some((entering, increasing)) = self.price(phase, bland) else {
                return RunOutcome::Optimal;
            };
            *iterations += 1;
            let dir = if increasing { 1.0 } else { -1.0 };
            let (step, leaving) = self.ratio_test(entering, dir, bland);
            if !step.is_finite() {
                return RunOutcome::Unbounded;
            }
            if step <= 1e-11 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..self.rows {
                let alpha = self.body[i * self.cols + entering];
                if alpha != 0.0 {
                    self.basic_values[i] -= dir * alpha * step;
                }
            }
            match leaving {
                None => {
                    self.at_upper[entering] = !self.at_upper[entering];
                }
                Some((r, leaves_at_upper)) => {
                    let entering_value = if increasing { step } else { self.upper[entering] - step };
                    let old = self.basis[r];
                    self.basic_values[r] = entering_value;
                    self.is_basic[old] = false;
                    self.at_upper[old] = leaves_at_upper;
                    self.is_basic[entering] = true;
                    self.at_upper[entering] = false;
                    self.basis[r] = entering;
                    self.pivot(r, entering, phase);
                }
            }
        }
    }

    /// Returns the entering column and whether it increases from its lower bound.
    fn price(&self, phase: Phase, bland: bool) -> Option<(usize, bool)> {
        let reduced = match phase {
            Phase::One => &self.reduced_phase1,
            Phase::Two => &self.reduced_phase2,
        };
        let mut best: Option<(usize, bool)> = None;
        let mut best_score = 0.0;
        for k in 0..self.cols {
            if self.is_basic[k] || self.upper[k] <= 0.0 {
                continue;
            }
            let d = reduced[k];
            let (score, increasing) = if !self.at_upper[k] && d < -OPTIMALITY_TOL {
                (-d, true)
            } else if self.at_upper[k] && d > OPTIMALITY_TOL {
                (d, false)
            } else {
                continue;
            };
            if bland {
                return Some((k, increasing));
            }
            if score > best_score {
                best_score = score;
                best = Some((k, increasing));
            }
        }
        best
    }

    /// Step length and the leaving row (with the bound it leaves at); `None`
    /// for the row means the entering column flips to its other bound.
    fn ratio_test(&self, entering: usize, dir: f64, bland: bool) -> (f64, Option<(usize, bool)>) {
        let mut step = self.upper[entering];
        let mut leaving: Option<(usize, bool)> = None;
        let mut leaving_alpha = 0.0;
        for i in 0..self.rows {
            let alpha = self.body[i * self.cols + entering];
            if alpha.abs() < PIVOT_TOL {
                continue;
            }
            let s = dir * alpha;
            let b = self.basis[i];
            let (limit, at_upper) = if s > 0.0 {
                (self.basic_values[i] / s, false)
            } else {
                let ub = self.upper[b];
                if !ub.is_finite() {
                    continue;
                }
                ((ub - self.basic_values[i]) / -s, true)
            };
            let limit = limit.max(0.0);
            let better = if limit < step - 1e-12 {
                true
            } else if limit <= step + 1e-12 {
                match leaving {
                    // A bounded pivot beats a flip on ties only when strictly shorter.
                    None => false,
                    Some((r, _)) => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            alpha.abs() > leaving_alpha
                        }
                    }
                }
            } else {
                false
            };
            if better {
                step = limit.min(step);
                leaving = Some((i, at_upper));
                leaving_alpha = alpha.abs();
            }
        }
        (step, leaving)
    }

    fn pivot(&mut self, r: usize, k: usize, phase: Phase) {
        let cols = self.cols;
        let pivot = self.body[r * cols + k];
        let mut pivot_row: Vec<(usize, f64)> = Vec::new();
        {
            let row = &mut self.body[r * cols..(r + 1) * cols];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= pivot;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        pivot_row.push((j, *v));
                    }
                }
            }
            row[k] = 1.0;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let base = i * cols;
            let f = self.body[base + k];
            if f == 0.0 {
                continue;
            }
            for &(j, v) in &pivot_row {
                let cell = &mut self.body[base + j];
                *cell -= f * v;
                if cell.abs() < DROP_TOL {
                    *cell = 0.0;
                }
            }
            self.body[base + k] = 0.0;
        }
        let eliminate = |reduced: &mut Vec<f64>| {
            let f = reduced[k];
            if f != 0.0 {
                for &(j, v) in &pivot_row {
                    reduced[j] -= f * v;
                }
                reduced[k] = 0.0;
            }
        };
        eliminate(&mut self.reduced_phase2);
        if phase == Phase::One {
            eliminate(&mut self.reduced_phase1);
        }
    }

    fn internal_values(&self) -> Vec<f64> {
        let mut y: Vec<f64> = (0..self.cols)
            .map(|k| if self.at_upper[k] { self.upper[k] } else { 0.0 })
            .collect();
        for (i, &b) in self.basis.iter().enumerate() {
            y[b] = self.basic_values[i];
        }
        y
    }

    fn primal_values(&self, n_orig: usize) -> Vec<f64> {
        let y = self.internal_values();
        let mut x = self.offsets.clone();
        debug_assert_eq!(x.len(), n_orig);
        for (k, ic) in self.structural.iter().enumerate() {
            x[ic.original] += ic.sign * y[k];
        }
        x
    }

    /// Duals of the original rows: `y_i = -d(start column of row i)`,
    /// corrected for the orientation applied at build time.
    fn row_duals(&self) -> Vec<f64> {
        (0..self.rows).map(|i| -self.reduced_phase2[self.start_column[i]] * self.row_sign[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(lower: f64, upper: f64, cost: f64) -> (MilpProblem, usize) {
        let mut p = MilpProblem::new("t");
        let x = p.add_column("x", lower, upper, cost);
        (p, x)
    }

    #[test]
    fn min_x_subject_to_x_ge_1() {
        let (mut p, x) = single(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        p.add_row("c", [(x, 1.0)], Sense::Ge, 1.0);
        let s = solve_lp(&p, true).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[x] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_neg_x_with_upper_row() {
        let (mut p, x) = single(0.0, f64::INFINITY, -1.0);
        p.add_row("c", [(x, 1.0)], Sense::Le, 5.0);
        let s = solve_lp(&p, true).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[x] - 5.0).abs() < 1e-12);
        assert!((s.objective + 5.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let (mut p, x) = single(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        p.add_row("lo", [(x, 1.0)], Sense::Ge, 2.0);
        p.add_row("hi", [(x, 1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&p, true).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let (mut p, x) = single(0.0, f64::INFINITY, -1.0);
        p.add_row("c", [(x, 1.0)], Sense::Ge, 1.0);
        assert_eq!(solve_lp(&p, true).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_reflected_columns() {
        // min x - y, x free with x >= -3 via row, y <= 2 with no lower bound.
        let mut p = MilpProblem::new("t");
        let x = p.add_column("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = p.add_column("y", f64::NEG_INFINITY, 2.0, -1.0);
        p.add_row("floor", [(x, 1.0)], Sense::Ge, -3.0);
        p.add_row("link", [(x, 1.0), (y, 1.0)], Sense::Ge, -10.0);
        let s = solve_lp(&p, true).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[x] + 3.0).abs() < 1e-9);
        assert!((s.values[y] - 2.0).abs() < 1e-9);
        assert!((s.objective + 5.0).abs() < 1e-9);
    }

    #[test]
    fn unfixed_binary_requires_relaxation() {
        let mut p = MilpProblem::new("t");
        p.add_binary("b", 1.0);
        assert!(matches!(solve_lp(&p, false), Err(ProblemError::UnfixedBinary { .. })));
        assert_eq!(solve_lp(&p, true).unwrap().status, LpStatus::Optimal);
    }

    #[test]
    fn classic_two_variable_lp_with_duality() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36.
        let mut p = MilpProblem::new("t");
        let x = p.add_column("x", 0.0, f64::INFINITY, -3.0);
        let y = p.add_column("y", 0.0, f64::INFINITY, -5.0);
        p.add_row("a", [(x, 1.0)], Sense::Le, 4.0);
        p.add_row("b", [(y, 2.0)], Sense::Le, 12.0);
        p.add_row("c", [(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        let s = solve_lp(&p, true).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.values[x] - 2.0).abs() < 1e-9 && (s.values[y] - 6.0).abs() < 1e-9);
        let bound = s.dual_bound.unwrap();
        assert!(s.objective >= bound - 1e-6);
        assert!((s.objective - bound).abs() < 1e-6);
    }

    #[test]
    fn equality_and_surplus_rows() {
        // min 2a + 3b s.t. a + b = 10, a >= 2, b >= 3, a <= 6 (bound).
        let mut p = MilpProblem::new("t");
        let a = p.add_column("a", 0.0, 6.0, 2.0);
        let b = p.add_column("b", 0.0, f64::INFINITY, 3.0);
        p.add_row("sum", [(a, 1.0), (b, 1.0)], Sense::Eq, 10.0);
        p.add_row("amin", [(a, 1.0)], Sense::Ge, 2.0);
        p.add_row("bmin", [(b, 1.0)], Sense::Ge, 3.0);
        let s = solve_lp(&p, true).unwrap();
        assert!((s.values[a] - 6.0).abs() < 1e-9);
        assert!((s.objective - 24.0).abs() < 1e-9);
        assert!((s.dual_bound.unwrap() - 24.0).abs() < 1e-6);
    }
}
