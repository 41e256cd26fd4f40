//! Best-first branch-and-bound over binary columns.
//!
//! Each node re-solves the relaxation from scratch with its fixings applied.
//! Nodes are ordered by their parent's bound (deeper first, then creation
//! order on ties) and branch on the most fractional binary, lowest index on
//! ties.
//!
//! Before branching a node tries to close itself with a rounded point: hinted
//! binaries are read off the continuous part of the relaxation, others are
//! rounded to nearest. At the root this is the complementarity fast path:
//! when every declared exclusive pair carries at most one positive flow the
//! rounded point keeps the relaxation's objective and the search ends at one
//! node.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::SolveError;
use crate::problem::{MilpProblem, RoundingHint};
use crate::simplex::{solve_with_bounds, LpSolution, LpStatus, FEASIBILITY_TOL};
use crate::verify::verify_with_tolerance;

const ROUNDING_TOL: f64 = 1e-9;
const COMPLEMENTARITY_TOL: f64 = 1e-9;
/// Re-solves spent orienting exclusive pairs before the repair gives up.
const ORIENT_ROUNDS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpConfig {
    pub integrality_tol: f64,
    /// Relative tolerance for comparing objective values.
    pub objective_tol: f64,
    /// Maximum number of nodes solved after the root.
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
}

impl Default for MilpConfig {
    fn default() -> Self {
        Self { integrality_tol: 1e-6, objective_tol: 1e-9, node_limit: None, time_limit: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    /// Incumbent point; `status` is always `Optimal`, `iterations` counts
    /// simplex pivots over the whole search and `dual_bound` is the root's.
    pub lp: LpSolution,
    pub nodes: usize,
    /// Best remaining lower bound.
    pub bound: f64,
    pub gap: f64,
    /// True when the root relaxation closed by rounding.
    pub fast_path: bool,
    /// `(node, objective)` each time the incumbent improved.
    pub incumbent_trace: Vec<(usize, f64)>,
}

impl MilpSolution {
    pub fn values(&self) -> &[f64] {
        &self.lp.values
    }

    pub fn objective(&self) -> f64 {
        self.lp.objective
    }
}

pub fn solve_milp(problem: &MilpProblem, config: &MilpConfig) -> Result<MilpSolution, SolveError> {
    problem.check()?;
    let mut search = Search::new(problem, config);
    search.run()
}

struct Node {
    bound: f64,
    depth: usize,
    id: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is popped first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum Outcome {
    Closed,
    Branch(usize),
}

struct Search<'a> {
    problem: &'a MilpProblem,
    config: &'a MilpConfig,
    binaries: Vec<usize>,
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    incumbent: Option<(Vec<f64>, f64)>,
    trace: Vec<(usize, f64)>,
    nodes: usize,
    iterations: usize,
    started: Instant,
}

impl<'a> Search<'a> {
    fn new(problem: &'a MilpProblem, config: &'a MilpConfig) -> Self {
        Self {
            problem,
            config,
            binaries: problem.binaries().collect(),
            base_lower: problem.columns().iter().map(|c| c.lower).collect(),
            base_upper: problem.columns().iter().map(|c| c.upper).collect(),
            incumbent: None,
            trace: Vec::new(),
            nodes: 0,
            iterations: 0,
            started: Instant::now(),
        }
    }

    fn tolerance(&self, objective: f64) -> f64 {
        self.config.objective_tol * objective.abs().max(1.0)
    }

    fn incumbent_objective(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(_, obj)| *obj)
    }

    fn solve_node(&mut self, fixings: &[(usize, f64)]) -> LpSolution {
        self.nodes += 1;
        self.solve_fixed(fixings)
    }

    /// Relaxation with `fixings` applied; not counted as a search node.
    fn solve_fixed(&mut self, fixings: &[(usize, f64)]) -> LpSolution {
        let mut lower = self.base_lower.clone();
        let mut upper = self.base_upper.clone();
        for &(j, v) in fixings {
            lower[j] = v;
            upper[j] = v;
        }
        let lp = solve_with_bounds(self.problem, &lower, &upper);
        self.iterations += lp.iterations;
        lp
    }

    fn run(&mut self) -> Result<MilpSolution, SolveError> {
        let root = self.solve_node(&[]);
        match root.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(SolveError::Infeasible),
            LpStatus::Unbounded => return Err(SolveError::Unbounded),
            LpStatus::IterationLimit => return Err(SolveError::IterationLimit),
        }
        let root_dual = root.dual_bound;
        let fast_path = self.complementary(&root.values);
        let mut heap = BinaryHeap::new();
        let mut next_id = 0;
        let mut closed_at_root = false;
        match self.process(&root, &[], true) {
            Outcome::Closed => closed_at_root = true,
            Outcome::Branch(b) => push_children(&mut heap, &mut next_id, &[], b, root.objective, 0),
        }

        // Without an incumbent the search plunges depth-first towards the
        // relaxation's rounding; best-bound order resumes once one exists.
        let mut plunge: Option<Node> = None;
        loop {
            let (node, from_heap) = match plunge.take() {
                Some(node) => (node, false),
                None => match heap.pop() {
                    Some(node) => (node, true),
                    None => break,
                },
            };
            let best = self.incumbent_objective();
            if node.bound >= best - self.tolerance(best) {
                if from_heap {
                    heap.clear();
                    break;
                }
                continue;
            }
            let out_of_nodes = self.config.node_limit.is_some_and(|limit| self.nodes > limit);
            let out_of_time = self.config.time_limit.is_some_and(|limit| self.started.elapsed() >= limit);
            if out_of_nodes || out_of_time {
                let lower_bound = heap.iter().map(|n| n.bound).fold(node.bound, f64::min);
                return Err(self.limit_reached(lower_bound, root_dual));
            }
            let lp = self.solve_node(&node.fixings);
            match lp.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => return Err(SolveError::Unbounded),
                LpStatus::IterationLimit => return Err(SolveError::IterationLimit),
            }
            if let Outcome::Branch(b) = self.process(&lp, &node.fixings, false) {
                push_children(&mut heap, &mut next_id, &node.fixings, b, lp.objective, node.depth + 1);
                if self.incumbent.is_none() {
                    plunge = take_child(&mut heap, b, lp.values[b].round());
                }
            }
        }

        let Some((values, objective)) = self.incumbent.take() else {
            return Err(SolveError::Infeasible);
        };
        Ok(MilpSolution {
            lp: LpSolution {
                status: LpStatus::Optimal,
                values,
                objective,
                iterations: self.iterations,
                dual_bound: root_dual,
            },
            nodes: self.nodes,
            bound: objective,
            gap: 0.0,
            fast_path: fast_path && closed_at_root && self.nodes == 1,
            incumbent_trace: std::mem::take(&mut self.trace),
        })
    }

    fn limit_reached(&mut self, lower_bound: f64, root_dual: Option<f64>) -> SolveError {
        let nodes = self.nodes;
        let trace = std::mem::take(&mut self.trace);
        let iterations = self.iterations;
        let incumbent = self.incumbent.take().map(|(values, objective)| {
            Box::new(MilpSolution {
                lp: LpSolution { status: LpStatus::Optimal, values, objective, iterations, dual_bound: root_dual },
                nodes,
                bound: lower_bound,
                gap: objective - lower_bound,
                fast_path: false,
                incumbent_trace: trace,
            })
        });
        let gap = incumbent.as_ref().map_or(f64::INFINITY, |s| s.lp.objective - lower_bound);
        SolveError::LimitReached { incumbent, lower_bound, gap, nodes }
    }

    fn process(&mut self, lp: &LpSolution, fixings: &[(usize, f64)], is_root: bool) -> Outcome {
        let best = self.incumbent_objective();
        if lp.objective >= best - self.tolerance(best) {
            return Outcome::Closed;
        }
        let tol = self.config.integrality_tol;
        let fractional = self.most_fractional(&lp.values, tol);
        if fractional.is_none() {
            let mut snapped = lp.values.clone();
            for &b in &self.binaries {
                snapped[b] = snapped[b].round();
            }
            if !self.offer(snapped) {
                let fixed: Vec<(usize, f64)> = self.binaries.iter().map(|&b| (b, lp.values[b].round())).collect();
                self.fix_and_resolve(&fixed);
            }
            return Outcome::Closed;
        }

        let rounded = self.round_by_hints(&lp.values, fixings);
        self.offer(rounded.clone());
        if self.closes(lp.objective) {
            return Outcome::Closed;
        }
        if is_root {
            self.repair(&lp.values, &rounded, fixings);
            if self.closes(lp.objective) {
                return Outcome::Closed;
            }
        }
        Outcome::Branch(fractional.expect("checked above"))
    }

    fn closes(&self, node_objective: f64) -> bool {
        let best = self.incumbent_objective();
        best <= node_objective + self.tolerance(node_objective)
    }

    /// Seeds an incumbent from a failed rounding. Sign binaries are fixed
    /// first and the relaxation re-solved so flows can follow the new signs.
    /// Next, exclusive pairs carrying flow on both sides are closed on their
    /// weaker side, repeatedly, since the relaxation can use such simultaneous
    /// flows against coupling rows. Only if both fail is every binary fixed.
    fn repair(&mut self, values: &[f64], rounded: &[f64], fixings: &[(usize, f64)]) {
        let mut signs: Vec<(usize, f64)> = fixings.to_vec();
        for (&b, hint) in self.problem.hints() {
            if matches!(hint, RoundingHint::Sign { .. }) && !fixings.iter().any(|&(j, _)| j == b) {
                signs.push((b, rounded[b]));
            }
        }
        let mut values = values.to_vec();
        if signs.len() > fixings.len() {
            let lp = self.solve_fixed(&signs);
            if lp.status == LpStatus::Optimal {
                if self.offer(self.round_by_hints(&lp.values, &signs)) {
                    return;
                }
                values = lp.values;
            }
        }
        let mut oriented = signs.clone();
        for _ in 0..ORIENT_ROUNDS {
            let before = oriented.len();
            for &(a, b) in self.problem.exclusive_pairs() {
                let (fa, fb) = (self.pair_flow(&values, a), self.pair_flow(&values, b));
                let weaker = if fa >= fb { b } else { a };
                if fa * fb > COMPLEMENTARITY_TOL && !oriented.iter().any(|&(j, _)| j == weaker) {
                    oriented.push((weaker, 0.0));
                }
            }
            if oriented.len() == before {
                break;
            }
            let lp = self.solve_fixed(&oriented);
            if lp.status != LpStatus::Optimal {
                break;
            }
            if self.offer(self.round_by_hints(&lp.values, &oriented)) {
                return;
            }
            values = lp.values;
        }
        let fixed: Vec<(usize, f64)> = self.binaries.iter().map(|&b| (b, rounded[b])).collect();
        self.fix_and_resolve(&fixed);
    }

    /// Flow a binary switches on, or the binary's own value without a hint.
    fn pair_flow(&self, values: &[f64], binary: usize) -> f64 {
        match self.problem.hints().get(&binary) {
            Some(RoundingHint::Switch { flow }) => values[*flow].abs(),
            _ => values[binary],
        }
    }

    fn fix_and_resolve(&mut self, fixed: &[(usize, f64)]) {
        let lp = self.solve_fixed(fixed);
        if lp.status == LpStatus::Optimal {
            let mut values = lp.values;
            for &(b, v) in fixed {
                values[b] = v;
            }
            self.offer(values);
        }
    }

    /// Accepts `values` as the incumbent if it is feasible and better.
    fn offer(&mut self, values: Vec<f64>) -> bool {
        if !verify_with_tolerance(self.problem, &values, FEASIBILITY_TOL).is_empty() {
            return false;
        }
        let objective = self.problem.objective_value(&values);
        let best = self.incumbent_objective();
        if self.incumbent.is_none() || objective < best - 1e-12 {
            self.incumbent = Some((values, objective));
            self.trace.push((self.nodes, objective));
        }
        true
    }

    fn most_fractional(&self, values: &[f64], tol: f64) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut best_distance = tol;
        for &b in &self.binaries {
            let v = values[b];
            let distance = (v - v.floor()).min(v.ceil() - v);
            if distance > best_distance {
                best_distance = distance;
                best = Some(b);
            }
        }
        best
    }

    fn complementary(&self, values: &[f64]) -> bool {
        self.problem
            .exclusive_pairs()
            .iter()
            .all(|&(a, b)| self.pair_flow(values, a) * self.pair_flow(values, b) <= COMPLEMENTARITY_TOL)
    }

    fn round_by_hints(&self, values: &[f64], fixings: &[(usize, f64)]) -> Vec<f64> {
        let mut rounded = values.to_vec();
        let hints = self.problem.hints();
        for &b in &self.binaries {
            rounded[b] = match hints.get(&b) {
                Some(RoundingHint::Switch { flow }) => {
                    if values[*flow] > ROUNDING_TOL {
                        1.0
                    } else {
                        0.0
                    }
                }
                Some(RoundingHint::Sign { terms, constant }) => {
                    let level = constant + terms.iter().map(|&(j, a)| a * values[j]).sum::<f64>();
                    if level >= -ROUNDING_TOL {
                        1.0
                    } else {
                        0.0
                    }
                }
                None => values[b].round(),
            };
        }
        for &(j, v) in fixings {
            rounded[j] = v;
        }
        rounded
    }
}

/// Removes the just-pushed child that fixes `column` to `value`.
fn take_child(heap: &mut BinaryHeap<Node>, column: usize, value: f64) -> Option<Node> {
    let mut nodes = std::mem::take(heap).into_vec();
    let at = nodes.iter().rposition(|n| n.fixings.last() == Some(&(column, value)))?;
    let child = nodes.swap_remove(at);
    *heap = BinaryHeap::from(nodes);
    Some(child)
}

fn push_children(
    heap: &mut BinaryHeap<Node>,
    next_id: &mut usize,
    fixings: &[(usize, f64)],
    column: usize,
    bound: f64,
    depth: usize,
) {
    for value in [0.0, 1.0] {
        let mut child = fixings.to_vec();
        child.push((column, value));
        heap.push(Node { bound, depth, id: *next_id, fixings: child });
        *next_id += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Sense;

    #[test]
    fn knapsack_matches_enumeration() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4  -> a = c = 1, value 8.
        let mut p = MilpProblem::new("knap");
        let a = p.add_binary("a", -5.0);
        let b = p.add_binary("b", -4.0);
        let c = p.add_binary("c", -3.0);
        p.add_row("w", [(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 4.0);
        let s = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert!((s.objective() + 8.0).abs() < 1e-9);
        assert_eq!(s.gap, 0.0);
        assert!(s.incumbent_trace.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn node_limit_zero_on_fractional_root() {
        // Root relaxation: x1 = 1, x2 = 0.3, objective -1.3.
        let mut p = MilpProblem::new("frac");
        let x1 = p.add_binary("x1", -1.0);
        let x2 = p.add_binary("x2", -1.0);
        p.add_row("cap", [(x1, 2.0), (x2, 2.0)], Sense::Le, 2.6);
        let config = MilpConfig { node_limit: Some(0), ..MilpConfig::default() };
        match solve_milp(&p, &config) {
            Err(SolveError::LimitReached { incumbent, lower_bound, gap, nodes }) => {
                assert!((lower_bound + 1.3).abs() < 1e-9);
                let inc = incumbent.expect("rounding finds an incumbent");
                assert!(lower_bound <= inc.objective());
                assert!((inc.objective() + 1.0).abs() < 1e-9);
                assert!((gap - 0.3).abs() < 1e-9);
                assert!(nodes >= 1);
            }
            other => panic!("expected LimitReached, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_integer_problem() {
        // 0.4 <= b <= 0.6 with b binary.
        let mut p = MilpProblem::new("inf");
        let b = p.add_binary("b", 0.0);
        p.add_row("lo", [(b, 1.0)], Sense::Ge, 0.4);
        p.add_row("hi", [(b, 1.0)], Sense::Le, 0.6);
        assert!(matches!(solve_milp(&p, &MilpConfig::default()), Err(SolveError::Infeasible)));
    }

    #[test]
    fn switch_hints_close_complementary_root() {
        // Buy/sell with a positive spread: the relaxation never buys and sells
        // together, so the root closes without branching.
        let mut p = MilpProblem::new("switch");
        let buy = p.add_column("buy", 0.0, 10.0, 0.2);
        let sell = p.add_column("sell", 0.0, 10.0, -0.1);
        let db = p.add_binary("db", 0.0);
        let ds = p.add_binary("ds", 0.0);
        p.add_row("bal", [(buy, 1.0), (sell, -1.0)], Sense::Eq, 3.0);
        p.add_row("excl", [(db, 1.0), (ds, 1.0)], Sense::Le, 1.0);
        p.add_row("imp", [(buy, 1.0), (db, -10.0)], Sense::Le, 0.0);
        p.add_row("exp", [(sell, 1.0), (ds, -10.0)], Sense::Le, 0.0);
        p.set_hint(db, RoundingHint::Switch { flow: buy });
        p.set_hint(ds, RoundingHint::Switch { flow: sell });
        p.add_exclusive_pair(db, ds);
        let s = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert_eq!(s.nodes, 1);
        assert!(s.fast_path);
        assert!((s.objective() - 0.6).abs() < 1e-9);
        assert_eq!(s.values()[db], 1.0);
        assert_eq!(s.values()[ds], 0.0);
    }
}
