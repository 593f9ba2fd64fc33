//! Branch-and-cut driven by the improving-direction oracle.
//!
//! Each node is bounded by its LP relaxation plus a cut loop. At the LP
//! optimum the oracle either certifies the point (it becomes a candidate
//! incumbent), returns an improving direction (cuts are separated and the LP
//! re-solved), or gives up (the node is branched).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cuts::{bfs_from_direction, bfs_from_solution, intersection_cut, Cut, CutError, CutFamily};
use crate::instance::{format_f64, MiblpInstance, Point};
use crate::milp::INT_TOL;
use crate::oracle::{limits_with_deadline, OracleConfig, OracleContext, OracleOutcome};
use crate::simplex::{extract_cone, solve_lp, LpProblem, LpSolution, LpStatus, TightConstraint};

pub const REL_GAP_TOL: f64 = 1e-6;
pub const ABS_GAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    ImprovingDirection,
    Legacy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchStrategy {
    Fractional,
    LinkingPriority,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutFamilies {
    pub idic: bool,
    pub isic: bool,
}

impl Default for CutFamilies {
    fn default() -> Self {
        Self { idic: true, isic: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub oracle_mode: OracleMode,
    pub oracle: OracleConfig,
    pub cuts: CutFamilies,
    pub branching: BranchStrategy,
    pub max_cut_rounds: usize,
    /// Minimum bound improvement per round before a round counts as stalled.
    pub tailing_off: f64,
    pub tailing_off_rounds: usize,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Recorded for reproducibility; the search itself is deterministic.
    pub seed: u64,
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            oracle_mode: OracleMode::ImprovingDirection,
            oracle: OracleConfig::default(),
            cuts: CutFamilies::default(),
            branching: BranchStrategy::Fractional,
            max_cut_rounds: 20,
            tailing_off: 1e-6,
            tailing_off_rounds: 3,
            time_limit: None,
            node_limit: None,
            seed: 0,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitReached,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::LimitReached => "LimitReached",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: usize,
    pub max_depth: usize,
    pub cut_rounds: usize,
    pub idic_cuts: usize,
    pub isic_cuts: usize,
    pub global_cuts: usize,
    pub local_cuts: usize,
    pub oracle_calls: usize,
    pub milp_solves: usize,
    pub k_milp_solves: usize,
    pub local_searches: usize,
    pub escalations: usize,
    pub legacy_checks: usize,
    pub ifd_time: Duration,
    pub unresolved_nodes: usize,
}

impl SolveStats {
    pub fn avg_ifd_time(&self) -> Duration {
        if self.oracle_calls == 0 {
            Duration::ZERO
        } else {
            self.ifd_time / self.oracle_calls as u32
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<Point>,
    /// Best bilevel feasible value `U` (`+inf` without incumbent).
    pub objective: f64,
    /// Best dual bound.
    pub bound: f64,
    pub gap: f64,
    pub stats: SolveStats,
    pub elapsed: Duration,
    /// Every certified cut generated during the solve.
    pub cuts: Vec<CutRecord>,
    /// Incumbent values in the order they were found.
    pub incumbent_history: Vec<f64>,
    pub trace: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("instance violates a standing assumption: {0}")]
    Assumptions(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A generated cut with the region in which it is valid.
#[derive(Clone, Debug, PartialEq)]
pub struct CutRecord {
    pub cut: Cut,
    /// Valid on all of F; otherwise only on F within the node box.
    pub global: bool,
    pub node: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CutRecord {
    /// Whether the cut must hold at `full` (a point of F).
    pub fn applies_to(&self, full: &[f64]) -> bool {
        self.global
            || full
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - 1e-9 && *v <= u + 1e-9)
    }
}

/// A subproblem of the search tree.
#[derive(Clone, Debug)]
pub struct Node {
    pub id: usize,
    pub depth: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub parent_bound: f64,
    /// Cuts valid only in this subtree.
    pub local_cuts: Vec<Arc<Cut>>,
}

/// Branching decision `x_j <= down | x_j >= up`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub var: usize,
    pub down: f64,
    pub up: f64,
}

/// How bounding ended for a node.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeAction {
    Infeasible,
    Cutoff,
    /// The LP optimum was certified bilevel feasible.
    Fathomed,
    /// A free set contains the whole cone: no bilevel feasible point remains.
    FreeSetPrune,
    Branch(Vec<f64>),
    /// Nothing could be certified and no branching candidate exists.
    Unresolved,
}

#[derive(Clone, Debug)]
pub struct NodeOutcome {
    pub bound: f64,
    pub candidate: Option<Point>,
    pub cuts_added: usize,
    pub action: NodeAction,
}

/// Splits an integer variable. Fractional values go to floor/ceil; an
/// integral value `v` splits `<= v | >= v+1`, or `<= v-1 | >= v` at the
/// upper bound.
fn split(var: usize, v: f64, lower: f64, upper: f64) -> Branch {
    let r = v.round();
    if (v - r).abs() > INT_TOL {
        Branch { var, down: v.floor(), up: v.ceil() }
    } else if r >= upper {
        Branch { var, down: r - 1.0, up: r }
    } else {
        let r = r.max(lower);
        Branch { var, down: r, up: r + 1.0 }
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.floor() - 0.5).abs()
}

/// Picks the branching variable at `point` within the node's bounds.
pub fn choose_branch_variable(inst: &MiblpInstance, point: &[f64], node: &Node, strategy: BranchStrategy) -> Option<Branch> {
    let open = |j: usize| node.upper[j] - node.lower[j] >= 1.0 - INT_TOL;
    let pick = |cands: &mut dyn Iterator<Item = usize>| {
        let mut best: Option<(usize, f64)> = None;
        for j in cands {
            let f = fractionality(point[j]);
            if best.is_none_or(|(_, b)| f < b - 1e-12) {
                best = Some((j, f));
            }
        }
        best.map(|(j, _)| split(j, point[j], node.lower[j], node.upper[j]))
    };
    if strategy == BranchStrategy::LinkingPriority {
        if let Some(b) = pick(&mut inst.linking_vars().into_iter().filter(|&j| open(j))) {
            return Some(b);
        }
    }
    let ints = inst.integer_vars();
    let fractional = |j: &usize| {
        let f = point[*j] - point[*j].floor();
        f > INT_TOL && f < 1.0 - INT_TOL
    };
    if let Some(b) = pick(&mut ints.iter().copied().filter(fractional)) {
        return Some(b);
    }
    ints.into_iter()
        .find(|&j| open(j))
        .map(|j| split(j, point[j], node.lower[j], node.upper[j]))
}

#[derive(PartialEq)]
struct Queued {
    bound: f64,
    node: Node,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: smallest bound first, then lowest id
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.node.id.cmp(&self.node.id))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

fn gap_tolerance(u: f64) -> f64 {
    ABS_GAP_TOL.max(REL_GAP_TOL * u.abs())
}

/// Relative gap between incumbent `u` and bound `l`.
pub fn relative_gap(u: f64, l: f64) -> f64 {
    if !u.is_finite() {
        return f64::INFINITY;
    }
    if l >= u - gap_tolerance(u) {
        return 0.0;
    }
    (u - l) / u.abs().max(1.0)
}

/// Tree search state for one solve.
pub struct Solver<'a> {
    inst: &'a MiblpInstance,
    cfg: SolverConfig,
    oracle: OracleContext<'a>,
    root: LpProblem,
    root_rows: usize,
    global_cuts: Vec<Arc<Cut>>,
    all_cuts: Vec<CutRecord>,
    incumbent: Option<Point>,
    upper: f64,
    history: Vec<f64>,
    stats: SolveStats,
    deadline: Option<Instant>,
    trace: Vec<String>,
}

impl<'a> Solver<'a> {
    pub fn new(inst: &'a MiblpInstance, cfg: SolverConfig) -> Self {
        let mut root = inst.lp_relaxation();
        root.objective = inst.leader_objective();
        let root_rows = root.rows.len();
        Self {
            inst,
            oracle: OracleContext::new(inst),
            root,
            root_rows,
            global_cuts: Vec::new(),
            all_cuts: Vec::new(),
            incumbent: None,
            upper: f64::INFINITY,
            history: Vec::new(),
            stats: SolveStats::default(),
            deadline: cfg.time_limit.map(|t| Instant::now() + t),
            trace: Vec::new(),
            cfg,
        }
    }

    pub fn root_node(&self) -> Node {
        Node {
            id: 0,
            depth: 0,
            lower: self.root.lower.clone(),
            upper: self.root.upper.clone(),
            parent_bound: f64::NEG_INFINITY,
            local_cuts: Vec::new(),
        }
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn node_lp(&self, node: &Node) -> LpProblem {
        let mut lp = self.root.clone();
        lp.lower.clone_from(&node.lower);
        lp.upper.clone_from(&node.upper);
        for c in self.global_cuts.iter().chain(&node.local_cuts) {
            lp.push_row(c.coefficients(), c.beta);
        }
        lp
    }

    /// Whether the cone at `sol` only uses globally valid constraints.
    fn cone_is_global(&self, node: &Node, tight: &[TightConstraint]) -> bool {
        let global_rows = self.root_rows + self.global_cuts.len();
        tight.iter().all(|t| match *t {
            TightConstraint::Row(i) => i < global_rows,
            TightConstraint::Lower(j) => node.lower[j] <= self.root.lower[j],
            TightConstraint::Upper(j) => node.upper[j] >= self.root.upper[j],
        })
    }

    fn pruned_by_bound(&self, bound: f64) -> bool {
        self.upper.is_finite() && bound >= self.upper - gap_tolerance(self.upper)
    }

    fn call_oracle(&mut self, p: &Point, depth: usize) -> Result<OracleOutcome, ()> {
        let mut cfg = self.cfg.oracle;
        cfg.milp_limits = limits_with_deadline(cfg.milp_limits, self.deadline);
        let start = Instant::now();
        let res = self.oracle.find_improving_direction(p, depth, &cfg);
        self.stats.ifd_time += start.elapsed();
        self.stats.oracle_calls += 1;
        match res {
            Ok((outcome, s)) => {
                self.stats.milp_solves += s.milp_solves;
                self.stats.k_milp_solves += s.k_milp_solves;
                self.stats.local_searches += s.local_searches;
                self.stats.escalations += s.escalations;
                Ok(outcome)
            }
            Err(_) => Err(()),
        }
    }

    fn snap(&self, full: &[f64]) -> Point {
        let mut v = full.to_vec();
        for j in self.inst.integer_vars() {
            v[j] = v[j].round();
        }
        Point::from_full(&v, self.inst.n1)
    }

    fn accept_candidate(&mut self, p: Point) {
        let value = self.inst.leader_value(&p);
        if value < self.upper {
            self.upper = value;
            self.incumbent = Some(p);
            self.history.push(value);
        }
    }

    /// Separates cuts from `w` at the current LP solution. Returns the number
    /// of cuts added, or `None` when a free set swallows the whole cone.
    fn separate(&mut self, node: &mut Node, lp: &LpProblem, sol: &LpSolution, dir: &crate::oracle::Direction) -> Option<usize> {
        let Ok(cone) = extract_cone(lp, sol) else { return Some(0) };
        let global = self.cone_is_global(node, &cone.tight);
        let mut sets = Vec::new();
        if self.cfg.cuts.idic {
            sets.push(bfs_from_direction(self.inst, dir));
        }
        let p = Point::from_full(&sol.x, self.inst.n1);
        let y_integral = p.y[..self.inst.r2].iter().all(|v| (v - v.round()).abs() <= INT_TOL);
        if self.cfg.cuts.isic && y_integral {
            let mut y_star: Vec<f64> = p.y.iter().zip(&dir.w).map(|(a, b)| a + b).collect();
            for v in y_star.iter_mut().take(self.inst.r2) {
                *v = v.round();
            }
            sets.push(bfs_from_solution(self.inst, &y_star));
        }
        let mut added = 0;
        for set in sets {
            match intersection_cut(&cone, &set, self.inst.n1) {
                Ok(cut) => {
                    match cut.family {
                        CutFamily::Idic => self.stats.idic_cuts += 1,
                        CutFamily::Isic => self.stats.isic_cuts += 1,
                    }
                    self.all_cuts.push(CutRecord {
                        cut: cut.clone(),
                        global,
                        node: node.id,
                        lower: node.lower.clone(),
                        upper: node.upper.clone(),
                    });
                    if global {
                        self.stats.global_cuts += 1;
                        self.global_cuts.push(Arc::new(cut));
                    } else {
                        self.stats.local_cuts += 1;
                        node.local_cuts.push(Arc::new(cut));
                    }
                    added += 1;
                }
                Err(CutError::FreeSetContainsCone) => return None,
                Err(_) => {}
            }
        }
        Some(added)
    }

    /// Bounds a node: LP solve plus the cut loop.
    pub fn bound_node(&mut self, node: &mut Node) -> NodeOutcome {
        let mut rounds = 0;
        let mut stalled = 0;
        let mut cuts_added = 0;
        let mut last = f64::NEG_INFINITY;
        loop {
            let lp = self.node_lp(node);
            let sol = solve_lp(&lp);
            let outcome = move |bound, action| NodeOutcome { bound, candidate: None, cuts_added, action };
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return outcome(f64::INFINITY, NodeAction::Infeasible),
                _ => return outcome(node.parent_bound, NodeAction::Unresolved),
            }
            let bound = sol.objective;
            if self.pruned_by_bound(bound) {
                return outcome(bound, NodeAction::Cutoff);
            }
            let point = Point::from_full(&sol.x, self.inst.n1);
            let in_s = self.oracle.in_s(&point);
            if self.cfg.oracle_mode == OracleMode::Legacy && in_s {
                self.stats.legacy_checks += 1;
                match self.oracle.legacy_feasibility_check(&point) {
                    Ok(true) => {
                        let cand = self.snap(&sol.x);
                        return NodeOutcome {
                            bound,
                            candidate: Some(cand),
                            cuts_added,
                            action: NodeAction::Fathomed,
                        };
                    }
                    Ok(false) => {}
                    Err(_) => return outcome(bound, NodeAction::Branch(sol.x.clone())),
                }
            }
            if self.timed_out() {
                return outcome(bound, NodeAction::Branch(sol.x.clone()));
            }
            let res = self.call_oracle(&point, node.depth);
            let dir = match res {
                Ok(OracleOutcome::Found(d)) => d,
                Ok(OracleOutcome::NoImprovingDirection) if in_s => {
                    if self.cfg.oracle_mode == OracleMode::Legacy {
                        // φ said infeasible but no direction exists: numerical disagreement
                        return outcome(bound, NodeAction::Branch(sol.x.clone()));
                    }
                    let cand = self.snap(&sol.x);
                    return NodeOutcome {
                        bound,
                        candidate: Some(cand),
                        cuts_added,
                        action: NodeAction::Fathomed,
                    };
                }
                _ => return outcome(bound, NodeAction::Branch(sol.x.clone())),
            };
            if rounds >= self.cfg.max_cut_rounds || (!self.cfg.cuts.idic && !self.cfg.cuts.isic) {
                return outcome(bound, NodeAction::Branch(sol.x.clone()));
            }
            match self.separate(node, &lp, &sol, &dir) {
                None => return outcome(bound, NodeAction::FreeSetPrune),
                Some(0) => return outcome(bound, NodeAction::Branch(sol.x.clone())),
                Some(k) => cuts_added += k,
            }
            rounds += 1;
            self.stats.cut_rounds += 1;
            if bound - last < self.cfg.tailing_off {
                stalled += 1;
            } else {
                stalled = 0;
            }
            last = bound;
            if stalled >= self.cfg.tailing_off_rounds {
                // one more solve to report the bound with the latest cuts
                let outcome = move |bound, action| NodeOutcome { bound, candidate: None, cuts_added, action };
                let lp = self.node_lp(node);
                let sol = solve_lp(&lp);
                return match sol.status {
                    LpStatus::Infeasible => outcome(f64::INFINITY, NodeAction::Infeasible),
                    LpStatus::Optimal if self.pruned_by_bound(sol.objective) => outcome(sol.objective, NodeAction::Cutoff),
                    LpStatus::Optimal => outcome(sol.objective, NodeAction::Branch(sol.x)),
                    _ => outcome(bound, NodeAction::Branch(sol.x.clone())),
                };
            }
        }
    }

    fn log(&mut self, node: &Node, bound: f64, action: &str) {
        if self.cfg.trace {
            self.trace.push(format!(
                "node={} depth={} bound={} action={}",
                node.id,
                node.depth,
                format_f64(bound),
                action
            ));
        }
    }

    pub fn run(mut self) -> SolveResult {
        let start = Instant::now();
        let mut queue = BinaryHeap::new();
        let mut next_id = 1;
        let mut unresolved_bound = f64::INFINITY;
        let mut limit_hit = false;
        queue.push(Queued {
            bound: f64::NEG_INFINITY,
            node: self.root_node(),
        });
        while let Some(Queued { bound: parent, mut node }) = queue.pop() {
            if self.pruned_by_bound(parent) {
                self.log(&node, parent, "cutoff");
                continue;
            }
            if self.timed_out() || self.cfg.node_limit.is_some_and(|n| self.stats.nodes >= n) {
                queue.push(Queued { bound: parent, node });
                limit_hit = true;
                break;
            }
            self.stats.nodes += 1;
            self.stats.max_depth = self.stats.max_depth.max(node.depth);
            let out = self.bound_node(&mut node);
            match out.action {
                NodeAction::Infeasible => self.log(&node, out.bound, "infeasible"),
                NodeAction::Cutoff => self.log(&node, out.bound, "cutoff"),
                NodeAction::FreeSetPrune => self.log(&node, out.bound, "prune"),
                NodeAction::Fathomed => {
                    if let Some(c) = out.candidate {
                        self.accept_candidate(c);
                    }
                    self.log(&node, out.bound, "incumbent");
                }
                NodeAction::Unresolved => {
                    self.stats.unresolved_nodes += 1;
                    unresolved_bound = unresolved_bound.min(out.bound);
                    self.log(&node, out.bound, "unresolved");
                }
                NodeAction::Branch(x) => {
                    let Some(b) = choose_branch_variable(self.inst, &x, &node, self.cfg.branching) else {
                        let p = Point::from_full(&x, self.inst.n1);
                        if self.inst.is_pure_integer() && self.oracle.in_s(&p) {
                            // a single bilevel infeasible point remains
                            self.log(&node, out.bound, "prune");
                        } else {
                            self.stats.unresolved_nodes += 1;
                            unresolved_bound = unresolved_bound.min(out.bound);
                            self.log(&node, out.bound, "unresolved");
                        }
                        continue;
                    };
                    self.log(&node, out.bound, &format!("branch var={} down={} up={}", b.var, b.down, b.up));
                    let mut down = node.clone();
                    down.upper[b.var] = b.down;
                    let mut up = node;
                    up.lower[b.var] = b.up;
                    for mut child in [down, up] {
                        child.id = next_id;
                        next_id += 1;
                        child.depth += 1;
                        child.parent_bound = out.bound;
                        if child.lower[b.var] <= child.upper[b.var] {
                            queue.push(Queued { bound: out.bound, node: child });
                        }
                    }
                }
            }
        }
        let open_bound = queue.iter().map(|q| q.bound).fold(f64::INFINITY, f64::min);
        let bound = open_bound.min(unresolved_bound).min(self.upper);
        let status = if limit_hit || self.stats.unresolved_nodes > 0 {
            SolveStatus::LimitReached
        } else if self.incumbent.is_some() {
            SolveStatus::Optimal
        } else {
            SolveStatus::Infeasible
        };
        let gap = match status {
            SolveStatus::Optimal => 0.0,
            SolveStatus::Infeasible => 0.0,
            SolveStatus::LimitReached => relative_gap(self.upper, bound),
        };
        SolveResult {
            status,
            objective: self.upper,
            bound,
            gap,
            incumbent: self.incumbent,
            stats: self.stats,
            elapsed: start.elapsed(),
            cuts: self.all_cuts,
            incumbent_history: self.history,
            trace: self.trace,
        }
    }
}

/// Solves the instance under `cfg`.
pub fn solve(inst: &MiblpInstance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    if let Some(ub) = cfg.oracle.depth_ub {
        if ub < cfg.oracle.depth_lb {
            return Err(SolveError::InvalidConfig("local-search depth window is empty".into()));
        }
    }
    let report = inst.validate_assumptions();
    if !report.bounded {
        return Err(SolveError::Assumptions("LP relaxation is unbounded".into()));
    }
    if !report.linking_integer {
        return Err(SolveError::Assumptions("linking variables must be integer".into()));
    }
    Ok(Solver::new(inst, cfg.clone()).run())
}
