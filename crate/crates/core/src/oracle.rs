//! Improving-direction oracle.
//!
//! An improving feasible direction (IFD) at `(x̂, ŷ)` is a follower move `w`
//! (integer on the integer follower coordinates) with `d²w <= -1` such that
//! `ŷ + w` stays feasible for the follower at `x̂`. At a point satisfying
//! integrality an IFD exists iff the point is bilevel infeasible, so one
//! oracle call both certifies feasibility and yields a direction for cuts.

use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::instance::{MiblpInstance, NumericData, Point};
use crate::milp::{solve_milp, MilpLimits, MilpMode, MilpProblem, MilpStatus, INT_TOL};
use crate::simplex::LpProblem;

const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionMethod {
    /// Optimize over the full (ID) set.
    ExactMilp,
    /// Optimize over (ID) restricted to `‖w‖₁ <= k`.
    ExactMilpK,
    /// Enumerate the k-neighborhood.
    LocalSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// `min ‖w‖₁`
    Norm1,
    /// `min Σ max(g²ᵢw, 0) + ‖w‖₁`
    IdicFriendly,
    /// `min d²w`
    Steepest,
}

impl ObjectiveKind {
    /// Scores an integer-coordinate direction.
    pub fn score(self, w: &[f64], g2: &[Vec<f64>], d2: &[f64]) -> f64 {
        let norm: f64 = w.iter().map(|v| v.abs()).sum();
        match self {
            ObjectiveKind::Norm1 => norm,
            ObjectiveKind::IdicFriendly => {
                norm + g2
                    .iter()
                    .map(|g| g.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().max(0.0))
                    .sum::<f64>()
            }
            ObjectiveKind::Steepest => d2.iter().zip(w).map(|(a, b)| a * b).sum(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub method: DirectionMethod,
    pub k: usize,
    /// Node depths `[lb, ub]` in which the local search is used.
    pub depth_lb: usize,
    /// `None` means unbounded.
    pub depth_ub: Option<usize>,
    pub objective: ObjectiveKind,
    pub milp_limits: MilpLimits,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            method: DirectionMethod::ExactMilp,
            k: 2,
            depth_lb: 0,
            depth_ub: None,
            objective: ObjectiveKind::Norm1,
            milp_limits: MilpLimits::default(),
        }
    }
}

impl OracleConfig {
    pub fn depth_in_window(&self, depth: usize) -> bool {
        depth >= self.depth_lb && self.depth_ub.is_none_or(|ub| depth <= ub)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub w: Vec<f64>,
    pub norm1: f64,
    /// `d²w`
    pub improvement: f64,
}

impl Direction {
    fn new(w: Vec<f64>, d2: &[f64]) -> Self {
        let norm1 = w.iter().map(|v| v.abs()).sum();
        let improvement = d2.iter().zip(&w).map(|(a, b)| a * b).sum();
        Self { w, norm1, improvement }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleOutcome {
    /// Exact certificate that no IFD exists.
    NoImprovingDirection,
    Found(Direction),
    /// The heuristic found nothing; not a certificate.
    HeuristicExhausted,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("subsolver inconclusive: {0}")]
    Inconclusive(String),
    #[error("point not in S (fractional or outside the relaxation)")]
    NotInS,
}

/// Counters for one oracle invocation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleStats {
    pub milp_solves: usize,
    pub k_milp_solves: usize,
    pub local_searches: usize,
    pub escalations: usize,
}

impl OracleStats {
    pub fn add(&mut self, o: &OracleStats) {
        self.milp_solves += o.milp_solves;
        self.k_milp_solves += o.k_milp_solves;
        self.local_searches += o.local_searches;
        self.escalations += o.escalations;
    }
}

/// Instance data prepared for repeated oracle calls.
#[derive(Clone, Debug)]
pub struct OracleContext<'a> {
    pub inst: &'a MiblpInstance,
    pub num: NumericData,
    lp: LpProblem,
}

impl<'a> OracleContext<'a> {
    pub fn new(inst: &'a MiblpInstance) -> Self {
        Self {
            inst,
            num: inst.numeric(),
            lp: inst.lp_relaxation(),
        }
    }

    /// Whether the point satisfies integrality and lies in `P`.
    pub fn in_s(&self, p: &Point) -> bool {
        let full = p.full();
        let integral = (0..full.len())
            .filter(|&j| self.inst.is_integer_var(j))
            .all(|j| (full[j] - full[j].round()).abs() <= INT_TOL);
        integral && self.in_relaxation(&full)
    }

    pub fn in_relaxation(&self, full: &[f64]) -> bool {
        let scale = 1.0 + full.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let tol = 1e-7 * scale;
        full.iter()
            .zip(self.lp.lower.iter().zip(&self.lp.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
            && self.lp.rows.iter().zip(&self.lp.rhs).all(|(row, rhs)| {
                row.iter().zip(full).map(|(a, b)| a * b).sum::<f64>() >= rhs - tol
            })
    }

    /// Rounds integer coordinates of a point satisfying integrality.
    fn snap(&self, p: &Point) -> Point {
        let mut q = p.clone();
        for v in q.x.iter_mut().take(self.inst.r1) {
            *v = v.round();
        }
        for v in q.y.iter_mut().take(self.inst.r2) {
            *v = v.round();
        }
        q
    }

    /// `b² - A²x̂ - G²ŷ`
    fn residual(&self, p: &Point) -> Vec<f64> {
        self.num
            .b2
            .iter()
            .zip(self.num.a2.iter().zip(&self.num.g2))
            .map(|(b, (a, g))| {
                b - a.iter().zip(&p.x).map(|(u, v)| u * v).sum::<f64>()
                    - g.iter().zip(&p.y).map(|(u, v)| u * v).sum::<f64>()
            })
            .collect()
    }

    /// Box for `w`: `l_y - ŷ <= w <= u_y - ŷ`, rounded inward on integer
    /// coordinates.
    fn direction_box(&self, p: &Point) -> (Vec<f64>, Vec<f64>) {
        let n1 = self.inst.n1;
        let (yl, yu) = (self.num.y_lower(n1), self.num.y_upper(n1));
        let mut lo = Vec::with_capacity(self.inst.n2);
        let mut hi = Vec::with_capacity(self.inst.n2);
        for j in 0..self.inst.n2 {
            let (mut l, mut h) = (yl[j] - p.y[j], yu[j] - p.y[j]);
            if j < self.inst.r2 {
                l = (l - 1e-9).ceil();
                h = (h + 1e-9).floor();
            }
            lo.push(l);
            hi.push(h);
        }
        (lo, hi)
    }

    /// Builds (ID), or (k-ID) when `k` is given.
    pub fn build_direction_milp(&self, p: &Point, kind: ObjectiveKind, k: Option<usize>) -> MilpProblem {
        let n2 = self.inst.n2;
        let m2 = self.inst.m2();
        let split = kind != ObjectiveKind::Steepest || k.is_some();
        let slack = kind == ObjectiveKind::IdicFriendly;
        let nv = n2 + if split { 2 * n2 } else { 0 } + if slack { m2 } else { 0 };
        let (wp, wm, sv) = (n2, 2 * n2, if split { 3 * n2 } else { n2 });
        let (lo, hi) = self.direction_box(p);
        let mut lower = vec![0.0; nv];
        let mut upper = vec![0.0; nv];
        lower[..n2].copy_from_slice(&lo);
        upper[..n2].copy_from_slice(&hi);
        if split {
            for j in 0..n2 {
                upper[wp + j] = hi[j].max(0.0);
                upper[wm + j] = (-lo[j]).max(0.0);
            }
        }
        let mut lp = LpProblem {
            objective: vec![0.0; nv],
            rows: Vec::new(),
            rhs: Vec::new(),
            lower,
            upper,
        };
        let row = |entries: &[(usize, f64)]| {
            let mut r = vec![0.0; nv];
            for &(j, v) in entries {
                r[j] += v;
            }
            r
        };
        // d²w <= -1
        lp.push_row(
            row(&(0..n2).map(|j| (j, -self.num.d2[j])).collect::<Vec<_>>()),
            1.0,
        );
        // G²w >= b² - A²x̂ - G²ŷ
        for (g, r) in self.num.g2.iter().zip(self.residual(p)) {
            lp.push_row(row(&(0..n2).map(|j| (j, g[j])).collect::<Vec<_>>()), r);
        }
        if split {
            for j in 0..n2 {
                lp.push_row(row(&[(j, 1.0), (wp + j, -1.0), (wm + j, 1.0)]), 0.0);
                lp.push_row(row(&[(j, -1.0), (wp + j, 1.0), (wm + j, -1.0)]), 0.0);
            }
        }
        if let Some(k) = k {
            let entries: Vec<(usize, f64)> = (wp..wp + 2 * n2).map(|j| (j, -1.0)).collect();
            lp.push_row(row(&entries), -(k as f64));
        }
        if slack {
            let wmax: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l.abs().max(h.abs())).collect();
            for (i, g) in self.num.g2.iter().enumerate() {
                let mut entries = vec![(sv + i, 1.0)];
                entries.extend((0..n2).map(|j| (j, -g[j])));
                lp.push_row(row(&entries), 0.0);
                lp.upper[sv + i] = g.iter().zip(&wmax).map(|(a, b)| a.abs() * b).sum::<f64>();
            }
        }
        match kind {
            ObjectiveKind::Norm1 => {
                for j in wp..wp + 2 * n2 {
                    lp.objective[j] = 1.0;
                }
            }
            ObjectiveKind::IdicFriendly => {
                for j in wp..wp + 2 * n2 {
                    lp.objective[j] = 1.0;
                }
                for i in 0..m2 {
                    lp.objective[sv + i] = 1.0;
                }
            }
            ObjectiveKind::Steepest => lp.objective[..n2].copy_from_slice(&self.num.d2),
        }
        MilpProblem {
            lp,
            integer: (0..self.inst.r2).collect(),
            cutoff: None,
            mode: MilpMode::Optimize,
        }
    }

    fn solve_direction_milp(
        &self,
        mut milp: MilpProblem,
        mode: MilpMode,
        limits: MilpLimits,
    ) -> Result<Option<Direction>, OracleError> {
        milp.mode = mode;
        let sol = solve_milp(&milp, limits);
        match sol.status {
            MilpStatus::Infeasible => Ok(None),
            MilpStatus::Optimal | MilpStatus::FeasibleFound => {
                let mut w = sol.incumbent.expect("incumbent present")[..self.inst.n2].to_vec();
                for v in w.iter_mut().take(self.inst.r2) {
                    *v = v.round();
                }
                Ok(Some(Direction::new(w, &self.num.d2)))
            }
            MilpStatus::LimitReached => match sol.incumbent {
                Some(x) => {
                    let mut w = x[..self.inst.n2].to_vec();
                    for v in w.iter_mut().take(self.inst.r2) {
                        *v = v.round();
                    }
                    Ok(Some(Direction::new(w, &self.num.d2)))
                }
                None => Err(OracleError::Inconclusive("direction MILP hit its limits".into())),
            },
        }
    }

    /// Exact search over (ID) (or (k-ID)).
    pub fn exact_direction(
        &self,
        p: &Point,
        kind: ObjectiveKind,
        k: Option<usize>,
        limits: MilpLimits,
    ) -> Result<Option<Direction>, OracleError> {
        let milp = self.build_direction_milp(p, kind, k);
        self.solve_direction_milp(milp, MilpMode::Optimize, limits)
    }

    /// Whether (ID)/(k-ID) is feasible; stops at the first feasible point.
    pub fn direction_exists(&self, p: &Point, k: Option<usize>, limits: MilpLimits) -> Result<bool, OracleError> {
        let milp = self.build_direction_milp(p, ObjectiveKind::Steepest, k);
        Ok(self
            .solve_direction_milp(milp, MilpMode::FirstFeasible, limits)?
            .is_some())
    }

    /// Enumerates integer directions with `‖w‖₁ <= k`, shell by shell, and
    /// returns the best IFD under `score`.
    pub fn local_search_with<F>(&self, k: usize, p: &Point, stop_at_first: bool, score: F) -> OracleOutcome
    where
        F: Fn(&[f64]) -> f64,
    {
        let r2 = self.inst.r2;
        let n2 = self.inst.n2;
        let (lo, hi) = self.direction_box(p);
        let lo: Vec<i64> = lo[..r2].iter().map(|v| *v as i64).collect();
        let hi: Vec<i64> = hi[..r2].iter().map(|v| *v as i64).collect();
        let resid = self.residual(p);
        let scale = 1.0 + resid.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut w = vec![0i64; r2];
        let mut wf = vec![0.0; n2];
        for shell in 1..=k {
            let flow = enumerate_shell(&mut w, 0, shell as i64, &lo, &hi, &mut |w: &[i64]| {
                for (f, v) in wf.iter_mut().zip(w) {
                    *f = *v as f64;
                }
                let improvement: f64 = self.num.d2.iter().zip(&wf).map(|(a, b)| a * b).sum();
                if improvement > -1.0 + FEAS_TOL {
                    return ControlFlow::Continue(());
                }
                let feasible = self
                    .num
                    .g2
                    .iter()
                    .zip(&resid)
                    .all(|(g, r)| g.iter().zip(&wf).map(|(a, b)| a * b).sum::<f64>() >= r - FEAS_TOL * scale);
                if !feasible {
                    return ControlFlow::Continue(());
                }
                let s = score(&wf);
                if best.as_ref().is_none_or(|(b, _)| s < *b) {
                    best = Some((s, wf.clone()));
                }
                if stop_at_first {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            if flow.is_break() {
                break;
            }
        }
        match best {
            Some((_, w)) => OracleOutcome::Found(Direction::new(w, &self.num.d2)),
            None => OracleOutcome::HeuristicExhausted,
        }
    }

    /// Local search over the k-neighborhood with a named objective.
    pub fn local_search(&self, k: usize, p: &Point, kind: ObjectiveKind) -> OracleOutcome {
        let g2 = &self.num.g2;
        let d2 = &self.num.d2;
        self.local_search_with(k, p, kind == ObjectiveKind::Norm1, |w| kind.score(w, g2, d2))
    }

    /// Dispatches according to `cfg`. Heuristic misses at points in `S` are
    /// escalated to the exact (ID) so the outcome is a certificate.
    pub fn find_improving_direction(
        &self,
        point: &Point,
        depth: usize,
        cfg: &OracleConfig,
    ) -> Result<(OracleOutcome, OracleStats), OracleError> {
        let mut stats = OracleStats::default();
        let in_s = self.in_s(point);
        let p = if in_s { self.snap(point) } else { point.clone() };
        let heuristic = match cfg.method {
            DirectionMethod::ExactMilp => None,
            DirectionMethod::ExactMilpK => {
                stats.k_milp_solves += 1;
                Some(
                    match self.exact_direction(&p, cfg.objective, Some(cfg.k), cfg.milp_limits) {
                        Ok(Some(d)) => OracleOutcome::Found(d),
                        Ok(None) => OracleOutcome::HeuristicExhausted,
                        // a failed restricted solve is no certificate; fall through
                        Err(_) => OracleOutcome::HeuristicExhausted,
                    },
                )
            }
            DirectionMethod::LocalSearch if cfg.depth_in_window(depth) => {
                stats.local_searches += 1;
                Some(self.local_search(cfg.k, &p, cfg.objective))
            }
            DirectionMethod::LocalSearch => None,
        };
        match heuristic {
            Some(found @ OracleOutcome::Found(_)) => return Ok((found, stats)),
            Some(_) if !in_s => return Ok((OracleOutcome::HeuristicExhausted, stats)),
            Some(_) => stats.escalations += 1,
            None => {}
        }
        stats.milp_solves += 1;
        let outcome = match self.exact_direction(&p, cfg.objective, None, cfg.milp_limits)? {
            Some(d) => OracleOutcome::Found(d),
            None => OracleOutcome::NoImprovingDirection,
        };
        Ok((outcome, stats))
    }

    /// True iff (ID) is infeasible at a point of `S`.
    pub fn certify_bilevel_feasible(&self, point: &Point) -> Result<bool, OracleError> {
        if !self.in_s(point) {
            return Err(OracleError::NotInS);
        }
        let p = self.snap(point);
        Ok(!self.direction_exists(&p, None, MilpLimits::default())?)
    }

    /// Follower value function at leader decision `x`; `+inf` when the
    /// follower problem is infeasible.
    pub fn evaluate_phi(&self, x: &[f64]) -> Result<f64, OracleError> {
        let (n1, n2) = (self.inst.n1, self.inst.n2);
        let rhs: Vec<f64> = self
            .num
            .b2
            .iter()
            .zip(&self.num.a2)
            .map(|(b, a)| b - a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>())
            .collect();
        let milp = MilpProblem {
            lp: LpProblem {
                objective: self.num.d2.clone(),
                rows: self.num.g2.clone(),
                rhs,
                lower: self.num.y_lower(n1).to_vec(),
                upper: self.num.y_upper(n1).to_vec(),
            },
            integer: (0..self.inst.r2).collect(),
            cutoff: None,
            mode: MilpMode::Optimize,
        };
        debug_assert_eq!(milp.lp.num_vars(), n2);
        let sol = solve_milp(&milp, MilpLimits::default());
        match sol.status {
            MilpStatus::Optimal => Ok(sol.objective),
            MilpStatus::Infeasible => Ok(f64::INFINITY),
            _ => Err(OracleError::Inconclusive("follower problem hit its limits".into())),
        }
    }

    /// Baseline feasibility check `d²ŷ <= φ(b² - A²x̂)`.
    pub fn legacy_feasibility_check(&self, point: &Point) -> Result<bool, OracleError> {
        if !self.in_s(point) {
            return Err(OracleError::NotInS);
        }
        let p = self.snap(point);
        let phi = self.evaluate_phi(&p.x)?;
        let value: f64 = self.num.d2.iter().zip(&p.y).map(|(a, b)| a * b).sum();
        Ok(value <= phi + 1e-9 * (1.0 + phi.abs()))
    }
}

/// Visits integer vectors with `Σ|w_i| = budget` (over `w[pos..]`) inside
/// the box, in lexicographic order.
fn enumerate_shell<F>(w: &mut [i64], pos: usize, budget: i64, lo: &[i64], hi: &[i64], visit: &mut F) -> ControlFlow<()>
where
    F: FnMut(&[i64]) -> ControlFlow<()>,
{
    if pos == w.len() {
        return if budget == 0 { visit(w) } else { ControlFlow::Continue(()) };
    }
    if pos + 1 == w.len() {
        for v in [-budget, budget] {
            if v >= lo[pos] && v <= hi[pos] {
                w[pos] = v;
                visit(w)?;
            }
            if budget == 0 {
                break;
            }
        }
        w[pos] = 0;
        return ControlFlow::Continue(());
    }
    let from = (-budget).max(lo[pos]);
    let to = budget.min(hi[pos]);
    for v in from..=to {
        w[pos] = v;
        enumerate_shell(w, pos + 1, budget - v.abs(), lo, hi, visit)?;
    }
    w[pos] = 0;
    ControlFlow::Continue(())
}

pub fn build_id_milp(inst: &MiblpInstance, point: &Point, kind: ObjectiveKind) -> MilpProblem {
    OracleContext::new(inst).build_direction_milp(point, kind, None)
}

pub fn build_k_id_milp(inst: &MiblpInstance, point: &Point, k: usize, kind: ObjectiveKind) -> MilpProblem {
    OracleContext::new(inst).build_direction_milp(point, kind, Some(k))
}

pub fn local_search_neighbors(inst: &MiblpInstance, k: usize, point: &Point, kind: ObjectiveKind) -> OracleOutcome {
    OracleContext::new(inst).local_search(k, point, kind)
}

pub fn find_improving_direction(
    inst: &MiblpInstance,
    point: &Point,
    depth: usize,
    cfg: &OracleConfig,
) -> Result<OracleOutcome, OracleError> {
    OracleContext::new(inst)
        .find_improving_direction(point, depth, cfg)
        .map(|(o, _)| o)
}

pub fn certify_bilevel_feasible(inst: &MiblpInstance, point: &Point) -> Result<bool, OracleError> {
    OracleContext::new(inst).certify_bilevel_feasible(point)
}

pub fn evaluate_phi(inst: &MiblpInstance, x: &[f64]) -> Result<f64, OracleError> {
    OracleContext::new(inst).evaluate_phi(x)
}

pub fn legacy_feasibility_check(inst: &MiblpInstance, point: &Point) -> Result<bool, OracleError> {
    OracleContext::new(inst).legacy_feasibility_check(point)
}

/// Limits shared by oracle calls issued from a time-limited solve.
pub fn limits_with_deadline(base: MilpLimits, deadline: Option<Instant>) -> MilpLimits {
    match deadline {
        None => base,
        Some(d) => {
            let left = d.saturating_duration_since(Instant::now());
            MilpLimits {
                time_limit: Some(base.time_limit.map_or(left, |t| t.min(left)).max(Duration::from_millis(1))),
                ..base
            }
        }
    }
}
