//! LP-based branch-and-bound for the oracle subproblems.
//!
//! Nodes only differ in variable bounds. The search dives depth-first until
//! the first incumbent, then switches to best-first on the LP bound. Branching
//! picks the most fractional integer variable (ties by lowest index).

use std::time::{Duration, Instant};

use crate::simplex::{solve_lp, LpProblem, LpStatus};

pub const INT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpMode {
    Optimize,
    FirstFeasible,
}

#[derive(Clone, Debug)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub integer: Vec<usize>,
    /// Nodes whose bound is not below this value are pruned.
    pub cutoff: Option<f64>,
    pub mode: MilpMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MilpLimits {
    pub max_nodes: usize,
    pub time_limit: Option<Duration>,
}

impl Default for MilpLimits {
    fn default() -> Self {
        Self {
            max_nodes: 200_000,
            time_limit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    FeasibleFound,
    LimitReached,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: f64,
    pub nodes: usize,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        self.incumbent.is_some()
    }
}

struct BbNode {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bound: f64,
    seq: usize,
}

fn most_fractional(x: &[f64], integer: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in integer {
        let frac = x[j] - x[j].floor();
        let dist = (frac - 0.5).abs();
        if frac > INT_TOL && frac < 1.0 - INT_TOL && best.is_none_or(|(_, d)| dist < d - 1e-12) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

pub fn solve_milp(p: &MilpProblem, limits: MilpLimits) -> MilpSolution {
    let start = Instant::now();
    let mut open = vec![BbNode {
        lower: p.lp.lower.clone(),
        upper: p.lp.upper.clone(),
        bound: f64::NEG_INFINITY,
        seq: 0,
    }];
    let mut seq = 1;
    let mut incumbent: Option<Vec<f64>> = None;
    let mut best = f64::INFINITY;
    let mut nodes = 0;
    let mut inconclusive = false;
    let mut lp = p.lp.clone();
    let cutoff = |best: f64| -> f64 { p.cutoff.map_or(best, |c| c.min(best)) };
    let prune_tol = |v: f64| 1e-9 * (1.0 + v.abs());

    loop {
        let node = if incumbent.is_none() {
            open.pop()
        } else {
            let pick = open
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.bound.total_cmp(&b.bound).then(a.seq.cmp(&b.seq)))
                .map(|(i, _)| i);
            pick.map(|i| open.swap_remove(i))
        };
        let Some(node) = node else { break };
        let limit = cutoff(best);
        if node.bound >= limit - prune_tol(limit) {
            continue;
        }
        if nodes >= limits.max_nodes || limits.time_limit.is_some_and(|t| start.elapsed() > t) {
            open.push(node);
            return finish(MilpStatus::LimitReached, incumbent, best, nodes);
        }
        nodes += 1;
        lp.lower.clone_from(&node.lower);
        lp.upper.clone_from(&node.upper);
        let sol = solve_lp(&lp);
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded | LpStatus::NumericallyUnstable => {
                inconclusive = true;
                continue;
            }
        }
        if sol.objective >= limit - prune_tol(limit) {
            continue;
        }
        match most_fractional(&sol.x, &p.integer) {
            None => {
                let mut x = sol.x.clone();
                for &j in &p.integer {
                    x[j] = x[j].round();
                }
                best = p.lp.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
                incumbent = Some(x);
                if p.mode == MilpMode::FirstFeasible {
                    return finish(MilpStatus::FeasibleFound, incumbent, best, nodes);
                }
            }
            Some(j) => {
                let v = sol.x[j];
                let mut up = BbNode {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: sol.objective,
                    seq,
                };
                up.lower[j] = v.ceil();
                let mut down = BbNode {
                    lower: node.lower,
                    upper: node.upper,
                    bound: sol.objective,
                    seq: seq + 1,
                };
                down.upper[j] = v.floor();
                seq += 2;
                // the down branch is explored first while diving
                open.push(up);
                open.push(down);
            }
        }
    }
    let status = match (&incumbent, inconclusive) {
        (_, true) => MilpStatus::LimitReached,
        (Some(_), false) => MilpStatus::Optimal,
        (None, false) => MilpStatus::Infeasible,
    };
    finish(status, incumbent, best, nodes)
}

fn finish(status: MilpStatus, incumbent: Option<Vec<f64>>, best: f64, nodes: usize) -> MilpSolution {
    MilpSolution {
        status,
        incumbent,
        objective: best,
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Moore-Bard follower at x = 2: min y s.t. the four rows, y in {0..5}.
    fn moore_bard_follower(x: f64) -> MilpProblem {
        let rows = [(5.0, -4.0, -6.0), (-1.0, -2.0, -10.0), (-2.0, 1.0, -15.0), (2.0, 10.0, 15.0)];
        MilpProblem {
            lp: LpProblem {
                objective: vec![1.0],
                rows: rows.iter().map(|r| vec![r.1]).collect(),
                rhs: rows.iter().map(|r| r.2 - r.0 * x).collect(),
                lower: vec![0.0],
                upper: vec![5.0],
            },
            integer: vec![0],
            cutoff: None,
            mode: MilpMode::Optimize,
        }
    }

    #[test]
    fn moore_bard_follower_at_two() {
        // enumeration: y in {0..5} feasible at x=2 are {2,3,4}
        let feasible: Vec<i32> = (0..=5)
            .filter(|&y| {
                let (x, y) = (2.0, y as f64);
                -5.0 * x + 4.0 * y <= 6.0 && x + 2.0 * y <= 10.0 && 2.0 * x - y <= 15.0 && 2.0 * x + 10.0 * y >= 15.0
            })
            .collect();
        assert_eq!(feasible, vec![2, 3, 4]);
        let sol = solve_milp(&moore_bard_follower(2.0), MilpLimits::default());
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.incumbent.unwrap(), vec![2.0]);
    }

    #[test]
    fn integral_relaxation_solves_in_one_node() {
        let p = MilpProblem {
            lp: LpProblem {
                objective: vec![1.0, 1.0],
                rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                rhs: vec![1.0, 2.0],
                lower: vec![0.0, 0.0],
                upper: vec![4.0, 4.0],
            },
            integer: vec![0, 1],
            cutoff: None,
            mode: MilpMode::Optimize,
        };
        let sol = solve_milp(&p, MilpLimits::default());
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.nodes, 1);
        assert_eq!(sol.objective, 3.0);
    }

    #[test]
    fn integer_infeasible_detected() {
        // 2y = 1 has no integer solution
        let p = MilpProblem {
            lp: LpProblem {
                objective: vec![0.0],
                rows: vec![vec![2.0], vec![-2.0]],
                rhs: vec![1.0, -1.0],
                lower: vec![0.0],
                upper: vec![3.0],
            },
            integer: vec![0],
            cutoff: None,
            mode: MilpMode::Optimize,
        };
        assert_eq!(solve_milp(&p, MilpLimits::default()).status, MilpStatus::Infeasible);
    }

    #[test]
    fn first_feasible_returns_early_and_is_feasible() {
        let mut p = moore_bard_follower(2.0);
        p.lp.objective = vec![-1.0];
        p.mode = MilpMode::FirstFeasible;
        let sol = solve_milp(&p, MilpLimits::default());
        assert_eq!(sol.status, MilpStatus::FeasibleFound);
        let y = sol.incumbent.unwrap()[0];
        assert!([2.0, 3.0, 4.0].contains(&y));
    }

    #[test]
    fn cutoff_prunes_everything() {
        let mut p = moore_bard_follower(2.0);
        p.cutoff = Some(1.0);
        assert_eq!(solve_milp(&p, MilpLimits::default()).status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_reports_limit() {
        let mut p = moore_bard_follower(2.0);
        p.lp.rows.push(vec![3.0]);
        p.lp.rhs.push(7.0);
        let sol = solve_milp(&p, MilpLimits { max_nodes: 1, time_limit: None });
        assert_eq!(sol.status, MilpStatus::LimitReached);
    }
}
