//! Brute-force agreement checks on a single pure-integer instance.

use std::collections::HashSet;

use thiserror::Error;

use crate::bnc::{solve, CutFamilies, SolveStatus, SolverConfig};
use crate::cuts::bfs_from_direction;
use crate::instance::{to_f64, MiblpInstance};
use crate::kopt::{enumerate_Fk, min_ifd_norm, KoptContext, KoptError};
use crate::lattice::{int_point, point_to_ints};
use crate::milp::MilpLimits;
use crate::oracle::{DirectionMethod, ObjectiveKind, OracleConfig, OracleContext, OracleError, OracleOutcome};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Kopt(#[from] KoptError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, failures: Vec<String>, total: usize) {
        let passed = failures.is_empty();
        let detail = if passed {
            format!("{total} checked")
        } else {
            format!("{} of {total} failed, first: {}", failures.len(), failures[0])
        };
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }
}

/// Runs the oracle, hierarchy, local-search, solver and cut checks against
/// exhaustive enumeration.
pub fn verify_instance(inst: &MiblpInstance) -> Result<VerifyReport, VerifyError> {
    let ctx = KoptContext::new(inst)?;
    let table = ctx.table()?;
    let oracle = OracleContext::new(inst);
    let k_bar = ctx.k_bar();
    let s = table.brute.s_points();
    let f = table.brute.f_set();
    let fk: Vec<HashSet<(Vec<i64>, Vec<i64>)>> = (0..=k_bar)
        .map(|k| {
            Ok(enumerate_Fk(&ctx, k)?
                .iter()
                .filter_map(point_to_ints)
                .collect())
        })
        .collect::<Result<_, KoptError>>()?;
    let mut report = VerifyReport::default();

    let mut failures = Vec::new();
    for p in &s {
        let pt = int_point(&p.0, &p.1);
        let cert = oracle.certify_bilevel_feasible(&pt)?;
        let legacy = oracle.legacy_feasibility_check(&pt)?;
        if cert != legacy || legacy != f.contains(p) {
            failures.push(format!("{pt}: certify {cert}, legacy {legacy}, enumeration {}", f.contains(p)));
        }
    }
    report.push("bilevel feasibility oracles agree with enumeration", failures, s.len());

    let mut failures = Vec::new();
    let mut ks: Vec<u64> = vec![1, 2, 3, k_bar];
    ks.sort_unstable();
    ks.dedup();
    for p in &s {
        let pt = int_point(&p.0, &p.1);
        let norm = min_ifd_norm(&ctx, &pt)?;
        for &k in &ks {
            let kid = oracle.direction_exists(&pt, Some(k as usize), MilpLimits::default())?;
            let outside = !fk[k.min(k_bar) as usize].contains(p);
            if kid != norm.is_some_and(|n| n <= k) || kid != outside {
                failures.push(format!("{pt} k={k}: (k-ID) {kid}, min norm {norm:?}, outside F(k) {outside}"));
            }
        }
    }
    report.push("(k-ID) feasibility matches k-opt levels", failures, s.len() * ks.len());

    let mut failures = Vec::new();
    let s_set: HashSet<_> = s.iter().cloned().collect();
    if fk[0] != s_set {
        failures.push("F(0) != S".to_string());
    }
    for k in 1..fk.len() {
        if !fk[k].is_subset(&fk[k - 1]) {
            failures.push(format!("F({k}) not inside F({})", k - 1));
        }
    }
    if fk.last() != Some(&f) {
        failures.push("F(k-bar) != F".to_string());
    }
    report.push("k-opt hierarchy is nested and ends at F", failures, fk.len());

    let mut failures = Vec::new();
    for p in &s {
        let pt = int_point(&p.0, &p.1);
        let found = matches!(oracle.local_search(k_bar as usize, &pt, ObjectiveKind::Norm1), OracleOutcome::Found(_));
        let exact = oracle.direction_exists(&pt, None, MilpLimits::default())?;
        if found != exact {
            failures.push(format!("{pt}: local search {found}, exact {exact}"));
        }
    }
    report.push("local search at k-bar matches exact (ID)", failures, s.len());

    let optimum = table.brute.optimum();
    let configs = [
        ("exact MILP", SolverConfig::default()),
        (
            "local search k=2 with ISIC",
            SolverConfig {
                oracle: OracleConfig {
                    method: DirectionMethod::LocalSearch,
                    k: 2,
                    ..OracleConfig::default()
                },
                cuts: CutFamilies { idic: true, isic: true },
                ..SolverConfig::default()
            },
        ),
        (
            "legacy",
            SolverConfig {
                oracle_mode: crate::bnc::OracleMode::Legacy,
                ..SolverConfig::default()
            },
        ),
    ];
    let f_full: Vec<Vec<f64>> = f
        .iter()
        .map(|(x, y)| x.iter().chain(y).map(|v| *v as f64).collect())
        .collect();
    let mut solve_failures = Vec::new();
    let mut cut_failures = Vec::new();
    let mut cut_count = 0;
    for (name, cfg) in &configs {
        let res = match solve(inst, cfg) {
            Ok(r) => r,
            Err(e) => {
                solve_failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        match &optimum {
            Some((_, v)) => {
                let want = to_f64(v);
                if res.status != SolveStatus::Optimal || (res.objective - want).abs() > 1e-6 * (1.0 + want.abs()) {
                    solve_failures.push(format!("{name}: {} {} vs enumeration {want}", res.status, res.objective));
                }
            }
            None if res.status != SolveStatus::Infeasible => {
                solve_failures.push(format!("{name}: {} but enumeration finds F empty", res.status));
            }
            None => {}
        }
        for rec in &res.cuts {
            cut_count += 1;
            if rec.cut.violation_full(&rec.cut.vertex) < 1e-7 {
                cut_failures.push(format!("{name}: cut does not separate its vertex"));
            }
            if let Some(p) = f_full
                .iter()
                .find(|p| rec.applies_to(p) && rec.cut.violation_full(p) > 1e-9)
            {
                cut_failures.push(format!("{name}: cut removes bilevel feasible {p:?}"));
            }
        }
    }
    report.push("solver optimum matches enumeration", solve_failures, configs.len());
    report.push("generated cuts are valid for F", cut_failures, cut_count);

    let mut failures = Vec::new();
    let mut sets = 0;
    for k in 1..=3u64 {
        let fk_full: Vec<Vec<f64>> = fk[k.min(k_bar) as usize]
            .iter()
            .map(|(x, y)| x.iter().chain(y).map(|v| *v as f64).collect())
            .collect();
        for p in &s {
            let pt = int_point(&p.0, &p.1);
            let Some(dir) = oracle.exact_direction(&pt, ObjectiveKind::Norm1, Some(k as usize), MilpLimits::default())?
            else {
                continue;
            };
            let set = bfs_from_direction(inst, &dir);
            sets += 1;
            if let Some(q) = fk_full.iter().find(|q| set.in_interior(q, 1e-9)) {
                failures.push(format!("C_ID({:?}) holds F({k}) point {q:?}", dir.w));
            }
        }
    }
    report.push("k-free sets exclude F(k)", failures, sets);
    Ok(report)
}
