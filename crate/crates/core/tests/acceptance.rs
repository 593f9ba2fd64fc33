//! Acceptance gate: one pass/fail line per criterion, nonzero exit on any
//! failure.

use std::collections::{BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use idbc::bench::{
    baseline_profile, cumulative_profile, performance_profile, run_matrix, Curve, MatrixLimits, Measure, ProfileFilter,
    ProfileTable, RunRecord,
};
use idbc::bnc::{solve, BranchStrategy, CutFamilies, OracleMode, SolveStatus, SolverConfig};
use idbc::bruteforce::{optimal_by_enumeration, BruteForce};
use idbc::cuts::bfs_from_direction;
use idbc::exec::Execution;
use idbc::instance::{parse_instance, rational_from_i64, MiblpInstance, Point};
use idbc::kopt::{enumerate_Fk, min_ifd_norm, reaction_set_k, KoptContext};
use idbc::lattice::int_point;
use idbc::milp::{solve_milp, MilpLimits, MilpMode, MilpProblem, MilpStatus};
use idbc::oracle::{Direction, DirectionMethod, ObjectiveKind, OracleConfig, OracleContext, OracleOutcome};
use idbc::simplex::{solve_lp, LpProblem, LpStatus};
use idbc::suite::{suite, suite_instance, SUITE_SIZE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn moore_bard() -> MiblpInstance {
    parse_instance(include_str!("../data/moore_bard.miblp")).unwrap()
}

fn three_d() -> MiblpInstance {
    parse_instance(include_str!("../data/three_d.miblp")).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

type IntPoint = (Vec<i64>, Vec<i64>);

fn to_ints(p: &Point) -> IntPoint {
    (
        p.x.iter().map(|v| *v as i64).collect(),
        p.y.iter().map(|v| *v as i64).collect(),
    )
}

fn full(p: &IntPoint) -> Vec<f64> {
    p.0.iter().chain(&p.1).map(|v| *v as f64).collect()
}

/// Oracle configurations of the Moore–Bard regression matrix.
fn regression_configs() -> Vec<(String, SolverConfig)> {
    let methods: [(&str, DirectionMethod, usize, Option<usize>); 4] = [
        ("milp", DirectionMethod::ExactMilp, 0, None),
        ("milp-k2", DirectionMethod::ExactMilpK, 0, None),
        ("ls-k2-d0-10", DirectionMethod::LocalSearch, 0, Some(10)),
        ("ls-k2-d10-inf", DirectionMethod::LocalSearch, 10, None),
    ];
    let mut out = Vec::new();
    for (oname, mode) in [("id", OracleMode::ImprovingDirection), ("legacy", OracleMode::Legacy)] {
        for (mname, method, lb, ub) in methods {
            for (bname, branching) in [("fractional", BranchStrategy::Fractional), ("linking", BranchStrategy::LinkingPriority)] {
                let cfg = SolverConfig {
                    oracle_mode: mode,
                    oracle: OracleConfig {
                        method,
                        k: 2,
                        depth_lb: lb,
                        depth_ub: ub,
                        ..OracleConfig::default()
                    },
                    branching,
                    ..SolverConfig::default()
                };
                out.push((format!("{oname}/{mname}/{bname}"), cfg));
            }
        }
    }
    out
}

/// Exhaustive rational check of Moore–Bard over x in {0..7}, y in {0..5}:
/// min -x - 10y over (x, y) with y optimal for min y.
fn moore_bard_grid_optimum() -> ((i64, i64), i64) {
    let follower = |x: i64, y: i64| -5 * x + 4 * y <= 6 && x + 2 * y <= 10 && 2 * x - y <= 15 && 2 * x + 10 * y >= 15;
    let mut best: Option<((i64, i64), i64)> = None;
    for x in 0..=7 {
        let Some(phi) = (0..=5).filter(|&y| follower(x, y)).min() else { continue };
        let v = -x - 10 * phi;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some(((x, phi), v));
        }
    }
    best.expect("grid has a bilevel feasible point")
}

fn criterion_1() -> Verdict {
    let inst = moore_bard();
    let ((gx, gy), gv) = moore_bard_grid_optimum();
    ensure((gx, gy, gv) == (2, 2, -22), || format!("grid oracle optimum ({gx},{gy}) = {gv}"))?;
    let (ep, ev) = optimal_by_enumeration(&inst).map_err(|e| e.to_string())?.ok_or("enumeration found no optimum")?;
    ensure(ep == Point::new(vec![2.0], vec![2.0]) && ev == rational_from_i64(-22), || format!("enumeration optimum {ep} = {ev}"))?;
    let configs = regression_configs();
    let mut slowest = Duration::ZERO;
    let mut most_nodes = 0;
    for (name, cfg) in &configs {
        let t = Instant::now();
        let res = solve(&inst, cfg).map_err(|e| format!("{name}: {e}"))?;
        let elapsed = t.elapsed();
        ensure(res.status == SolveStatus::Optimal, || format!("{name}: status {}", res.status))?;
        ensure(res.incumbent == Some(Point::new(vec![2.0], vec![2.0])), || format!("{name}: incumbent {:?}", res.incumbent))?;
        ensure(res.objective == -22.0, || format!("{name}: value {}", res.objective))?;
        ensure(elapsed < Duration::from_secs(1), || format!("{name}: took {elapsed:?}"))?;
        ensure(res.stats.nodes < 100, || format!("{name}: {} nodes", res.stats.nodes))?;
        slowest = slowest.max(elapsed);
        most_nodes = most_nodes.max(res.stats.nodes);
    }
    Ok(format!("{} configurations, slowest {slowest:.2?}, at most {most_nodes} nodes", configs.len()))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let inst = three_d();
    let ctx = KoptContext::new(&inst).map_err(|e| e.to_string())?;
    let set = |v: Vec<Vec<i64>>| v.into_iter().collect::<BTreeSet<_>>();
    let r1 = set(reaction_set_k(&ctx, &[1], u64::MAX).map_err(|e| e.to_string())?);
    let expected: [(u64, Vec<Vec<i64>>); 3] = [
        (1, vec![vec![3, 2], vec![7, 3], vec![2, 2], vec![1, 2]]),
        (2, vec![vec![2, 2], vec![1, 2]]),
        (3, vec![vec![1, 2]]),
    ];
    for (k, want) in expected {
        let rk = set(reaction_set_k(&ctx, &[1], k).map_err(|e| e.to_string())?);
        let diff: BTreeSet<Vec<i64>> = rk.difference(&r1).cloned().collect();
        ensure(diff == set(want.clone()), || format!("R(1;{k})\\R(1) = {diff:?}, expected {want:?}"))?;
    }
    let f: BTreeSet<IntPoint> = BruteForce::new(&inst, Execution::default())
        .map_err(|e| e.to_string())?
        .f_points()
        .into_iter()
        .collect();
    let fk = |k| -> Result<BTreeSet<IntPoint>, String> {
        Ok(enumerate_Fk(&ctx, k).map_err(|e| e.to_string())?.iter().map(to_ints).collect())
    };
    let f4 = fk(4)?;
    let extra: Vec<&IntPoint> = f4.difference(&f).collect();
    ensure(f.is_subset(&f4) && extra == vec![&(vec![3], vec![4, 1])], || format!("F(4)\\F = {extra:?}"))?;
    let k_bar = ctx.k_bar();
    for k in 5..=k_bar.max(5) {
        ensure(fk(k)? == f, || format!("F({k}) != F"))?;
    }
    let p = Point::new(vec![3.0], vec![4.0, 1.0]);
    let norm = min_ifd_norm(&ctx, &p).map_err(|e| e.to_string())?;
    ensure(norm == Some(5), || format!("min_ifd_norm = {norm:?}"))?;

    // independent scan of integer directions from the raw follower rows
    let num = inst.numeric();
    let (ylo, yhi) = (num.y_lower(1).to_vec(), num.y_upper(1).to_vec());
    let mut minimal: Vec<(i64, i64)> = Vec::new();
    for w1 in -10i64..=10 {
        for w2 in -10i64..=10 {
            let norm = w1.abs() + w2.abs();
            if norm == 0 || norm > 5 {
                continue;
            }
            let y = [4.0 + w1 as f64, 1.0 + w2 as f64];
            let in_box = (0..2).all(|i| y[i] >= ylo[i] && y[i] <= yhi[i]);
            let rows_ok = num
                .a2
                .iter()
                .zip(&num.g2)
                .zip(&num.b2)
                .all(|((a, g), b)| a[0] * 3.0 + g[0] * y[0] + g[1] * y[1] >= *b - 1e-12);
            let improving = num.d2[0] * (w1 as f64) + num.d2[1] * (w2 as f64) < 0.0;
            if in_box && rows_ok && improving {
                ensure(norm == 5, || format!("IFD ({w1},{w2}) shorter than 5"))?;
                minimal.push((w1, w2));
            }
        }
    }
    ensure(minimal == vec![(4, -1)], || format!("minimal IFDs {minimal:?}"))?;
    let oracle = OracleContext::new(&inst);
    let dir = oracle
        .exact_direction(&p, ObjectiveKind::Norm1, Some(5), MilpLimits::default())
        .map_err(|e| e.to_string())?;
    ensure(dir.as_ref().map(|d| d.w.clone()) == Some(vec![4.0, -1.0]), || format!("(5-ID) direction {dir:?}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("k-bar = {k_bar}, F(4)\\F = {{(3,4,1)}}, unique minimal IFD (4,-1), {elapsed:.2?}"))
}

struct SuiteEntry {
    seed: u64,
    inst: MiblpInstance,
}

fn suite_entries() -> Vec<SuiteEntry> {
    suite(SUITE_SIZE).into_iter().map(|(seed, inst)| SuiteEntry { seed, inst }).collect()
}

/// F(k) for k in 0..=k̄ plus the points of S, as integer sets.
struct Hierarchy {
    s: Vec<IntPoint>,
    f: HashSet<IntPoint>,
    fk: Vec<HashSet<IntPoint>>,
}

fn hierarchy(ctx: &KoptContext) -> Result<Hierarchy, String> {
    let table = ctx.table().map_err(|e| e.to_string())?;
    let s = table.brute.s_points();
    let f = table.brute.f_set();
    let fk = (0..=ctx.k_bar())
        .map(|k| Ok(enumerate_Fk(ctx, k).map_err(|e| e.to_string())?.iter().map(to_ints).collect()))
        .collect::<Result<_, String>>()?;
    Ok(Hierarchy { s, f, fk })
}

/// Independent brute-force membership in F: (x, y) in S and no follower
/// vector in the box is feasible at x with strictly smaller d²y.
fn naive_in_f(inst: &MiblpInstance, p: &IntPoint) -> bool {
    let num = inst.numeric();
    let n1 = inst.n1;
    let lo: Vec<i64> = num.y_lower(n1).iter().map(|v| *v as i64).collect();
    let hi: Vec<i64> = num.y_upper(n1).iter().map(|v| *v as i64).collect();
    let value = |y: &[i64]| -> f64 { num.d2.iter().zip(y).map(|(d, v)| d * *v as f64).sum() };
    let feasible = |y: &[i64]| {
        num.a2.iter().zip(&num.g2).zip(&num.b2).all(|((a, g), b)| {
            let lhs: f64 = a.iter().zip(&p.0).map(|(c, v)| c * *v as f64).sum::<f64>()
                + g.iter().zip(y).map(|(c, v)| c * *v as f64).sum::<f64>();
            lhs >= *b - 1e-9
        })
    };
    let base = value(&p.1);
    let mut y = lo.clone();
    loop {
        if feasible(&y) && value(&y) < base - 1e-9 {
            return false;
        }
        let mut i = 0;
        loop {
            if i == y.len() {
                return true;
            }
            if y[i] < hi[i] {
                y[i] += 1;
                break;
            }
            y[i] = lo[i];
            i += 1;
        }
    }
}

fn criterion_3(entries: &[SuiteEntry]) -> Verdict {
    let start = Instant::now();
    let mut points = 0usize;
    let mut checks = 0usize;
    for e in entries {
        let inst = &e.inst;
        let ctx = KoptContext::new(inst).map_err(|err| format!("seed {}: {err}", e.seed))?;
        let h = hierarchy(&ctx)?;
        let oracle = OracleContext::new(inst);
        let k_bar = ctx.k_bar();
        let mut ks: Vec<u64> = vec![1, 2, 3, k_bar];
        ks.dedup();
        for p in &h.s {
            let pt = int_point(&p.0, &p.1);
            let tag = || format!("seed {} point {pt}", e.seed);
            let cert = oracle.certify_bilevel_feasible(&pt).map_err(|err| format!("{}: {err}", tag()))?;
            let legacy = oracle.legacy_feasibility_check(&pt).map_err(|err| format!("{}: {err}", tag()))?;
            let in_f = h.f.contains(p);
            ensure(cert == legacy && legacy == in_f, || format!("{}: certify {cert}, legacy {legacy}, enumeration {in_f}", tag()))?;
            ensure(in_f == naive_in_f(inst, p), || format!("{}: enumeration disagrees with naive scan", tag()))?;
            let norm = min_ifd_norm(&ctx, &pt).map_err(|err| format!("{}: {err}", tag()))?;
            for &k in &ks {
                let kid = oracle
                    .direction_exists(&pt, Some(k as usize), MilpLimits::default())
                    .map_err(|err| format!("{}: {err}", tag()))?;
                let by_norm = norm.is_some_and(|n| n <= k);
                let outside = !h.fk[k.min(k_bar) as usize].contains(p);
                ensure(kid == by_norm && by_norm == outside, || {
                    format!("{} k={k}: (k-ID) {kid}, min norm {norm:?}, outside F(k) {outside}", tag())
                })?;
                checks += 1;
            }
            points += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!("{} instances, {points} points of S, {checks} k-checks, 0 mismatches, {elapsed:.1?}", entries.len()))
}

/// Improving integer directions with `‖w‖₁ <= k`.
fn improving_directions(d2: &[f64], k: i64) -> Vec<Vec<i64>> {
    fn rec(i: usize, left: i64, w: &mut Vec<i64>, d2: &[f64], out: &mut Vec<Vec<i64>>) {
        if i == w.len() {
            if d2.iter().zip(w.iter()).map(|(a, b)| a * *b as f64).sum::<f64>() < 0.0 {
                out.push(w.clone());
            }
            return;
        }
        for v in -left..=left {
            w[i] = v;
            rec(i + 1, left - v.abs(), w, d2, out);
        }
        w[i] = 0;
    }
    let mut out = Vec::new();
    rec(0, k, &mut vec![0; d2.len()], d2, &mut out);
    out
}

fn criterion_4(entries: &[SuiteEntry]) -> Verdict {
    let configs = [
        SolverConfig {
            cuts: CutFamilies { idic: true, isic: true },
            ..SolverConfig::default()
        },
        SolverConfig {
            cuts: CutFamilies { idic: true, isic: true },
            oracle: OracleConfig {
                method: DirectionMethod::LocalSearch,
                k: 2,
                objective: ObjectiveKind::IdicFriendly,
                ..OracleConfig::default()
            },
            branching: BranchStrategy::LinkingPriority,
            ..SolverConfig::default()
        },
    ];
    let (mut cuts, mut idic, mut isic, mut free_sets) = (0usize, 0usize, 0usize, 0usize);
    for e in entries {
        let inst = &e.inst;
        let ctx = KoptContext::new(inst).map_err(|err| format!("seed {}: {err}", e.seed))?;
        let h = hierarchy(&ctx)?;
        let f_full: Vec<Vec<f64>> = h.f.iter().map(full).collect();
        for (ci, cfg) in configs.iter().enumerate() {
            let res = solve(inst, cfg).map_err(|err| format!("seed {}: {err}", e.seed))?;
            for rec in &res.cuts {
                let v = rec.cut.violation_full(&rec.cut.vertex);
                ensure(v >= 1e-7, || format!("seed {} config {ci}: vertex violation {v:e}", e.seed))?;
                for p in f_full.iter().filter(|p| rec.applies_to(p)) {
                    let v = rec.cut.violation_full(p);
                    ensure(v <= 1e-9, || format!("seed {} config {ci}: cut cuts off F point {p:?} by {v:e}", e.seed))?;
                }
                match rec.cut.family {
                    idbc::cuts::CutFamily::Idic => idic += 1,
                    idbc::cuts::CutFamily::Isic => isic += 1,
                }
                cuts += 1;
            }
        }
        for k in 1..=3u64 {
            let fk: Vec<Vec<f64>> = h.fk[k.min(ctx.k_bar()) as usize].iter().map(full).collect();
            for w in improving_directions(&inst.numeric().d2, k as i64) {
                let wf: Vec<f64> = w.iter().map(|v| *v as f64).collect();
                let dir = Direction {
                    norm1: wf.iter().map(|v| v.abs()).sum(),
                    improvement: inst.numeric().d2.iter().zip(&wf).map(|(a, b)| a * b).sum(),
                    w: wf,
                };
                let set = bfs_from_direction(inst, &dir);
                for p in &fk {
                    ensure(!set.in_interior(p, 1e-9), || {
                        format!("seed {}: C_ID({w:?}) contains F({k}) point {p:?} in its interior", e.seed)
                    })?;
                }
                free_sets += 1;
            }
        }
    }
    Ok(format!("{cuts} cuts ({idic} IDIC, {isic} ISIC) valid on F, {free_sets} k-free sets clean"))
}

fn criterion_5(entries: &[SuiteEntry]) -> Verdict {
    let mut levels = 0usize;
    for e in entries {
        let ctx = KoptContext::new(&e.inst).map_err(|err| format!("seed {}: {err}", e.seed))?;
        let h = hierarchy(&ctx)?;
        let s: HashSet<IntPoint> = h.s.iter().cloned().collect();
        ensure(h.fk[0] == s, || format!("seed {}: F(0) != S", e.seed))?;
        for k in 1..h.fk.len() {
            ensure(h.fk[k].is_subset(&h.fk[k - 1]), || format!("seed {}: F({k}) not inside F({})", e.seed, k - 1))?;
        }
        let last = h.fk.last().expect("k-bar level present");
        ensure(*last == h.f, || format!("seed {}: F(k-bar) != F", e.seed))?;
        let naive: HashSet<IntPoint> = h.s.iter().filter(|p| naive_in_f(&e.inst, p)).cloned().collect();
        ensure(naive == h.f, || format!("seed {}: enumerate_F disagrees with naive scan", e.seed))?;
        levels += h.fk.len();
    }
    Ok(format!("{} instances, {levels} levels nested, F(k-bar) = F", entries.len()))
}

fn criterion_6(entries: &[SuiteEntry]) -> Verdict {
    let mut points = 0usize;
    for e in entries {
        let ctx = KoptContext::new(&e.inst).map_err(|err| format!("seed {}: {err}", e.seed))?;
        let k_bar = ctx.k_bar() as usize;
        let oracle = OracleContext::new(&e.inst);
        let s = ctx.table().map_err(|err| err.to_string())?.brute.s_points();
        for p in &s {
            let pt = int_point(&p.0, &p.1);
            let found = matches!(oracle.local_search(k_bar, &pt, ObjectiveKind::Norm1), OracleOutcome::Found(_));
            let exact = oracle
                .direction_exists(&pt, None, MilpLimits::default())
                .map_err(|err| format!("seed {} {pt}: {err}", e.seed))?;
            ensure(found == exact, || format!("seed {} {pt}: local search {found}, exact {exact}", e.seed))?;
            points += 1;
        }
    }
    Ok(format!("{points} points, local search at k-bar agrees with exact (ID)"))
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Optimum over the vertices of a bounded polytope, `None` if empty.
fn vertex_optimum(lp: &LpProblem) -> Option<f64> {
    let n = lp.num_vars();
    let mut cons: Vec<(Vec<f64>, f64)> = lp.rows.iter().cloned().zip(lp.rhs.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), lp.lower[j]));
        e[j] = -1.0;
        cons.push((e, -lp.upper[j]));
    }
    let feasible = |x: &[f64]| cons.iter().all(|(a, b)| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() >= b - 1e-9);
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn choose(start: usize, depth: usize, pick: &mut Vec<usize>, m: usize, visit: &mut dyn FnMut(&[usize])) {
        if depth == pick.len() {
            visit(pick);
            return;
        }
        for i in start..m {
            pick[depth] = i;
            choose(i + 1, depth + 1, pick, m, visit);
        }
    }
    choose(0, 0, &mut pick, cons.len(), &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| cons[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| cons[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let v: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
        }
    });
    best
}

/// Exact integer optimum over the box grid, `None` if infeasible.
fn grid_optimum(obj: &[i64], rows: &[Vec<i64>], rhs: &[i64], lo: &[i64], hi: &[i64]) -> Option<i64> {
    let mut x = lo.to_vec();
    let mut best: Option<i64> = None;
    loop {
        if rows.iter().zip(rhs).all(|(a, b)| a.iter().zip(&x).map(|(u, v)| u * v).sum::<i64>() >= *b) {
            let v: i64 = obj.iter().zip(&x).map(|(c, v)| c * v).sum();
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
        let mut i = 0;
        loop {
            if i == x.len() {
                return best;
            }
            if x[i] < hi[i] {
                x[i] += 1;
                break;
            }
            x[i] = lo[i];
            i += 1;
        }
    }
}

struct TinyProblem {
    obj: Vec<i64>,
    rows: Vec<Vec<i64>>,
    rhs: Vec<i64>,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl TinyProblem {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(0..=4);
        let lo: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=0)).collect();
        let hi: Vec<i64> = lo.iter().map(|l| l + rng.gen_range(0..=6)).collect();
        Self {
            obj: (0..n).map(|_| rng.gen_range(-5..=5)).collect(),
            rows: (0..m).map(|_| (0..n).map(|_| rng.gen_range(-5..=5)).collect()).collect(),
            rhs: (0..m).map(|_| rng.gen_range(-8..=6)).collect(),
            lo,
            hi,
        }
    }

    fn lp(&self) -> LpProblem {
        let f = |v: &[i64]| v.iter().map(|a| *a as f64).collect::<Vec<f64>>();
        LpProblem {
            objective: f(&self.obj),
            rows: self.rows.iter().map(|r| f(r)).collect(),
            rhs: f(&self.rhs),
            lower: f(&self.lo),
            upper: f(&self.hi),
        }
    }
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57_0007);
    let (mut lp_opt, mut lp_inf, mut ip_opt, mut ip_inf) = (0, 0, 0, 0);
    for i in 0..500 {
        let t = TinyProblem::random(&mut rng);
        let lp = t.lp();
        let sol = solve_lp(&lp);
        match (vertex_optimum(&lp), sol.status) {
            (Some(v), LpStatus::Optimal) => {
                ensure((v - sol.objective).abs() <= 1e-7, || format!("problem {i}: LP {} vs vertices {v}", sol.objective))?;
                lp_opt += 1;
            }
            (None, LpStatus::Infeasible) => lp_inf += 1,
            (v, s) => return Err(format!("problem {i}: LP status {s:?}, vertices {v:?}")),
        }
        let milp = MilpProblem {
            integer: (0..lp.num_vars()).collect(),
            lp,
            cutoff: None,
            mode: MilpMode::Optimize,
        };
        let ms = solve_milp(&milp, MilpLimits::default());
        match (grid_optimum(&t.obj, &t.rows, &t.rhs, &t.lo, &t.hi), ms.status) {
            (Some(v), MilpStatus::Optimal) => {
                ensure(ms.objective == v as f64, || format!("problem {i}: MILP {} vs grid {v}", ms.objective))?;
                let x = ms.incumbent.as_ref().ok_or("optimal MILP without incumbent")?;
                ensure(x.iter().all(|v| v.fract() == 0.0), || format!("problem {i}: fractional incumbent {x:?}"))?;
                ip_opt += 1;
            }
            (None, MilpStatus::Infeasible) => ip_inf += 1,
            (v, s) => return Err(format!("problem {i}: MILP status {s:?}, grid {v:?}")),
        }
    }
    Ok(format!("500 LPs ({lp_opt} optimal, {lp_inf} infeasible), 500 MILPs ({ip_opt} optimal, {ip_inf} infeasible)"))
}

fn record(inst: &str, cfg: &str, status: &str, t: f64, gap: f64) -> RunRecord {
    RunRecord {
        instance: inst.into(),
        config: cfg.into(),
        status: status.into(),
        objective: 0.0,
        wall_seconds: t,
        cpu_seconds: t,
        nodes: 1,
        ifd_seconds: 0.0,
        avg_ifd_seconds: 0.0,
        gap,
    }
}

fn well_formed(t: &ProfileTable) -> Result<(), String> {
    for c in &t.curves {
        let mut prev = (f64::NEG_INFINITY, 0.0);
        for &(x, y) in &c.points {
            ensure(x > prev.0 && y >= prev.1 && (0.0..=1.0).contains(&y), || {
                format!("{}:{} not a CDF at ({x},{y})", t.name, c.name)
            })?;
            prev = (x, y);
        }
    }
    Ok(())
}

fn curve(name: &str, points: &[(f64, f64)]) -> Curve {
    Curve { name: name.into(), points: points.to_vec() }
}

fn criterion_8() -> Verdict {
    let fixture = vec![
        record("p", "A", "Optimal", 2.0, 0.0),
        record("p", "B", "Optimal", 1.0, 0.0),
        record("q", "A", "Optimal", 3.0, 0.0),
        record("q", "B", "LimitReached", 10.0, 0.2),
        record("r", "A", "LimitReached", 10.0, 0.5),
    ];
    let filter = ProfileFilter::default();
    let perf = performance_profile(&fixture, Measure::Time, filter).map_err(|e| e.to_string())?;
    ensure(perf.instances == ["p", "q"], || format!("kept {:?}", perf.instances))?;
    ensure(perf.curves == vec![curve("A", &[(1.0, 0.5), (2.0, 1.0)]), curve("B", &[(1.0, 0.5)])], || {
        format!("performance {:?}", perf.curves)
    })?;
    let base = baseline_profile(&fixture, Measure::Time, "B", filter).map_err(|e| e.to_string())?;
    ensure(base.curves == vec![curve("A", &[(0.0, 0.5), (2.0, 1.0)]), curve("B", &[(1.0, 1.0)])], || {
        format!("baseline {:?}", base.curves)
    })?;
    ensure(base.versus_baseline == vec![("A".into(), 0.5, 0.5), ("B".into(), 0.0, 0.0)], || {
        format!("baseline fractions {:?}", base.versus_baseline)
    })?;
    let cum = cumulative_profile(&fixture);
    let want = vec![
        curve("A:time", &[(2.0, 1.0 / 3.0), (3.0, 2.0 / 3.0)]),
        curve("A:gap", &[(0.0, 2.0 / 3.0), (0.5, 1.0)]),
        curve("B:time", &[(1.0, 0.5)]),
        curve("B:gap", &[(0.0, 0.5), (0.2, 1.0)]),
    ];
    ensure(cum.curves == want, || format!("cumulative {:?}", cum.curves))?;
    for cfg in ["A", "B"] {
        let time = cum.curve(&format!("{cfg}:time")).expect("time curve");
        let gap = cum.curve(&format!("{cfg}:gap")).expect("gap curve");
        ensure(time.at(f64::MAX) == gap.at(0.0), || format!("{cfg}: curves do not connect"))?;
    }
    for t in [&perf, &base, &cum] {
        well_formed(t)?;
    }
    Ok("5-record fixture matches hand-computed curves; all CDFs nondecreasing in [0,1]".into())
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let instances: Vec<(String, MiblpInstance)> = (1001..=1030)
        .map(|s| suite_instance(s).map(|i| (format!("gen-{s}"), i)).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let ls = |lb, ub| SolverConfig {
        oracle: OracleConfig {
            method: DirectionMethod::LocalSearch,
            k: 2,
            depth_lb: lb,
            depth_ub: ub,
            ..OracleConfig::default()
        },
        ..SolverConfig::default()
    };
    let configs = vec![
        ("milp".to_string(), SolverConfig::default()),
        ("legacy".to_string(), SolverConfig { oracle_mode: OracleMode::Legacy, ..SolverConfig::default() }),
        ("ls-k2".to_string(), ls(0, None)),
        ("ls-k2-d10-inf".to_string(), ls(10, None)),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("results.csv");
    let limits = MatrixLimits { time_limit: Some(Duration::from_secs(10)), node_limit: None };
    let records = run_matrix(&instances, &configs, limits, Some(&csv), Execution::default()).map_err(|e| e.to_string())?;
    ensure(records.len() == 120, || format!("{} records", records.len()))?;
    let reread = idbc::bench::read_records(&csv).map_err(|e| e.to_string())?;
    ensure(reread.len() == 120, || format!("CSV holds {} records", reread.len()))?;
    let filter = ProfileFilter { min_time: 0.0 };
    let tables = [
        performance_profile(&reread, Measure::Time, filter).map_err(|e| e.to_string())?,
        baseline_profile(&reread, Measure::Time, "milp", filter).map_err(|e| e.to_string())?,
        cumulative_profile(&reread),
    ];
    let mut files = 0;
    for t in &tables {
        well_formed(t)?;
        files += t.write_dat(dir.path()).map_err(|e| e.to_string())?.len();
    }
    let solved = records.iter().filter(|r| r.solved()).count();
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1800), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "30 instances x 4 configurations in {elapsed:.1?}, {solved}/120 solved, {files} profile files; \
         the published performance comparisons rest on a 676-instance benchmark corpus with 3600 s limits \
         and are not reproducible at desk scale, so no performance ordering is asserted"
    ))
}

fn main() -> ExitCode {
    let entries = suite_entries();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("Moore-Bard regression", Box::new(criterion_1)),
        ("3D k-opt regression", Box::new(criterion_2)),
        ("oracle equivalence", Box::new(|| criterion_3(&entries))),
        ("cut validity", Box::new(|| criterion_4(&entries))),
        ("hierarchy", Box::new(|| criterion_5(&entries))),
        ("local search at full radius", Box::new(|| criterion_6(&entries))),
        ("subsolver soundness", Box::new(criterion_7)),
        ("profile machinery", Box::new(criterion_8)),
        ("bench harness at desk scale", Box::new(criterion_9)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t = Instant::now();
        match run() {
            Ok(detail) => println!("[PASS] {n} {name}: {detail} ({:.1?})", t.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {n} {name}: {detail} ({:.1?})", t.elapsed());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
