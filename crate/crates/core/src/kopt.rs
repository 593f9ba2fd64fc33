//! The k-opt relaxation hierarchy `S = F(0) ⊇ F(1) ⊇ … ⊇ F(k̄) = F`.
//!
//! A point `(x, y)` of S has level `k*` = the smallest 1-norm of an improving
//! feasible direction, or none when `y` is follower-optimal. Then
//! `y ∈ R(x; k)` iff `k* > k`, so one enumeration pass answers every k.

use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

use crate::bruteforce::BruteForce;
use crate::exec::Execution;
use crate::instance::{MiblpInstance, Point};
use crate::lattice::{int_point, point_to_ints, EnumerationError, Slice};
use crate::simplex::{solve_lp, LpStatus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KoptError {
    #[error("follower variable {0} is unbounded over the relaxation")]
    Unbounded(usize),
    #[error("LP failure while computing follower ranges")]
    LpFailure,
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
}

/// Enumerated slices with the level of every follower-feasible point.
#[derive(Clone, Debug)]
pub struct LevelTable {
    pub brute: BruteForce,
    /// `levels[s][i]` belongs to `brute.slices[s].ys[i]`.
    pub levels: Vec<Vec<Option<u64>>>,
}

impl LevelTable {
    fn slice_index(&self, x: &[i64]) -> Option<usize> {
        self.brute.slices.iter().position(|s| s.x == x)
    }

    /// Points of S with their levels.
    pub fn s_levels(&self) -> impl Iterator<Item = (&[i64], &[i64], Option<u64>)> {
        self.brute.slices.iter().zip(&self.levels).flat_map(|(s, lv)| {
            s.ys.iter()
                .zip(lv)
                .filter(|(p, _)| p.in_s)
                .map(move |(p, l)| (s.x.as_slice(), p.y.as_slice(), *l))
        })
    }
}

pub struct KoptContext<'a> {
    pub inst: &'a MiblpInstance,
    k_bar: u64,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
    exec: Execution,
    table: OnceLock<Result<LevelTable, EnumerationError>>,
}

impl<'a> KoptContext<'a> {
    pub fn new(inst: &'a MiblpInstance) -> Result<Self, KoptError> {
        Self::with_execution(inst, Execution::default())
    }

    pub fn with_execution(inst: &'a MiblpInstance, exec: Execution) -> Result<Self, KoptError> {
        let (y_min, y_max) = follower_ranges(inst)?;
        let k_bar = k_bar_from_ranges(inst, &y_min, &y_max);
        Ok(Self {
            inst,
            k_bar,
            y_min,
            y_max,
            exec,
            table: OnceLock::new(),
        })
    }

    pub fn k_bar(&self) -> u64 {
        self.k_bar
    }

    /// Enumerates the instance once and caches the levels.
    pub fn table(&self) -> Result<&LevelTable, KoptError> {
        self.table
            .get_or_init(|| {
                let brute = BruteForce::new(self.inst, self.exec)?;
                let levels = self.exec.map(&brute.slices, Slice::levels);
                Ok(LevelTable { brute, levels })
            })
            .as_ref()
            .map_err(|e| KoptError::Enumeration(e.clone()))
    }
}

/// Min and max of each follower variable over the relaxation used for k̄.
fn follower_ranges(inst: &MiblpInstance) -> Result<(Vec<f64>, Vec<f64>), KoptError> {
    let mut lp = inst.follower_range_relaxation();
    let n = inst.num_vars();
    let mut lo = Vec::with_capacity(inst.n2);
    let mut hi = Vec::with_capacity(inst.n2);
    for i in 0..inst.n2 {
        let j = inst.n1 + i;
        let mut ext = [0.0; 2];
        for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
            lp.objective = vec![0.0; n];
            lp.objective[j] = sign;
            let sol = solve_lp(&lp);
            ext[slot] = match sol.status {
                LpStatus::Optimal => sol.x[j],
                LpStatus::Infeasible => return Ok((vec![0.0; inst.n2], vec![0.0; inst.n2])),
                LpStatus::Unbounded => return Err(KoptError::Unbounded(i)),
                LpStatus::NumericallyUnstable => return Err(KoptError::LpFailure),
            };
        }
        lo.push(ext[0]);
        hi.push(ext[1]);
    }
    Ok((lo, hi))
}

fn k_bar_from_ranges(inst: &MiblpInstance, lo: &[f64], hi: &[f64]) -> u64 {
    const TOL: f64 = 1e-6;
    (0..inst.n2)
        .map(|i| {
            let width = if i < inst.r2 {
                (hi[i] + TOL).floor() - (lo[i] - TOL).ceil()
            } else {
                (hi[i] - lo[i] - TOL).ceil()
            };
            width.max(0.0) as u64
        })
        .sum()
}

pub fn compute_k_bar(inst: &MiblpInstance) -> Result<u64, KoptError> {
    let (lo, hi) = follower_ranges(inst)?;
    Ok(k_bar_from_ranges(inst, &lo, &hi))
}

/// `R(x; k)`: follower vectors of S(x) with no strictly better
/// follower-feasible vector within 1-norm distance k.
pub fn reaction_set_k(ctx: &KoptContext, x: &[i64], k: u64) -> Result<Vec<Vec<i64>>, KoptError> {
    let table = ctx.table()?;
    let Some(s) = table.slice_index(x) else { return Ok(Vec::new()) };
    let slice = &table.brute.slices[s];
    Ok(slice
        .ys
        .iter()
        .zip(&table.levels[s])
        .filter(|(p, l)| p.in_s && l.is_none_or(|l| l > k))
        .map(|(p, _)| p.y.clone())
        .collect())
}

#[allow(non_snake_case)]
pub fn enumerate_Fk(ctx: &KoptContext, k: u64) -> Result<Vec<Point>, KoptError> {
    Ok(ctx
        .table()?
        .s_levels()
        .filter(|(_, _, l)| l.is_none_or(|l| l > k))
        .map(|(x, y, _)| int_point(x, y))
        .collect())
}

/// Smallest 1-norm of an improving feasible direction at a point of S;
/// `None` iff the point is bilevel feasible.
pub fn min_ifd_norm(ctx: &KoptContext, point: &Point) -> Result<Option<u64>, KoptError> {
    let (x, y) = point_to_ints(point).ok_or(EnumerationError::NotInS)?;
    let table = ctx.table()?;
    let s = table.slice_index(&x).ok_or(EnumerationError::NotInS)?;
    let slice = &table.brute.slices[s];
    let i = slice
        .ys
        .iter()
        .position(|p| p.y == y && p.in_s)
        .ok_or(EnumerationError::NotInS)?;
    Ok(table.levels[s][i])
}

/// CSV over the whole follower grid at a fixed x: coordinates, membership
/// in S(x), and the level (`inf` for optimal responses, empty outside S(x)).
pub fn slice_csv(ctx: &KoptContext, x: &[i64]) -> Result<String, KoptError> {
    let table = ctx.table()?;
    let lat = &table.brute.lattice;
    let mut out = String::new();
    let header: Vec<String> = (1..=lat.n2).map(|i| format!("y{i}")).collect();
    let _ = writeln!(out, "{},in_s,level", header.join(","));
    let found = table.slice_index(x);
    for y in crate::lattice::grid(&lat.y_lo, &lat.y_hi) {
        let coords: Vec<String> = y.iter().map(|v| v.to_string()).collect();
        let entry = found.and_then(|s| {
            let slice = &table.brute.slices[s];
            slice
                .ys
                .iter()
                .position(|p| p.y == y && p.in_s)
                .map(|i| table.levels[s][i])
        });
        let (in_s, level) = match entry {
            Some(Some(l)) => (1, l.to_string()),
            Some(None) => (1, "inf".to_string()),
            None => (0, String::new()),
        };
        let _ = writeln!(out, "{},{in_s},{level}", coords.join(","));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;
    use std::collections::BTreeSet;

    fn moore_bard() -> MiblpInstance {
        parse_instance(include_str!("../data/moore_bard.miblp")).unwrap()
    }

    fn three_d() -> MiblpInstance {
        parse_instance(include_str!("../data/three_d.miblp")).unwrap()
    }

    #[test]
    fn moore_bard_k_bar() {
        // vertices of the polygon: y ranges over [0, 4]
        assert_eq!(compute_k_bar(&moore_bard()).unwrap(), 4);
    }

    #[test]
    fn fixed_follower_has_zero_k_bar() {
        let inst = parse_instance(
            "MIBLP 1\nVARS 1 1 1 1\nOBJ_UPPER 0 0\nOBJ_LOWER 1\nBOUNDS 0 2 3 3\nUPPER 0\nLOWER 1\n1 1 >= 0\n",
        )
        .unwrap();
        assert_eq!(compute_k_bar(&inst).unwrap(), 0);
    }

    /// Extrema of each follower variable over the 3D polyhedron by brute
    /// force over all vertices (intersections of three tight constraints).
    fn three_d_vertex_ranges() -> Vec<(f64, f64)> {
        let inst = three_d();
        let num = inst.numeric();
        let mut planes: Vec<([f64; 3], f64)> = Vec::new();
        for (a, (g, b)) in num.a2.iter().zip(num.g2.iter().zip(&num.b2)) {
            planes.push(([a[0], g[0], g[1]], *b));
        }
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            planes.push((e, num.lower[j]));
            let mut e = [0.0; 3];
            e[j] = -1.0;
            planes.push((e, -num.upper[j]));
        }
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); 2];
        for i in 0..planes.len() {
            for j in i + 1..planes.len() {
                for k in j + 1..planes.len() {
                    let m = [planes[i].0, planes[j].0, planes[k].0];
                    let d = det(m);
                    if d.abs() < 1e-9 {
                        continue;
                    }
                    let rhs = [planes[i].1, planes[j].1, planes[k].1];
                    let v: Vec<f64> = (0..3)
                        .map(|c| {
                            let mut mc = m;
                            for r in 0..3 {
                                mc[r][c] = rhs[r];
                            }
                            det(mc) / d
                        })
                        .collect();
                    if planes.iter().all(|(a, b)| a[0] * v[0] + a[1] * v[1] + a[2] * v[2] >= b - 1e-9) {
                        for t in 0..2 {
                            ranges[t].0 = ranges[t].0.min(v[t + 1]);
                            ranges[t].1 = ranges[t].1.max(v[t + 1]);
                        }
                    }
                }
            }
        }
        ranges
    }

    #[test]
    fn three_d_k_bar_matches_vertex_ranges() {
        let expected: u64 = three_d_vertex_ranges()
            .iter()
            .map(|(lo, hi)| ((hi + 1e-6).floor() - (lo - 1e-6).ceil()) as u64)
            .sum();
        assert_eq!(compute_k_bar(&three_d()).unwrap(), expected);
    }

    fn y_set(v: Vec<Vec<i64>>) -> BTreeSet<Vec<i64>> {
        v.into_iter().collect()
    }

    #[test]
    fn three_d_reaction_sets() {
        let inst = three_d();
        let ctx = KoptContext::new(&inst).unwrap();
        let r = y_set(reaction_set_k(&ctx, &[1], ctx.k_bar()).unwrap());
        let diff = |k| &y_set(reaction_set_k(&ctx, &[1], k).unwrap()) - &r;
        let expect = |v: &[[i64; 2]]| v.iter().map(|p| p.to_vec()).collect::<BTreeSet<_>>();
        assert_eq!(diff(1), expect(&[[3, 2], [7, 3], [2, 2], [1, 2]]));
        assert_eq!(diff(2), expect(&[[2, 2], [1, 2]]));
        assert_eq!(diff(3), expect(&[[1, 2]]));
        // R(x; 0) = S(x)
        let s1: BTreeSet<Vec<i64>> = ctx.table().unwrap().brute.slices[1]
            .ys
            .iter()
            .filter(|p| p.in_s)
            .map(|p| p.y.clone())
            .collect();
        assert_eq!(y_set(reaction_set_k(&ctx, &[1], 0).unwrap()), s1);
    }

    #[test]
    fn three_d_hierarchy_tail() {
        let inst = three_d();
        let ctx = KoptContext::new(&inst).unwrap();
        let f: BTreeSet<String> = crate::bruteforce::enumerate_F(&inst)
            .unwrap()
            .iter()
            .map(|p| p.to_string())
            .collect();
        let fk = |k| -> BTreeSet<String> { enumerate_Fk(&ctx, k).unwrap().iter().map(|p| p.to_string()).collect() };
        let extra: Vec<String> = fk(4).difference(&f).cloned().collect();
        assert_eq!(extra, vec![Point::new(vec![3.0], vec![4.0, 1.0]).to_string()]);
        for k in 5..=ctx.k_bar().max(5) {
            assert_eq!(fk(k), f);
        }
        assert_eq!(
            min_ifd_norm(&ctx, &Point::new(vec![3.0], vec![4.0, 1.0])).unwrap(),
            Some(5)
        );
        let s: BTreeSet<String> = crate::bruteforce::enumerate_S(&inst)
            .unwrap()
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(fk(0), s);
    }

    #[test]
    fn moore_bard_levels() {
        let inst = moore_bard();
        let ctx = KoptContext::new(&inst).unwrap();
        assert_eq!(min_ifd_norm(&ctx, &Point::new(vec![2.0], vec![4.0])).unwrap(), Some(1));
        assert_eq!(min_ifd_norm(&ctx, &Point::new(vec![2.0], vec![2.0])).unwrap(), None);
        assert!(min_ifd_norm(&ctx, &Point::new(vec![0.0], vec![0.0])).is_err());
    }

    #[test]
    fn slice_csv_marks_levels() {
        let inst = moore_bard();
        let ctx = KoptContext::new(&inst).unwrap();
        let csv = slice_csv(&ctx, &[2]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "y1,in_s,level");
        assert_eq!(&lines[1..], &["0,0,", "1,0,", "2,1,inf", "3,1,1", "4,1,1"]);
    }
}
