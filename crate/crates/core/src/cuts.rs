//! Bilevel-free sets and intersection cuts.
//!
//! Both free sets are independent of the point they were built from. An
//! intersection cut is valid for every point of the cone outside the
//! interior of the free set.

use thiserror::Error;

use crate::instance::{MiblpInstance, Point};
use crate::oracle::Direction;
use crate::simplex::{invert, SimplicialCone};

/// Minimum slack of the cone vertex on every free-set row.
pub const INTERIOR_MARGIN: f64 = 1e-7;
/// Minimum violation at the vertex for a cut to be emitted.
pub const MIN_VIOLATION: f64 = 1e-7;
const RAY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CutFamily {
    Idic,
    Isic,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FreeSetSource {
    FromDirection(Vec<f64>),
    FromSolution(Vec<f64>),
}

/// Polyhedron `{p : rows · p >= rhs}` over the full `(x, y)` space whose
/// interior holds no bilevel feasible point.
#[derive(Clone, Debug, PartialEq)]
pub struct BilevelFreeSet {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub source: FreeSetSource,
}

impl BilevelFreeSet {
    pub fn family(&self) -> CutFamily {
        match self.source {
            FreeSetSource::FromDirection(_) => CutFamily::Idic,
            FreeSetSource::FromSolution(_) => CutFamily::Isic,
        }
    }

    /// Smallest row slack at `full` (`+inf` for an empty row system).
    pub fn min_slack(&self, full: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| dot(a, full) - b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, full: &[f64]) -> bool {
        self.min_slack(full) >= -1e-9
    }

    /// Strict interior membership with the given margin.
    pub fn in_interior(&self, full: &[f64], margin: f64) -> bool {
        self.min_slack(full) > margin
    }
}

/// `α_x x + α_y y >= β`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub alpha_x: Vec<f64>,
    pub alpha_y: Vec<f64>,
    pub beta: f64,
    pub family: CutFamily,
    /// The cone vertex the cut separates.
    pub vertex: Vec<f64>,
}

impl Cut {
    pub fn coefficients(&self) -> Vec<f64> {
        self.alpha_x.iter().chain(&self.alpha_y).copied().collect()
    }

    pub fn violation_full(&self, full: &[f64]) -> f64 {
        self.beta - dot(&self.coefficients(), full)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutError {
    #[error("vertex is not interior to the free set")]
    NotSeparable,
    #[error("free set contains the whole cone")]
    FreeSetContainsCone,
    #[error("ray matrix is singular")]
    SingularCone,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// IDIC free set of an improving direction `w`:
/// `A²x + G²y >= b² - m - G²w` and `l - m_j <= y + w <= u + m_j`, where
/// `m_j` is the margin on integer coordinates and 0 on continuous ones.
pub fn bfs_from_direction(inst: &MiblpInstance, w: &Direction) -> BilevelFreeSet {
    let num = inst.numeric();
    let (n1, n2) = (inst.n1, inst.n2);
    let margin = inst.free_set_margin();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for ((a, g), b) in num.a2.iter().zip(&num.g2).zip(&num.b2) {
        rows.push(a.iter().chain(g).copied().collect());
        rhs.push(b - margin - dot(g, &w.w));
    }
    for j in 0..n2 {
        let (mut lo, mut hi) = (num.lower[n1 + j], num.upper[n1 + j]);
        let m = if j < inst.r2 {
            lo = (lo - 1e-9).ceil();
            hi = (hi + 1e-9).floor();
            margin
        } else {
            0.0
        };
        let mut row = vec![0.0; n1 + n2];
        row[n1 + j] = 1.0;
        rows.push(row.clone());
        rhs.push(lo - m - w.w[j]);
        row[n1 + j] = -1.0;
        rows.push(row);
        rhs.push(-(hi + m - w.w[j]));
    }
    BilevelFreeSet {
        rows,
        rhs,
        source: FreeSetSource::FromDirection(w.w.clone()),
    }
}

/// ISIC free set of an improving solution `y*`:
/// `d²y >= d²y*` and `A²x >= b² - G²y* - m`. Rows without x terms that are
/// trivially satisfied are dropped.
pub fn bfs_from_solution(inst: &MiblpInstance, y_star: &[f64]) -> BilevelFreeSet {
    let num = inst.numeric();
    let (n1, n2) = (inst.n1, inst.n2);
    let margin = inst.free_set_margin();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut obj = vec![0.0; n1 + n2];
    obj[n1..].copy_from_slice(&num.d2);
    rows.push(obj);
    rhs.push(dot(&num.d2, y_star));
    for ((a, g), b) in num.a2.iter().zip(&num.g2).zip(&num.b2) {
        let r = b - dot(g, y_star) - margin;
        if a.iter().all(|v| *v == 0.0) && r < 0.0 {
            continue;
        }
        let mut row = a.clone();
        row.resize(n1 + n2, 0.0);
        rows.push(row);
        rhs.push(r);
    }
    BilevelFreeSet {
        rows,
        rhs,
        source: FreeSetSource::FromSolution(y_star.to_vec()),
    }
}

/// Step lengths along each ray until the ray leaves the free set.
pub fn ray_steps(cone: &SimplicialCone, c: &BilevelFreeSet) -> Vec<f64> {
    cone.rays
        .iter()
        .map(|r| {
            c.rows
                .iter()
                .zip(&c.rhs)
                .filter_map(|(a, b)| {
                    let ar = dot(a, r);
                    (ar < -RAY_TOL).then(|| (dot(a, &cone.vertex) - b) / -ar)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Intersection cut from a simplicial cone and a free set containing its
/// vertex in the interior: `Σ z_j / λ_j >= 1` in ray coordinates.
pub fn intersection_cut(cone: &SimplicialCone, c: &BilevelFreeSet, n1: usize) -> Result<Cut, CutError> {
    let n = cone.vertex.len();
    if !c.in_interior(&cone.vertex, INTERIOR_MARGIN) {
        return Err(CutError::NotSeparable);
    }
    let lambda = ray_steps(cone, c);
    if lambda.iter().all(|l| l.is_infinite()) {
        return Err(CutError::FreeSetContainsCone);
    }
    let mu: Vec<f64> = lambda.iter().map(|l| if l.is_finite() { 1.0 / l } else { 0.0 }).collect();
    // p = v + R z with the rays as columns of R, so z = R⁻¹(p - v)
    let rmat: Vec<Vec<f64>> = (0..n).map(|i| cone.rays.iter().map(|r| r[i]).collect()).collect();
    let rinv = invert(&rmat).ok_or(CutError::SingularCone)?;
    let mut alpha: Vec<f64> = (0..n).map(|k| (0..n).map(|j| mu[j] * rinv[j][k]).sum()).collect();
    let mut beta = 1.0 + dot(&alpha, &cone.vertex);
    let scale = alpha.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if scale <= 0.0 || !scale.is_finite() {
        return Err(CutError::SingularCone);
    }
    for a in alpha.iter_mut() {
        *a /= scale;
        if a.abs() < 1e-14 {
            *a = 0.0;
        }
    }
    beta /= scale;
    beta -= 1e-10 * (1.0 + beta.abs());
    let cut = Cut {
        alpha_y: alpha.split_off(n1),
        alpha_x: alpha,
        beta,
        family: c.family(),
        vertex: cone.vertex.clone(),
    };
    if cut.violation_full(&cone.vertex) < MIN_VIOLATION {
        return Err(CutError::NotSeparable);
    }
    Ok(cut)
}

/// `β - (α_x x + α_y y)`; positive means violated.
pub fn cut_violation(cut: &Cut, p: &Point) -> f64 {
    cut.beta - dot(&cut.alpha_x, &p.x) - dot(&cut.alpha_y, &p.y)
}
