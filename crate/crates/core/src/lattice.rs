//! Exact integer-grid enumeration shared by the enumeration oracles.
//!
//! Rows are scaled to integers once, so every membership test is an exact
//! `i128` dot product. Nothing here touches the LP or MILP solvers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::exec::Execution;
use crate::instance::{MiblpInstance, Point, Rational, Row};

pub const ENUMERATION_BUDGET: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("enumeration requires a pure-integer instance")]
    NotPureInteger,
    #[error("enumeration too large: {0} grid points exceed the budget of {1}")]
    TooLarge(u128, u128),
    #[error("instance data too large for exact integer enumeration")]
    Overflow,
    #[error("point is not in S")]
    NotInS,
}

fn to_i128(v: &BigInt) -> Result<i128, EnumerationError> {
    v.to_i128().ok_or(EnumerationError::Overflow)
}

/// Scales rationals by the lcm of their denominators.
fn scale(v: &[&Rational]) -> Result<(Vec<i128>, BigInt), EnumerationError> {
    let lcm = v.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let ints = v
        .iter()
        .map(|r| to_i128(&(r.numer() * (&lcm / r.denom()))))
        .collect::<Result<_, _>>()?;
    Ok((ints, lcm))
}

/// `coeffs · (x, y) >= rhs` with integer data.
#[derive(Clone, Debug)]
pub(crate) struct IntRow {
    coeffs: Vec<i128>,
    rhs: i128,
}

impl IntRow {
    fn from_row(row: &Row) -> Result<Self, EnumerationError> {
        let all: Vec<&Rational> = row.coeffs.iter().chain(std::iter::once(&row.rhs)).collect();
        let (mut ints, _) = scale(&all)?;
        let rhs = ints.pop().expect("rhs present");
        Ok(Self { coeffs: ints, rhs })
    }

    fn holds(&self, x: &[i64], y: &[i64]) -> bool {
        let lhs: i128 = self
            .coeffs
            .iter()
            .zip(x.iter().chain(y))
            .map(|(a, b)| a * *b as i128)
            .sum();
        lhs >= self.rhs
    }
}

/// Iterates all integer vectors in `[lo, hi]` in lexicographic order.
pub fn grid(lo: &[i64], hi: &[i64]) -> GridIter {
    let empty = lo.iter().zip(hi).any(|(l, h)| l > h);
    GridIter {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        next: if empty { None } else { Some(lo.to_vec()) },
    }
}

pub struct GridIter {
    lo: Vec<i64>,
    hi: Vec<i64>,
    next: Option<Vec<i64>>,
}

impl Iterator for GridIter {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        for i in (0..succ.len()).rev() {
            if succ[i] < self.hi[i] {
                succ[i] += 1;
                self.next = Some(succ);
                return Some(cur);
            }
            succ[i] = self.lo[i];
        }
        Some(cur)
    }
}

fn grid_size(lo: &[i64], hi: &[i64]) -> u128 {
    lo.iter()
        .zip(hi)
        .map(|(l, h)| if h < l { 0 } else { (h - l + 1) as u128 })
        .product()
}

/// A follower vector that is feasible for the follower's problem at some x.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FollowerPoint {
    pub y: Vec<i64>,
    /// Follower objective, scaled to an integer.
    pub value: i128,
    /// Whether `(x, y)` also satisfies the leader rows, i.e. lies in S.
    pub in_s: bool,
}

/// All follower-feasible integer vectors for one leader decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slice {
    pub x: Vec<i64>,
    pub ys: Vec<FollowerPoint>,
}

impl Slice {
    /// Scaled follower value function at this x, `None` when infeasible.
    pub fn phi(&self) -> Option<i128> {
        self.ys.iter().map(|p| p.value).min()
    }

    /// For each follower point, the smallest 1-norm distance to a strictly
    /// better follower-feasible point (`None` when the point is optimal).
    pub fn levels(&self) -> Vec<Option<u64>> {
        let mut order: Vec<usize> = (0..self.ys.len()).collect();
        order.sort_by_key(|&i| self.ys[i].value);
        let mut out = vec![None; self.ys.len()];
        for (pos, &i) in order.iter().enumerate() {
            let vi = self.ys[i].value;
            let mut best: Option<u64> = None;
            for &j in &order[..pos] {
                if self.ys[j].value >= vi {
                    break;
                }
                let dist: u64 = self.ys[i]
                    .y
                    .iter()
                    .zip(&self.ys[j].y)
                    .map(|(a, b)| a.abs_diff(*b))
                    .sum();
                if best.is_none_or(|b| dist < b) {
                    best = Some(dist);
                }
            }
            out[i] = best;
        }
        out
    }
}

/// Exact integer view of a pure-integer instance.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub n1: usize,
    pub n2: usize,
    pub x_lo: Vec<i64>,
    pub x_hi: Vec<i64>,
    pub y_lo: Vec<i64>,
    pub y_hi: Vec<i64>,
    leader: Vec<IntRow>,
    follower: Vec<IntRow>,
    d2: Vec<i128>,
    d2_scale: BigInt,
    objective: Vec<i128>,
    objective_scale: BigInt,
}

impl Lattice {
    pub fn new(inst: &MiblpInstance) -> Result<Self, EnumerationError> {
        if !inst.is_pure_integer() {
            return Err(EnumerationError::NotPureInteger);
        }
        let ceil = |r: &Rational| r.ceil().to_integer().to_i64().ok_or(EnumerationError::Overflow);
        let floor = |r: &Rational| r.floor().to_integer().to_i64().ok_or(EnumerationError::Overflow);
        let lo: Vec<i64> = inst.lower_bounds.iter().map(ceil).collect::<Result<_, _>>()?;
        let hi: Vec<i64> = inst.upper_bounds.iter().map(floor).collect::<Result<_, _>>()?;
        let size = grid_size(&lo, &hi);
        if size > ENUMERATION_BUDGET {
            return Err(EnumerationError::TooLarge(size, ENUMERATION_BUDGET));
        }
        let (d2, d2_scale) = scale(&inst.d2.iter().collect::<Vec<_>>())?;
        let obj: Vec<&Rational> = inst.c.iter().chain(&inst.d1).collect();
        let (objective, objective_scale) = scale(&obj)?;
        let n1 = inst.n1;
        Ok(Self {
            n1,
            n2: inst.n2,
            x_lo: lo[..n1].to_vec(),
            x_hi: hi[..n1].to_vec(),
            y_lo: lo[n1..].to_vec(),
            y_hi: hi[n1..].to_vec(),
            leader: inst.upper_rows.iter().map(IntRow::from_row).collect::<Result<_, _>>()?,
            follower: inst.lower_rows.iter().map(IntRow::from_row).collect::<Result<_, _>>()?,
            d2,
            d2_scale,
            objective,
            objective_scale,
        })
    }

    pub fn x_grid(&self) -> GridIter {
        grid(&self.x_lo, &self.x_hi)
    }

    pub fn follower_feasible(&self, x: &[i64], y: &[i64]) -> bool {
        self.follower.iter().all(|r| r.holds(x, y))
    }

    pub fn leader_feasible(&self, x: &[i64], y: &[i64]) -> bool {
        self.leader.iter().all(|r| r.holds(x, y))
    }

    pub fn in_bounds(&self, x: &[i64], y: &[i64]) -> bool {
        let within = |v: &[i64], lo: &[i64], hi: &[i64]| v.iter().zip(lo.iter().zip(hi)).all(|(a, (l, h))| a >= l && a <= h);
        x.len() == self.n1 && y.len() == self.n2 && within(x, &self.x_lo, &self.x_hi) && within(y, &self.y_lo, &self.y_hi)
    }

    /// Whether the integer point lies in S.
    pub fn in_s(&self, x: &[i64], y: &[i64]) -> bool {
        self.in_bounds(x, y) && self.follower_feasible(x, y) && self.leader_feasible(x, y)
    }

    pub fn follower_value(&self, y: &[i64]) -> i128 {
        self.d2.iter().zip(y).map(|(a, b)| a * *b as i128).sum()
    }

    /// Converts a scaled follower value back to `d²y`.
    pub fn unscale_follower(&self, v: i128) -> Rational {
        Rational::new(BigInt::from(v), self.d2_scale.clone())
    }

    /// Exact leader objective `cx + d¹y`.
    pub fn leader_value(&self, x: &[i64], y: &[i64]) -> Rational {
        let v: i128 = self
            .objective
            .iter()
            .zip(x.iter().chain(y))
            .map(|(a, b)| a * *b as i128)
            .sum();
        Rational::new(BigInt::from(v), self.objective_scale.clone())
    }

    pub fn slice(&self, x: &[i64]) -> Slice {
        let ys = grid(&self.y_lo, &self.y_hi)
            .filter(|y| self.follower_feasible(x, y))
            .map(|y| FollowerPoint {
                value: self.follower_value(&y),
                in_s: self.leader_feasible(x, &y),
                y,
            })
            .collect();
        Slice { x: x.to_vec(), ys }
    }

    /// Every x-slice of the grid, in lexicographic order of x.
    pub fn slices(&self, exec: Execution) -> Vec<Slice> {
        let xs: Vec<Vec<i64>> = self.x_grid().collect();
        exec.map(&xs, |x| self.slice(x))
    }
}

pub fn int_point(x: &[i64], y: &[i64]) -> Point {
    Point::new(
        x.iter().map(|v| *v as f64).collect(),
        y.iter().map(|v| *v as f64).collect(),
    )
}

/// Integer coordinates of a point, if every entry is integral.
pub fn point_to_ints(p: &Point) -> Option<(Vec<i64>, Vec<i64>)> {
    let conv = |v: &[f64]| -> Option<Vec<i64>> {
        v.iter()
            .map(|a| if a.fract() == 0.0 && a.abs() < 9.0e15 { Some(*a as i64) } else { None })
            .collect()
    };
    Some((conv(&p.x)?, conv(&p.y)?))
}
