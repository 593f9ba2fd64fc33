//! Ground-truth enumeration of S, φ, R(x), F and the bilevel optimum.
//!
//! Pure integer arithmetic over the bounded grid; independent of the LP,
//! MILP and oracle code so agreement tests against them mean something.

use std::collections::HashSet;

use crate::exec::Execution;
use crate::instance::{MiblpInstance, Point, Rational};
use crate::lattice::{int_point, point_to_ints, EnumerationError, Lattice, Slice};

/// Enumerated structure of a pure-integer instance.
#[derive(Clone, Debug)]
pub struct BruteForce {
    pub lattice: Lattice,
    pub slices: Vec<Slice>,
}

impl BruteForce {
    pub fn new(inst: &MiblpInstance, exec: Execution) -> Result<Self, EnumerationError> {
        let lattice = Lattice::new(inst)?;
        let slices = lattice.slices(exec);
        Ok(Self { lattice, slices })
    }

    /// All integral points of P.
    pub fn s_points(&self) -> Vec<(Vec<i64>, Vec<i64>)> {
        self.slices
            .iter()
            .flat_map(|s| s.ys.iter().filter(|p| p.in_s).map(|p| (s.x.clone(), p.y.clone())))
            .collect()
    }

    /// The bilevel feasible region: points of S whose y is follower-optimal.
    pub fn f_points(&self) -> Vec<(Vec<i64>, Vec<i64>)> {
        let mut out = Vec::new();
        for s in &self.slices {
            let Some(phi) = s.phi() else { continue };
            out.extend(
                s.ys.iter()
                    .filter(|p| p.in_s && p.value == phi)
                    .map(|p| (s.x.clone(), p.y.clone())),
            );
        }
        out
    }

    pub fn f_set(&self) -> HashSet<(Vec<i64>, Vec<i64>)> {
        self.f_points().into_iter().collect()
    }

    /// Exact follower value function at `x`, `None` when infeasible.
    pub fn phi(&self, x: &[i64]) -> Option<Rational> {
        let slice = self.slices.iter().find(|s| s.x == x)?;
        slice.phi().map(|v| self.lattice.unscale_follower(v))
    }

    /// Optimistic bilevel optimum, `None` when F is empty. Ties go to the
    /// first point in lexicographic order.
    pub fn optimum(&self) -> Option<(Point, Rational)> {
        let mut best: Option<(Vec<i64>, Vec<i64>, Rational)> = None;
        for (x, y) in self.f_points() {
            let v = self.lattice.leader_value(&x, &y);
            if best.as_ref().is_none_or(|(_, _, b)| v < *b) {
                best = Some((x, y, v));
            }
        }
        best.map(|(x, y, v)| (int_point(&x, &y), v))
    }

    pub fn contains_f(&self, p: &Point) -> bool {
        let Some((x, y)) = point_to_ints(p) else { return false };
        let Some(slice) = self.slices.iter().find(|s| s.x == x) else { return false };
        let phi = slice.phi();
        slice.ys.iter().any(|q| q.y == y && q.in_s && Some(q.value) == phi)
    }
}

#[allow(non_snake_case)]
pub fn enumerate_S(inst: &MiblpInstance) -> Result<Vec<Point>, EnumerationError> {
    let bf = BruteForce::new(inst, Execution::default())?;
    Ok(bf.s_points().iter().map(|(x, y)| int_point(x, y)).collect())
}

#[allow(non_snake_case)]
pub fn enumerate_F(inst: &MiblpInstance) -> Result<Vec<Point>, EnumerationError> {
    let bf = BruteForce::new(inst, Execution::default())?;
    Ok(bf.f_points().iter().map(|(x, y)| int_point(x, y)).collect())
}

pub fn optimal_by_enumeration(inst: &MiblpInstance) -> Result<Option<(Point, Rational)>, EnumerationError> {
    Ok(BruteForce::new(inst, Execution::default())?.optimum())
}
