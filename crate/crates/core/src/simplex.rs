//! Dense bounded-variable primal simplex.
//!
//! Rows are `a·x >= b`. Each row gets a surplus `s_i = a_i·x - b_i >= 0` and
//! an artificial used only in phase one. Variable bounds are handled
//! natively: nonbasic variables sit at their lower or upper bound. The basis
//! inverse is kept explicitly and refreshed every [`REFACTOR_INTERVAL`]
//! pivots.

const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_INTERVAL: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    /// Minimized.
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    /// May be `+inf`.
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericallyUnstable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Status of each structural variable followed by each row surplus.
    pub basis: Vec<VarStatus>,
    /// Basic variable per row (structural `j`, surplus `n + i`, artificial
    /// `n + m + i`).
    pub basic_vars: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            basis: vec![VarStatus::AtLower; n + m],
            basic_vars: Vec::new(),
            iterations,
        }
    }
}

/// Dense Gauss-Jordan inverse with partial pivoting. `None` when singular.
pub(crate) fn invert(mat: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = mat
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-11 * scale {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for v in inv[col].iter_mut() {
            *v /= p;
        }
        for r in 0..m {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for k in 0..m {
                        a[r][k] -= f * a[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    Some(inv)
}

struct Simplex<'a> {
    p: &'a LpProblem,
    n: usize,
    m: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    /// Current value of every variable.
    value: Vec<f64>,
    status: Vec<VarStatus>,
    basic: Vec<usize>,
    binv: Vec<Vec<f64>>,
    pivots_since_refactor: usize,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

enum Step {
    Optimal,
    Unbounded,
    Unstable,
    Continue,
}

impl<'a> Simplex<'a> {
    fn total(&self) -> usize {
        self.n + 2 * self.m
    }

    /// Entry `i` of column `j` of `[A | -I | I]`.
    fn column(&self, j: usize) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        if j < n {
            self.p.rows.iter().map(|r| r[j]).collect()
        } else if j < n + m {
            let mut c = vec![0.0; m];
            c[j - n] = -1.0;
            c
        } else {
            let mut c = vec![0.0; m];
            c[j - n - m] = 1.0;
            c
        }
    }

    fn binv_times(&self, col: &[f64]) -> Vec<f64> {
        self.binv
            .iter()
            .map(|row| row.iter().zip(col).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        let cols: Vec<Vec<f64>> = self.basic.iter().map(|&j| self.column(j)).collect();
        // basis matrix B[i][k] = column k entry i
        let bmat: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|k| cols[k][i]).collect()).collect();
        match invert(&bmat) {
            Some(inv) => {
                self.binv = inv;
                self.pivots_since_refactor = 0;
                self.recompute_basic_values();
                true
            }
            None => false,
        }
    }

    fn recompute_basic_values(&mut self) {
        let (n, m) = (self.n, self.m);
        // B x_B = b - N x_N
        let mut r = self.p.rhs.clone();
        for j in 0..self.total() {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.value[j];
            if v == 0.0 {
                continue;
            }
            if j < n {
                for (i, row) in self.p.rows.iter().enumerate() {
                    r[i] -= row[j] * v;
                }
            } else if j < n + m {
                r[j - n] += v;
            } else {
                r[j - n - m] -= v;
            }
        }
        let xb = self.binv_times(&r);
        for (k, &j) in self.basic.clone().iter().enumerate() {
            self.value[j] = xb[k];
        }
    }

    fn new(p: &'a LpProblem) -> Self {
        let n = p.num_vars();
        let m = p.num_rows();
        let total = n + 2 * m;
        let mut lower = vec![0.0; total];
        let mut upper = vec![f64::INFINITY; total];
        lower[..n].copy_from_slice(&p.lower);
        upper[..n].copy_from_slice(&p.upper);
        let mut value = vec![0.0; total];
        let mut status = vec![VarStatus::AtLower; total];
        value[..n].copy_from_slice(&p.lower);
        let mut basic = Vec::with_capacity(m);
        let mut binv = vec![vec![0.0; m]; m];
        let mut cost = vec![0.0; total];
        for i in 0..m {
            let act: f64 = p.rows[i].iter().zip(&p.lower).map(|(a, b)| a * b).sum();
            let resid = p.rhs[i] - act;
            if resid <= 0.0 {
                basic.push(n + i);
                status[n + i] = VarStatus::Basic;
                value[n + i] = -resid;
                binv[i][i] = -1.0;
                upper[n + m + i] = 0.0;
            } else {
                basic.push(n + m + i);
                status[n + m + i] = VarStatus::Basic;
                value[n + m + i] = resid;
                binv[i][i] = 1.0;
                cost[n + m + i] = 1.0;
            }
        }
        Self {
            p,
            n,
            m,
            lower,
            upper,
            cost,
            value,
            status,
            basic,
            binv,
            pivots_since_refactor: 0,
            iterations: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    fn iterate(&mut self, phase_one: bool) -> Step {
        let (n, m) = (self.n, self.m);
        // duals pi = c_B B^-1
        let mut pi = vec![0.0; m];
        for (k, &j) in self.basic.iter().enumerate() {
            let cb = self.cost[j];
            if cb != 0.0 {
                for (i, v) in pi.iter_mut().enumerate() {
                    *v += cb * self.binv[k][i];
                }
            }
        }
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..self.total() {
            let st = self.status[j];
            if st == VarStatus::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            if !phase_one && self.is_artificial(j) {
                continue;
            }
            let d = if j < n {
                self.cost[j] - self.p.rows.iter().zip(&pi).map(|(r, p)| r[j] * p).sum::<f64>()
            } else if j < n + m {
                self.cost[j] + pi[j - n]
            } else {
                self.cost[j] - pi[j - n - m]
            };
            let improving = match st {
                VarStatus::AtLower => d < -OPT_TOL,
                VarStatus::AtUpper => d > OPT_TOL,
                VarStatus::Basic => false,
            };
            if !improving {
                continue;
            }
            if self.bland {
                entering = Some((j, d));
                break;
            }
            if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                entering = Some((j, d));
            }
        }
        let Some((q, _)) = entering else {
            return Step::Optimal;
        };
        let sigma = if self.status[q] == VarStatus::AtLower { 1.0 } else { -1.0 };
        let alpha = self.binv_times(&self.column(q));

        // ratio test: x_B changes by -theta * sigma * alpha
        let flip = self.upper[q] - self.lower[q];
        let mut best: Option<(usize, VarStatus, f64)> = None;
        for (k, &j) in self.basic.iter().enumerate() {
            let delta = -sigma * alpha[k];
            let (limit, side) = if delta < -PIVOT_TOL {
                ((self.value[j] - self.lower[j]) / -delta, VarStatus::AtLower)
            } else if delta > PIVOT_TOL {
                ((self.upper[j] - self.value[j]) / delta, VarStatus::AtUpper)
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            let replace = match best {
                None => true,
                Some((bk, _, bl)) => {
                    limit < bl - 1e-12 || (limit <= bl + 1e-12 && j < self.basic[bk])
                }
            };
            if replace {
                best = Some((k, side, limit));
            }
        }
        let (theta, leave) = match best {
            Some((k, side, limit)) if limit < flip => (limit, Some((k, side))),
            _ => (flip, None),
        };
        if theta.is_infinite() {
            return Step::Unbounded;
        }
        self.iterations += 1;
        if theta < 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run > 3 * (m + n) {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        // move
        self.value[q] += sigma * theta;
        for (k, &j) in self.basic.iter().enumerate() {
            self.value[j] -= sigma * theta * alpha[k];
        }
        match leave {
            None => {
                // bound flip
                self.status[q] = if sigma > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.value[q] = if sigma > 0.0 { self.upper[q] } else { self.lower[q] };
            }
            Some((r, side)) => {
                let leaving = self.basic[r];
                self.status[leaving] = side;
                self.value[leaving] = if side == VarStatus::AtLower {
                    self.lower[leaving]
                } else {
                    self.upper[leaving]
                };
                self.pivot(r, q, &alpha);
                if self.pivots_since_refactor >= REFACTOR_INTERVAL && !self.refactor() {
                    return Step::Unstable;
                }
            }
        }
        Step::Continue
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let row_r: Vec<f64> = self.binv[r].iter().map(|v| v / piv).collect();
        for k in 0..m {
            if k == r {
                continue;
            }
            let f = alpha[k];
            if f != 0.0 {
                for (v, rr) in self.binv[k].iter_mut().zip(&row_r) {
                    *v -= f * rr;
                }
            }
        }
        self.binv[r] = row_r;
        self.basic[r] = q;
        self.status[q] = VarStatus::Basic;
        self.pivots_since_refactor += 1;
    }

    fn run(&mut self, phase_one: bool, max_iter: usize) -> Result<bool, LpStatus> {
        loop {
            if self.iterations > max_iter {
                return Err(LpStatus::NumericallyUnstable);
            }
            match self.iterate(phase_one) {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Unstable => return Err(LpStatus::NumericallyUnstable),
                Step::Continue => {}
            }
        }
    }

    /// Pivots zero-valued artificials out of the basis where possible.
    fn drive_out_artificials(&mut self) {
        let (n, m) = (self.n, self.m);
        for r in 0..m {
            let j = self.basic[r];
            if !self.is_artificial(j) {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for q in 0..n + m {
                if self.status[q] == VarStatus::Basic {
                    continue;
                }
                let a = if q < n {
                    self.p.rows.iter().zip(&self.binv[r]).map(|(row, b)| row[q] * b).sum::<f64>()
                } else {
                    -self.binv[r][q - n]
                };
                if a.abs() > 1e-7 && best.is_none_or(|(_, b)| a.abs() > b.abs()) {
                    best = Some((q, a));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.binv_times(&self.column(q));
                self.status[j] = VarStatus::AtLower;
                self.value[j] = 0.0;
                self.pivot(r, q, &alpha);
            }
        }
    }
}

/// Solves `min c·x s.t. rows·x >= rhs, lower <= x <= upper`.
pub fn solve_lp(p: &LpProblem) -> LpSolution {
    let n = p.num_vars();
    let m = p.num_rows();
    if p.lower.iter().any(|l| !l.is_finite()) {
        return LpSolution::failed(LpStatus::NumericallyUnstable, n, m, 0);
    }
    if p.lower.iter().zip(&p.upper).any(|(l, u)| l > u) {
        return LpSolution::failed(LpStatus::Infeasible, n, m, 0);
    }
    let max_iter = 20_000 + 200 * (n + m);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let result = solve_once(p, max_iter);
        match result.status {
            LpStatus::NumericallyUnstable if attempt < 2 => continue,
            _ => return result,
        }
    }
}

fn solve_once(p: &LpProblem, max_iter: usize) -> LpSolution {
    let n = p.num_vars();
    let m = p.num_rows();
    let mut s = Simplex::new(p);
    let needs_phase_one = s.basic.iter().any(|&j| s.is_artificial(j));
    if needs_phase_one {
        match s.run(true, max_iter) {
            Ok(_) => {}
            Err(st) => return LpSolution::failed(st, n, m, s.iterations),
        }
        if !s.refactor() {
            return LpSolution::failed(LpStatus::NumericallyUnstable, n, m, s.iterations);
        }
        let infeas: f64 = (n + m..n + 2 * m).map(|j| s.value[j].max(0.0)).sum();
        let scale = 1.0 + p.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > 1e-8 * scale {
            return LpSolution::failed(LpStatus::Infeasible, n, m, s.iterations);
        }
        for j in n + m..n + 2 * m {
            s.upper[j] = 0.0;
            s.cost[j] = 0.0;
            if s.status[j] != VarStatus::Basic {
                s.value[j] = 0.0;
                s.status[j] = VarStatus::AtLower;
            }
        }
        s.drive_out_artificials();
        s.degenerate_run = 0;
        s.bland = false;
    }
    s.cost[..n].copy_from_slice(&p.objective);
    match s.run(false, max_iter) {
        Ok(true) => {}
        Ok(false) => return LpSolution::failed(LpStatus::Unbounded, n, m, s.iterations),
        Err(st) => return LpSolution::failed(st, n, m, s.iterations),
    }
    if !s.refactor() {
        return LpSolution::failed(LpStatus::NumericallyUnstable, n, m, s.iterations);
    }
    let mut x: Vec<f64> = s.value[..n].to_vec();
    for j in 0..n {
        // snap tiny bound violations
        x[j] = x[j].clamp(p.lower[j], p.upper[j]);
    }
    // certify primal feasibility
    let scale = 1.0 + x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for (row, rhs) in p.rows.iter().zip(&p.rhs) {
        let act: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        if act < rhs - 1e-7 * scale {
            return LpSolution::failed(LpStatus::NumericallyUnstable, n, m, s.iterations);
        }
    }
    let objective = p.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
    let basis = s.status[..n + m].to_vec();
    LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        basis,
        basic_vars: s.basic.clone(),
        iterations: s.iterations,
    }
}

/// Error returned when a basis does not define a usable cone.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConeError {
    #[error("solution is not optimal")]
    NotOptimal,
    #[error("degenerate cone: basis does not yield independent rays")]
    Degenerate,
}

/// Which constraint a cone ray moves away from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TightConstraint {
    Lower(usize),
    Upper(usize),
    Row(usize),
}

/// A simplicial cone `vertex + cone(rays)` from an LP basis.
#[derive(Clone, Debug)]
pub struct SimplicialCone {
    pub vertex: Vec<f64>,
    pub rays: Vec<Vec<f64>>,
    /// The nonbasic constraint relaxed by each ray.
    pub tight: Vec<TightConstraint>,
}

/// Builds the LP-basis cone at an optimal basic solution: one ray per
/// nonbasic structural or surplus variable.
pub fn extract_cone(p: &LpProblem, s: &LpSolution) -> Result<SimplicialCone, ConeError> {
    if s.status != LpStatus::Optimal {
        return Err(ConeError::NotOptimal);
    }
    let n = p.num_vars();
    let m = p.num_rows();
    if s.basic_vars.iter().any(|&j| j >= n + m) {
        return Err(ConeError::Degenerate);
    }
    let column = |j: usize| -> Vec<f64> {
        if j < n {
            p.rows.iter().map(|r| r[j]).collect()
        } else {
            let mut c = vec![0.0; m];
            c[j - n] = -1.0;
            c
        }
    };
    let bmat: Vec<Vec<f64>> = (0..m)
        .map(|i| s.basic_vars.iter().map(|&j| column(j)[i]).collect())
        .collect();
    let binv = invert(&bmat).ok_or(ConeError::Degenerate)?;
    let mut rays = Vec::with_capacity(n);
    let mut tight = Vec::with_capacity(n);
    for q in 0..n + m {
        let st = s.basis[q];
        if st == VarStatus::Basic {
            continue;
        }
        let sigma = if st == VarStatus::AtLower { 1.0 } else { -1.0 };
        let col = column(q);
        let alpha: Vec<f64> = binv
            .iter()
            .map(|row| row.iter().zip(&col).map(|(a, b)| a * b).sum())
            .collect();
        let mut ray = vec![0.0; n];
        if q < n {
            ray[q] = sigma;
        }
        for (k, &j) in s.basic_vars.iter().enumerate() {
            if j < n {
                ray[j] -= sigma * alpha[k];
            }
        }
        for v in ray.iter_mut() {
            if v.abs() < 1e-13 {
                *v = 0.0;
            }
        }
        rays.push(ray);
        tight.push(if q >= n {
            TightConstraint::Row(q - n)
        } else if st == VarStatus::AtLower {
            TightConstraint::Lower(q)
        } else {
            TightConstraint::Upper(q)
        });
    }
    if rays.len() != n {
        return Err(ConeError::Degenerate);
    }
    // rank check: the ray matrix must be invertible
    if n > 0 {
        let mat: Vec<Vec<f64>> = (0..n).map(|i| rays.iter().map(|r| r[i]).collect()).collect();
        if invert(&mat).is_none() {
            return Err(ConeError::Degenerate);
        }
    }
    Ok(SimplicialCone {
        vertex: s.x.clone(),
        rays,
        tight,
    })
}
