//! Problem data for mixed-integer bilevel linear programs.
//!
//! Instances are stored with exact rational data. All constraint rows are
//! kept in `>=` form after normalization; `<=` rows are negated and `=` rows
//! are split into a pair of `>=` rows. Variable indices run over the leader
//! block first (`0..n1`) and then the follower block (`n1..n1+n2`), with the
//! integer variables of each block at the front.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::simplex::{self, LpProblem, LpStatus};

pub type Rational = BigRational;

/// Errors raised while reading or constructing an instance.
#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("line {line}: malformed header: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("line {line}: dimension mismatch: {msg}")]
    DimensionMismatch { line: usize, msg: String },
    #[error("line {line}: non-numeric token `{token}`")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: missing section {section}")]
    MissingSection { line: usize, section: String },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("assumption 1 violated: LP relaxation is unbounded in variable {0}")]
    Unbounded(usize),
    #[error("instance generation failed after {0} attempts")]
    GenerationExhausted(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl Sense {
    fn token(self) -> &'static str {
        match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        }
    }
}

/// A normalized constraint `coeffs · (x, y) >= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

impl Row {
    pub fn activity(&self, point: &[Rational]) -> Rational {
        self.coeffs
            .iter()
            .zip(point)
            .fold(Rational::zero(), |acc, (a, p)| acc + a * p)
    }

    pub fn is_satisfied(&self, point: &[Rational]) -> bool {
        self.activity(point) >= self.rhs
    }
}

/// A row as written in a file, before sense normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub coeffs: Vec<Rational>,
    pub sense: Sense,
    pub rhs: Rational,
}

impl RawRow {
    pub fn is_satisfied(&self, point: &[Rational]) -> bool {
        let act = self
            .coeffs
            .iter()
            .zip(point)
            .fold(Rational::zero(), |acc, (a, p)| acc + a * p);
        match self.sense {
            Sense::Ge => act >= self.rhs,
            Sense::Le => act <= self.rhs,
            Sense::Eq => act == self.rhs,
        }
    }

    fn normalize(&self, out: &mut Vec<Row>) {
        let neg = |r: &RawRow| Row {
            coeffs: r.coeffs.iter().map(|c| -c).collect(),
            rhs: -r.rhs.clone(),
        };
        let pos = |r: &RawRow| Row {
            coeffs: r.coeffs.clone(),
            rhs: r.rhs.clone(),
        };
        match self.sense {
            Sense::Ge => out.push(pos(self)),
            Sense::Le => out.push(neg(self)),
            Sense::Eq => {
                out.push(pos(self));
                out.push(neg(self));
            }
        }
    }
}

/// Instance data exactly as read from a file (mixed senses, optional infinite
/// upper bounds).
#[derive(Clone, Debug, PartialEq)]
pub struct RawInstance {
    pub n1: usize,
    pub r1: usize,
    pub n2: usize,
    pub r2: usize,
    pub c: Vec<Rational>,
    pub d1: Vec<Rational>,
    pub d2: Vec<Rational>,
    pub lower_bounds: Vec<Rational>,
    pub upper_bounds: Vec<Option<Rational>>,
    pub upper_rows: Vec<RawRow>,
    pub lower_rows: Vec<RawRow>,
}

/// A validated, normalized bilevel instance.
#[derive(Clone, Debug, PartialEq)]
pub struct MiblpInstance {
    pub n1: usize,
    pub r1: usize,
    pub n2: usize,
    pub r2: usize,
    /// Leader objective on x.
    pub c: Vec<Rational>,
    /// Leader objective on y.
    pub d1: Vec<Rational>,
    /// Follower objective on y.
    pub d2: Vec<Rational>,
    /// Leader rows `A1 x + G1 y >= b1`.
    pub upper_rows: Vec<Row>,
    /// Follower rows `A2 x + G2 y >= b2`.
    pub lower_rows: Vec<Row>,
    pub lower_bounds: Vec<Rational>,
    pub upper_bounds: Vec<Rational>,
}

/// A candidate solution `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Point {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn from_full(full: &[f64], n1: usize) -> Self {
        Self {
            x: full[..n1].to_vec(),
            y: full[n1..].to_vec(),
        }
    }

    pub fn full(&self) -> Vec<f64> {
        self.x.iter().chain(self.y.iter()).copied().collect()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_vec = |v: &[f64]| {
            v.iter()
                .map(|a| format_f64(*a))
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "x=({}) y=({})", fmt_vec(&self.x), fmt_vec(&self.y))
    }
}

pub(crate) fn format_f64(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.6}")
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn rational_from_i64(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn is_integer(r: &Rational) -> bool {
    r.denom().is_one()
}

/// Parses a decimal (`-1.25`), fraction (`3/4`) or integer token.
pub fn parse_rational(token: &str) -> Option<Rational> {
    if let Some((p, q)) = token.split_once('/') {
        let p = BigInt::from_str(p).ok()?;
        let q = BigInt::from_str(q).ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    let (neg, body) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token.strip_prefix('+').unwrap_or(token)),
    };
    if body.is_empty() {
        return None;
    }
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || (int_part.is_empty() && frac_part.is_empty())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(&digits).ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = Rational::new(numer, denom);
    Some(if neg { -r } else { r })
}

fn fmt_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

struct Lines<'a> {
    inner: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let inner = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = l.split_whitespace().collect();
                (!toks.is_empty()).then_some((i + 1, toks))
            })
            .collect();
        Self { inner, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.inner.last().map(|(l, _)| *l).unwrap_or(0)
    }

    fn next_section(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>), InstanceError> {
        match self.inner.get(self.pos) {
            Some((line, toks)) if toks[0] == keyword => {
                self.pos += 1;
                Ok((*line, toks[1..].to_vec()))
            }
            Some((line, _)) => Err(InstanceError::MissingSection {
                line: *line,
                section: keyword.to_string(),
            }),
            None => Err(InstanceError::MissingSection {
                line: self.last_line(),
                section: keyword.to_string(),
            }),
        }
    }

    fn next_line(&mut self, section: &str) -> Result<(usize, Vec<&'a str>), InstanceError> {
        match self.inner.get(self.pos) {
            Some((line, toks)) => {
                self.pos += 1;
                Ok((*line, toks.clone()))
            }
            None => Err(InstanceError::MissingSection {
                line: self.last_line(),
                section: section.to_string(),
            }),
        }
    }
}

fn numbers(line: usize, toks: &[&str], expected: usize, what: &str) -> Result<Vec<Rational>, InstanceError> {
    if toks.len() != expected {
        return Err(InstanceError::DimensionMismatch {
            line,
            msg: format!("{what}: expected {expected} values, found {}", toks.len()),
        });
    }
    toks.iter()
        .map(|t| {
            parse_rational(t).ok_or_else(|| InstanceError::NonNumeric {
                line,
                token: t.to_string(),
            })
        })
        .collect()
}

fn parse_count(line: usize, tok: &str) -> Result<usize, InstanceError> {
    tok.parse::<usize>().map_err(|_| InstanceError::NonNumeric {
        line,
        token: tok.to_string(),
    })
}

fn parse_rows(
    lines: &mut Lines<'_>,
    keyword: &str,
    width: usize,
) -> Result<Vec<RawRow>, InstanceError> {
    let (line, toks) = lines.next_section(keyword)?;
    if toks.len() != 1 {
        return Err(InstanceError::MalformedHeader {
            line,
            msg: format!("{keyword} expects a single row count"),
        });
    }
    let m = parse_count(line, toks[0])?;
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, toks) = lines.next_line(keyword)?;
        if toks.len() != width + 2 {
            return Err(InstanceError::DimensionMismatch {
                line,
                msg: format!(
                    "{keyword} row: expected {width} coefficients, sense and rhs, found {} tokens",
                    toks.len()
                ),
            });
        }
        let coeffs = numbers(line, &toks[..width], width, keyword)?;
        let sense = match toks[width] {
            ">=" => Sense::Ge,
            "<=" => Sense::Le,
            "=" | "==" => Sense::Eq,
            other => {
                return Err(InstanceError::Invalid {
                    line,
                    msg: format!("unknown sense `{other}`"),
                })
            }
        };
        let rhs = numbers(line, &toks[width + 1..], 1, keyword)?.remove(0);
        rows.push(RawRow { coeffs, sense, rhs });
    }
    Ok(rows)
}

impl RawInstance {
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let mut lines = Lines::new(text);
        let (line, toks) = lines.next_section("MIBLP")?;
        if toks != ["1"] {
            return Err(InstanceError::MalformedHeader {
                line,
                msg: "expected `MIBLP 1`".into(),
            });
        }
        let (line, toks) = lines.next_section("VARS")?;
        if toks.len() != 4 {
            return Err(InstanceError::MalformedHeader {
                line,
                msg: "expected `VARS n1 r1 n2 r2`".into(),
            });
        }
        let dims: Vec<usize> = toks
            .iter()
            .map(|t| parse_count(line, t))
            .collect::<Result<_, _>>()?;
        let (n1, r1, n2, r2) = (dims[0], dims[1], dims[2], dims[3]);
        if r1 > n1 || r2 > n2 {
            return Err(InstanceError::DimensionMismatch {
                line,
                msg: "integer counts exceed variable counts".into(),
            });
        }
        let n = n1 + n2;

        let (line, toks) = lines.next_section("OBJ_UPPER")?;
        let mut upper_obj = numbers(line, &toks, n, "OBJ_UPPER")?;
        let d1 = upper_obj.split_off(n1);
        let c = upper_obj;
        let (line, toks) = lines.next_section("OBJ_LOWER")?;
        let d2 = numbers(line, &toks, n2, "OBJ_LOWER")?;

        let (line, toks) = lines.next_section("BOUNDS")?;
        if toks.len() != 2 * n {
            return Err(InstanceError::DimensionMismatch {
                line,
                msg: format!("BOUNDS: expected {} values, found {}", 2 * n, toks.len()),
            });
        }
        let mut lower_bounds = Vec::with_capacity(n);
        let mut upper_bounds = Vec::with_capacity(n);
        for pair in toks.chunks(2) {
            let lo = numbers(line, &pair[..1], 1, "BOUNDS")?.remove(0);
            let hi = match pair[1] {
                "inf" | "+inf" | "infinity" => None,
                t => Some(numbers(line, &[t], 1, "BOUNDS")?.remove(0)),
            };
            if let Some(h) = &hi {
                if h < &lo {
                    return Err(InstanceError::Invalid {
                        line,
                        msg: "upper bound below lower bound".into(),
                    });
                }
            }
            lower_bounds.push(lo);
            upper_bounds.push(hi);
        }

        let upper_rows = parse_rows(&mut lines, "UPPER", n)?;
        let lower_rows = parse_rows(&mut lines, "LOWER", n)?;
        if let Some((line, toks)) = lines.inner.get(lines.pos) {
            return Err(InstanceError::Invalid {
                line: *line,
                msg: format!("unexpected trailing content `{}`", toks.join(" ")),
            });
        }
        Ok(Self {
            n1,
            r1,
            n2,
            r2,
            c,
            d1,
            d2,
            lower_bounds,
            upper_bounds,
            upper_rows,
            lower_rows,
        })
    }

    /// Normalizes row senses and replaces infinite upper bounds by the
    /// (rounded) LP maximum of the variable over the relaxation.
    pub fn normalize(&self) -> Result<MiblpInstance, InstanceError> {
        let mut upper_rows = Vec::new();
        self.upper_rows.iter().for_each(|r| r.normalize(&mut upper_rows));
        let mut lower_rows = Vec::new();
        self.lower_rows.iter().for_each(|r| r.normalize(&mut lower_rows));
        let mut inst = MiblpInstance {
            n1: self.n1,
            r1: self.r1,
            n2: self.n2,
            r2: self.r2,
            c: self.c.clone(),
            d1: self.d1.clone(),
            d2: self.d2.clone(),
            upper_rows,
            lower_rows,
            lower_bounds: self.lower_bounds.clone(),
            upper_bounds: self
                .upper_bounds
                .iter()
                .map(|u| u.clone().unwrap_or_else(Rational::zero))
                .collect(),
        };
        let open: Vec<usize> = (0..inst.num_vars())
            .filter(|&j| self.upper_bounds[j].is_none())
            .collect();
        if open.is_empty() {
            return Ok(inst);
        }
        let mut lp = inst.lp_relaxation();
        for &j in &open {
            lp.upper[j] = f64::INFINITY;
        }
        for &j in &open {
            let mut obj = vec![0.0; inst.num_vars()];
            obj[j] = -1.0;
            lp.objective = obj;
            let sol = simplex::solve_lp(&lp);
            let max = match sol.status {
                LpStatus::Optimal => -sol.objective,
                // An empty relaxation: any finite bound keeps it empty.
                LpStatus::Infeasible => to_f64(&inst.lower_bounds[j]),
                _ => return Err(InstanceError::Unbounded(j)),
            };
            let rounded = if inst.is_integer_var(j) {
                (max + 1e-6).floor()
            } else {
                (max - 1e-9).ceil()
            };
            let lo = to_f64(&inst.lower_bounds[j]);
            let bound = Rational::from_float(rounded.max(lo)).unwrap_or_else(Rational::zero);
            inst.upper_bounds[j] = bound;
        }
        Ok(inst)
    }
}

/// Parses and normalizes an instance file.
pub fn parse_instance(text: &str) -> Result<MiblpInstance, InstanceError> {
    RawInstance::parse(text)?.normalize()
}

/// Serializes a normalized instance in the plain-text format.
pub fn write_instance(inst: &MiblpInstance) -> String {
    let mut out = String::new();
    let join = |v: &[Rational]| v.iter().map(fmt_rational).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "MIBLP 1");
    let _ = writeln!(out, "VARS {} {} {} {}", inst.n1, inst.r1, inst.n2, inst.r2);
    let _ = writeln!(out, "OBJ_UPPER {} {}", join(&inst.c), join(&inst.d1));
    let _ = writeln!(out, "OBJ_LOWER {}", join(&inst.d2));
    let bounds: Vec<String> = inst
        .lower_bounds
        .iter()
        .zip(&inst.upper_bounds)
        .map(|(l, u)| format!("{} {}", fmt_rational(l), fmt_rational(u)))
        .collect();
    let _ = writeln!(out, "BOUNDS {}", bounds.join(" "));
    for (name, rows) in [("UPPER", &inst.upper_rows), ("LOWER", &inst.lower_rows)] {
        let _ = writeln!(out, "{name} {}", rows.len());
        for r in rows {
            let _ = writeln!(out, "{} {} {}", join(&r.coeffs), Sense::Ge.token(), fmt_rational(&r.rhs));
        }
    }
    out
}

impl fmt::Display for MiblpInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_instance(self))
    }
}

/// Float copy of the instance matrices used by the numeric solvers.
#[derive(Clone, Debug)]
pub struct NumericData {
    pub a2: Vec<Vec<f64>>,
    pub g2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub d2: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl NumericData {
    pub fn y_lower(&self, n1: usize) -> &[f64] {
        &self.lower[n1..]
    }

    pub fn y_upper(&self, n1: usize) -> &[f64] {
        &self.upper[n1..]
    }
}

/// Outcome of checking the standing assumptions on an instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// The LP relaxation is bounded.
    pub bounded: bool,
    /// The LP relaxation is empty (reported, not a failure).
    pub relaxation_empty: bool,
    /// Linking variables are integer.
    pub linking_integer: bool,
    /// Follower data is integral.
    pub follower_data_integral: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    /// Solver entry points require the first two assumptions.
    pub fn solvable(&self) -> bool {
        self.bounded && self.linking_integer
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(f, "assumption 1 (bounded relaxation): {}", mark(self.bounded))?;
        writeln!(f, "assumption 2 (integer linking variables): {}", mark(self.linking_integer))?;
        writeln!(f, "assumption 3 (integral follower data): {}", mark(self.follower_data_integral))?;
        for m in &self.messages {
            writeln!(f, "  {m}")?;
        }
        Ok(())
    }
}

impl MiblpInstance {
    pub fn num_vars(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn m1(&self) -> usize {
        self.upper_rows.len()
    }

    pub fn m2(&self) -> usize {
        self.lower_rows.len()
    }

    /// Whether full-space variable `j` is integer constrained.
    pub fn is_integer_var(&self, j: usize) -> bool {
        if j < self.n1 {
            j < self.r1
        } else {
            j - self.n1 < self.r2
        }
    }

    pub fn integer_vars(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&j| self.is_integer_var(j)).collect()
    }

    pub fn is_pure_integer(&self) -> bool {
        self.r1 == self.n1 && self.r2 == self.n2
    }

    /// Leader variables with a nonzero coefficient in some follower row.
    pub fn linking_vars(&self) -> Vec<usize> {
        (0..self.n1)
            .filter(|&j| self.lower_rows.iter().any(|r| !r.coeffs[j].is_zero()))
            .collect()
    }

    pub fn all_rows(&self) -> impl Iterator<Item = &Row> {
        self.upper_rows.iter().chain(self.lower_rows.iter())
    }

    pub fn numeric(&self) -> NumericData {
        let conv = |v: &[Rational]| v.iter().map(to_f64).collect::<Vec<_>>();
        NumericData {
            a2: self.lower_rows.iter().map(|r| conv(&r.coeffs[..self.n1])).collect(),
            g2: self.lower_rows.iter().map(|r| conv(&r.coeffs[self.n1..])).collect(),
            b2: self.lower_rows.iter().map(|r| to_f64(&r.rhs)).collect(),
            d2: conv(&self.d2),
            lower: conv(&self.lower_bounds),
            upper: conv(&self.upper_bounds),
        }
    }

    /// Leader objective in full space.
    pub fn leader_objective(&self) -> Vec<f64> {
        self.c.iter().chain(self.d1.iter()).map(to_f64).collect()
    }

    pub fn leader_value(&self, p: &Point) -> f64 {
        self.leader_objective()
            .iter()
            .zip(p.x.iter().chain(p.y.iter()))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// The LP relaxation `P` (leader and follower rows, variable bounds) with
    /// a zero objective.
    pub fn lp_relaxation(&self) -> LpProblem {
        let n = self.num_vars();
        let rows: Vec<Vec<f64>> = self
            .all_rows()
            .map(|r| r.coeffs.iter().map(to_f64).collect())
            .collect();
        let rhs = self.all_rows().map(|r| to_f64(&r.rhs)).collect();
        LpProblem {
            objective: vec![0.0; n],
            rows,
            rhs,
            lower: self.lower_bounds.iter().map(to_f64).collect(),
            upper: self.upper_bounds.iter().map(to_f64).collect(),
        }
    }

    /// Relaxation used for follower-range computations: bounds, follower rows
    /// and the leader rows that do not involve follower variables.
    pub fn follower_range_relaxation(&self) -> LpProblem {
        let mut lp = self.lp_relaxation();
        lp.rows.clear();
        lp.rhs.clear();
        let keep = self
            .upper_rows
            .iter()
            .filter(|r| r.coeffs[self.n1..].iter().all(|c| c.is_zero()))
            .chain(self.lower_rows.iter());
        for r in keep {
            lp.rows.push(r.coeffs.iter().map(to_f64).collect());
            lp.rhs.push(to_f64(&r.rhs));
        }
        lp
    }

    /// Free-set relaxation margin: 1 when follower data is integral, else a
    /// small epsilon.
    pub fn free_set_margin(&self) -> f64 {
        if self.follower_data_integral() {
            1.0
        } else {
            FALLBACK_MARGIN
        }
    }

    pub fn follower_data_integral(&self) -> bool {
        self.lower_rows
            .iter()
            .all(|r| is_integer(&r.rhs) && r.coeffs.iter().all(is_integer))
            && self.d2.iter().all(is_integer)
    }

    pub fn validate_assumptions(&self) -> ValidationReport {
        let mut messages = Vec::new();
        let mut lp = self.lp_relaxation();
        let n = self.num_vars();
        let mut bounded = true;
        let mut relaxation_empty = false;
        'outer: for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut obj = vec![0.0; n];
                obj[j] = sign;
                lp.objective = obj;
                match simplex::solve_lp(&lp).status {
                    LpStatus::Optimal => {}
                    LpStatus::Infeasible => {
                        relaxation_empty = true;
                        messages.push("LP relaxation is empty".into());
                        break 'outer;
                    }
                    status => {
                        bounded = false;
                        messages.push(format!("variable {j}: {status:?} extremum over P"));
                    }
                }
            }
        }
        let linking_integer = self.linking_vars().into_iter().all(|j| j < self.r1);
        if !linking_integer {
            messages.push("a continuous leader variable appears in the follower rows".into());
        }
        let follower_data_integral = self.follower_data_integral();
        if !follower_data_integral {
            messages.push(format!(
                "non-integral follower data; free sets use margin {FALLBACK_MARGIN}"
            ));
        }
        ValidationReport {
            bounded,
            relaxation_empty,
            linking_integer,
            follower_data_integral,
            messages,
        }
    }

    /// Exact membership of a rational point in `P`.
    pub fn in_relaxation_exact(&self, full: &[Rational]) -> bool {
        full.iter()
            .zip(self.lower_bounds.iter().zip(&self.upper_bounds))
            .all(|(v, (l, u))| v >= l && v <= u)
            && self.all_rows().all(|r| r.is_satisfied(full))
    }
}

pub const FALLBACK_MARGIN: f64 = 1e-4;

/// Parameters of the seeded random generator.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    pub coeff_range: (i64, i64),
    pub bound: i64,
}

const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Draws a pure-integer instance whose all-zeros point satisfies at least
/// half of the follower rows.
pub fn generate_random_instance(p: &GeneratorParams) -> Result<MiblpInstance, InstanceError> {
    assert!(p.bound >= 1, "bound must be at least 1");
    assert!(p.coeff_range.0 <= p.coeff_range.1, "empty coefficient range");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.n1 + p.n2;
    let (lo, hi) = p.coeff_range;
    let draw = |rng: &mut ChaCha8Rng, k: usize| -> Vec<Rational> {
        (0..k).map(|_| rational_from_i64(rng.gen_range(lo..=hi))).collect()
    };
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let c = draw(&mut rng, p.n1);
        let d1 = draw(&mut rng, p.n2);
        let d2 = draw(&mut rng, p.n2);
        let rows = |rng: &mut ChaCha8Rng, m: usize| -> Vec<Row> {
            (0..m)
                .map(|_| {
                    let coeffs = draw(rng, n);
                    let rhs = draw(rng, 1).remove(0);
                    Row { coeffs, rhs }
                })
                .collect()
        };
        let upper_rows = rows(&mut rng, p.m1);
        let lower_rows = rows(&mut rng, p.m2);
        let satisfied = lower_rows.iter().filter(|r| r.rhs <= Rational::zero()).count();
        if 2 * satisfied < p.m2 {
            continue;
        }
        return Ok(MiblpInstance {
            n1: p.n1,
            r1: p.n1,
            n2: p.n2,
            r2: p.n2,
            c,
            d1,
            d2,
            upper_rows,
            lower_rows,
            lower_bounds: vec![Rational::zero(); n],
            upper_bounds: vec![rational_from_i64(p.bound); n],
        });
    }
    Err(InstanceError::GenerationExhausted(MAX_GENERATION_ATTEMPTS))
}

/// Integer vector of an exactly-integral rational vector.
pub fn as_integers(v: &[Rational]) -> Option<Vec<i64>> {
    v.iter()
        .map(|r| if is_integer(r) { r.numer().to_i64() } else { None })
        .collect()
}
