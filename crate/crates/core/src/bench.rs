//! Configuration-matrix runs and performance/baseline/cumulative profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use cpu_time::ThreadTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnc::{solve, SolveStatus, SolverConfig};
use crate::exec::Execution;
use crate::instance::MiblpInstance;

/// Desk-scale threshold for the "every configuration was fast" filter.
pub const DEFAULT_MIN_TIME: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub config: String,
    pub status: String,
    pub objective: f64,
    pub wall_seconds: f64,
    pub cpu_seconds: f64,
    pub nodes: usize,
    pub ifd_seconds: f64,
    pub avg_ifd_seconds: f64,
    pub gap: f64,
}

impl RunRecord {
    /// Optimal, or proven infeasible.
    pub fn solved(&self) -> bool {
        self.status == "Optimal" || self.status == "Infeasible"
    }

    pub fn measure(&self, m: Measure) -> f64 {
        match m {
            Measure::Time => self.wall_seconds,
            Measure::CpuTime => self.cpu_seconds,
            Measure::Nodes => self.nodes as f64,
            Measure::IfdTime => self.ifd_seconds,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Time,
    CpuTime,
    Nodes,
    IfdTime,
}

impl FromStr for Measure {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, ProfileError> {
        match s {
            "time" => Ok(Measure::Time),
            "cpu" => Ok(Measure::CpuTime),
            "nodes" => Ok(Measure::Nodes),
            "ifd-time" => Ok(Measure::IfdTime),
            other => Err(ProfileError::UnknownMeasure(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unknown measure `{0}` (expected time, cpu, nodes or ifd-time)")]
    UnknownMeasure(String),
    #[error("measure missing for {instance}/{config}")]
    MissingMeasure { instance: String, config: String },
    #[error("profiles need at least two configurations, found {0}")]
    TooFewConfigs(usize),
    #[error("baseline configuration `{0}` not present")]
    MissingBaseline(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Step curve: `fraction` of instances at or below each `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    /// Value of the step function at `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.points
            .iter()
            .take_while(|(px, _)| *px <= x)
            .last()
            .map_or(0.0, |(_, y)| *y)
    }

    pub fn to_dat(&self) -> String {
        let mut out = String::new();
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x} {y}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    pub name: String,
    pub curves: Vec<Curve>,
    /// Instances kept after filtering.
    pub instances: Vec<String>,
    /// Per configuration: fraction strictly better and strictly worse than
    /// the baseline (baseline profiles only).
    pub versus_baseline: Vec<(String, f64, f64)>,
}

impl ProfileTable {
    pub fn curve(&self, name: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.name == name)
    }

    /// Writes `profile_<table>_<curve>.dat` files into `dir`.
    pub fn write_dat(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for c in &self.curves {
            let name: String = format!("{}_{}", self.name, c.name)
                .chars()
                .map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' { ch } else { '_' })
                .collect();
            let path = dir.join(format!("profile_{name}.dat"));
            std::fs::write(&path, c.to_dat())?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Filters applied before ratio profiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileFilter {
    /// Drop instances on which every configuration ran below this many
    /// seconds.
    pub min_time: f64,
}

impl Default for ProfileFilter {
    fn default() -> Self {
        Self { min_time: DEFAULT_MIN_TIME }
    }
}

/// Empirical CDF of `values` (with `+inf` censored) over `n` instances.
fn cdf(name: &str, values: &[f64]) -> Curve {
    let n = values.len() as f64;
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, v) in finite.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => points.push((*v, frac)),
        }
    }
    Curve { name: name.to_string(), points }
}

fn ratio(value: f64, reference: f64) -> f64 {
    if value == reference {
        1.0
    } else if reference == 0.0 || reference.is_infinite() && value.is_finite() {
        if reference == 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        value / reference
    }
}

type Grid<'a> = (Vec<String>, Vec<String>, BTreeMap<(String, String), &'a RunRecord>);

fn grid(records: &[RunRecord]) -> Grid<'_> {
    let configs: BTreeSet<String> = records.iter().map(|r| r.config.clone()).collect();
    let mut instances: Vec<String> = Vec::new();
    for r in records {
        if !instances.contains(&r.instance) {
            instances.push(r.instance.clone());
        }
    }
    let map = records
        .iter()
        .map(|r| ((r.instance.clone(), r.config.clone()), r))
        .collect();
    (configs.into_iter().collect(), instances, map)
}

/// Censored measure: `+inf` when unsolved or missing.
fn value(map: &BTreeMap<(String, String), &RunRecord>, inst: &str, cfg: &str, m: Measure) -> Result<f64, ProfileError> {
    match map.get(&(inst.to_string(), cfg.to_string())) {
        None => Ok(f64::INFINITY),
        Some(r) if !r.solved() => Ok(f64::INFINITY),
        Some(r) => {
            let v = r.measure(m);
            if v.is_nan() {
                Err(ProfileError::MissingMeasure {
                    instance: r.instance.clone(),
                    config: r.config.clone(),
                })
            } else {
                Ok(v)
            }
        }
    }
}

/// Instances solved by some configuration and not trivially fast for all.
fn kept_instances(configs: &[String], instances: &[String], map: &BTreeMap<(String, String), &RunRecord>, f: ProfileFilter) -> Vec<String> {
    instances
        .iter()
        .filter(|i| {
            let runs: Vec<&&RunRecord> = configs
                .iter()
                .filter_map(|c| map.get(&((*i).clone(), c.clone())))
                .collect();
            runs.iter().any(|r| r.solved()) && runs.iter().any(|r| r.wall_seconds >= f.min_time)
        })
        .cloned()
        .collect()
}

/// Per configuration, the CDF of measure / virtual best over instances.
pub fn performance_profile(records: &[RunRecord], measure: Measure, filter: ProfileFilter) -> Result<ProfileTable, ProfileError> {
    let (configs, instances, map) = grid(records);
    if configs.len() < 2 {
        return Err(ProfileError::TooFewConfigs(configs.len()));
    }
    let kept = kept_instances(&configs, &instances, &map, filter);
    let mut ratios: BTreeMap<&String, Vec<f64>> = BTreeMap::new();
    for inst in &kept {
        let vals: Vec<f64> = configs
            .iter()
            .map(|c| value(&map, inst, c, measure))
            .collect::<Result<_, _>>()?;
        let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for (c, v) in configs.iter().zip(vals) {
            ratios.entry(c).or_default().push(ratio(v, best));
        }
    }
    Ok(ProfileTable {
        name: "performance".into(),
        curves: configs
            .iter()
            .map(|c| cdf(c, ratios.get(c).map_or(&[][..], |v| v.as_slice())))
            .collect(),
        instances: kept,
        versus_baseline: Vec::new(),
    })
}

/// Per configuration, the CDF of measure / baseline measure.
pub fn baseline_profile(records: &[RunRecord], measure: Measure, baseline: &str, filter: ProfileFilter) -> Result<ProfileTable, ProfileError> {
    let (configs, instances, map) = grid(records);
    if configs.len() < 2 {
        return Err(ProfileError::TooFewConfigs(configs.len()));
    }
    if !configs.iter().any(|c| c == baseline) {
        return Err(ProfileError::MissingBaseline(baseline.to_string()));
    }
    let kept = kept_instances(&configs, &instances, &map, filter);
    let mut curves = Vec::new();
    let mut versus = Vec::new();
    for c in &configs {
        let mut rs = Vec::new();
        for inst in &kept {
            let v = value(&map, inst, c, measure)?;
            let b = value(&map, inst, baseline, measure)?;
            rs.push(if v.is_infinite() && b.is_infinite() { 1.0 } else { ratio(v, b) });
        }
        let n = rs.len().max(1) as f64;
        let better = rs.iter().filter(|r| **r < 1.0).count() as f64 / n;
        let worse = rs.iter().filter(|r| **r > 1.0).count() as f64 / n;
        versus.push((c.clone(), better, worse));
        curves.push(cdf(c, &rs));
    }
    Ok(ProfileTable {
        name: format!("baseline-{baseline}"),
        curves,
        instances: kept,
        versus_baseline: versus,
    })
}

/// Left side: fraction solved by time t. Right side: fraction whose final
/// gap is at most g. At g = 0 the right curve equals the solved fraction,
/// which is where the left curve ends at the time limit.
pub fn cumulative_profile(records: &[RunRecord]) -> ProfileTable {
    let (configs, instances, map) = grid(records);
    let mut curves = Vec::new();
    for c in &configs {
        let runs: Vec<&RunRecord> = instances
            .iter()
            .filter_map(|i| map.get(&(i.clone(), c.clone())).copied())
            .collect();
        let times: Vec<f64> = runs
            .iter()
            .map(|r| if r.solved() { r.wall_seconds } else { f64::INFINITY })
            .collect();
        curves.push(cdf(&format!("{c}:time"), &times));
        let gaps: Vec<f64> = runs.iter().map(|r| if r.solved() { 0.0 } else { r.gap }).collect();
        curves.push(cdf(&format!("{c}:gap"), &gaps));
    }
    ProfileTable {
        name: "cumulative".into(),
        curves,
        instances,
        versus_baseline: Vec::new(),
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("bad configuration name `{name}`: {reason}")]
pub struct ConfigNameError {
    pub name: String,
    pub reason: String,
}

/// Configurations used by `bench` when none are named.
pub const DEFAULT_CONFIGS: [&str; 4] = ["id-milp", "legacy", "id-ls-k2", "id-ls-k2-d10_inf"];

/// Parses a configuration name such as `id-ls-k2-d10_inf-isic`.
///
/// Tokens, separated by `-`: `id` or `legacy` first; then any of `milp`,
/// `milpk`, `ls` (direction method), `k<N>`, `d<lb>_<ub|inf>` (local-search
/// depth window), `isic`, `noidic`, `linking`, `norm1`, `idicobj`,
/// `steepest`.
pub fn config_from_name(name: &str) -> Result<SolverConfig, ConfigNameError> {
    let err = |reason: String| ConfigNameError { name: name.to_string(), reason };
    let mut tokens = name.split('-');
    let mut cfg = SolverConfig::default();
    match tokens.next() {
        Some("id") => {}
        Some("legacy") => cfg.oracle_mode = crate::bnc::OracleMode::Legacy,
        other => return Err(err(format!("expected `id` or `legacy`, found {other:?}"))),
    }
    for t in tokens {
        match t {
            "milp" => cfg.oracle.method = crate::oracle::DirectionMethod::ExactMilp,
            "milpk" => cfg.oracle.method = crate::oracle::DirectionMethod::ExactMilpK,
            "ls" => cfg.oracle.method = crate::oracle::DirectionMethod::LocalSearch,
            "isic" => cfg.cuts.isic = true,
            "noidic" => cfg.cuts.idic = false,
            "linking" => cfg.branching = crate::bnc::BranchStrategy::LinkingPriority,
            "norm1" => cfg.oracle.objective = crate::oracle::ObjectiveKind::Norm1,
            "idicobj" => cfg.oracle.objective = crate::oracle::ObjectiveKind::IdicFriendly,
            "steepest" => cfg.oracle.objective = crate::oracle::ObjectiveKind::Steepest,
            _ if t.starts_with('k') => {
                cfg.oracle.k = t[1..].parse().map_err(|_| err(format!("bad radius `{t}`")))?;
            }
            _ if t.starts_with('d') => {
                let (lb, ub) = t[1..].split_once('_').ok_or_else(|| err(format!("bad depth window `{t}`")))?;
                cfg.oracle.depth_lb = lb.parse().map_err(|_| err(format!("bad depth `{lb}`")))?;
                cfg.oracle.depth_ub = match ub {
                    "inf" => None,
                    v => Some(v.parse().map_err(|_| err(format!("bad depth `{v}`")))?),
                };
            }
            _ => return Err(err(format!("unknown token `{t}`"))),
        }
    }
    Ok(cfg)
}

/// Limits applied to every run of a matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MatrixLimits {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

pub fn run_one(name: &str, inst: &MiblpInstance, cfg_name: &str, cfg: &SolverConfig, limits: MatrixLimits) -> RunRecord {
    let mut cfg = cfg.clone();
    cfg.time_limit = limits.time_limit.or(cfg.time_limit);
    cfg.node_limit = limits.node_limit.or(cfg.node_limit);
    let wall = Instant::now();
    let cpu = ThreadTime::now();
    let res = solve(inst, &cfg);
    let cpu_seconds = cpu.elapsed().as_secs_f64();
    let wall_seconds = wall.elapsed().as_secs_f64();
    match res {
        Ok(r) => RunRecord {
            instance: name.to_string(),
            config: cfg_name.to_string(),
            status: r.status.to_string(),
            objective: r.objective,
            wall_seconds,
            cpu_seconds,
            nodes: r.stats.nodes,
            ifd_seconds: r.stats.ifd_time.as_secs_f64(),
            avg_ifd_seconds: r.stats.avg_ifd_time().as_secs_f64(),
            gap: if r.status == SolveStatus::LimitReached { r.gap.max(f64::MIN_POSITIVE) } else { 0.0 },
        },
        Err(e) => RunRecord {
            instance: name.to_string(),
            config: cfg_name.to_string(),
            status: format!("Error: {e}"),
            objective: f64::NAN,
            wall_seconds,
            cpu_seconds,
            nodes: 0,
            ifd_seconds: 0.0,
            avg_ifd_seconds: 0.0,
            gap: f64::INFINITY,
        },
    }
}

/// Solves every (instance, configuration) pair. Records are appended to
/// `csv_path` as they complete; the returned list is in matrix order.
pub fn run_matrix(
    instances: &[(String, MiblpInstance)],
    configs: &[(String, SolverConfig)],
    limits: MatrixLimits,
    csv_path: Option<&Path>,
    exec: Execution,
) -> io::Result<Vec<RunRecord>> {
    let pairs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..configs.len()).map(move |c| (i, c)))
        .collect();
    let (tx, rx) = mpsc::channel::<RunRecord>();
    std::thread::scope(|scope| {
        let writer = scope.spawn(move || -> io::Result<()> {
            let Some(path) = csv_path else {
                rx.iter().for_each(drop);
                return Ok(());
            };
            let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
            let file = OpenOptions::new().create(true).append(true).open(path)?;
            let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
            for rec in rx {
                w.serialize(&rec).map_err(io::Error::other)?;
                w.flush()?;
            }
            Ok(())
        });
        let records = exec.map(&pairs, |&(i, c)| {
            let (name, inst) = &instances[i];
            let (cname, cfg) = &configs[c];
            let rec = run_one(name, inst, cname, cfg, limits);
            let _ = tx.send(rec.clone());
            rec
        });
        drop(tx);
        writer.join().expect("writer thread panicked")?;
        Ok(records)
    })
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, ProfileError> {
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}
