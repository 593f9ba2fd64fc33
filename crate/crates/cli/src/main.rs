use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use idbc::bench::{
    baseline_profile, config_from_name, cumulative_profile, performance_profile, read_records, run_matrix, MatrixLimits,
    Measure, ProfileFilter, DEFAULT_CONFIGS, DEFAULT_MIN_TIME,
};
use idbc::bnc::{solve, BranchStrategy, CutFamilies, OracleMode, SolverConfig};
use idbc::exec::Execution;
use idbc::instance::{generate_random_instance, parse_instance, write_instance, GeneratorParams, MiblpInstance, Point};
use idbc::kopt::{enumerate_Fk, slice_csv, KoptContext};
use idbc::lattice::point_to_ints;
use idbc::oracle::{DirectionMethod, ObjectiveKind, OracleConfig, OracleContext, OracleOutcome};
use idbc::suite::suite_instance;
use idbc::verify::verify_instance;

#[derive(Parser)]
#[command(name = "idbc", version, about = "Branch-and-cut for mixed-integer bilevel linear problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance.
    Solve(SolveArgs),
    /// Query the improving-direction oracle at a point.
    Oracle(OracleArgs),
    /// Enumerate F(k) or print a follower slice with k-opt levels.
    Kopt(KoptArgs),
    /// Check the solver and oracles against exhaustive enumeration.
    Verify { file: PathBuf },
    /// Write a seeded random pure-integer instance.
    Gen(GenArgs),
    /// Run a configuration matrix and append results to a CSV file.
    Bench(BenchArgs),
    /// Build profile data from a results CSV.
    Profile(ProfileArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleFlag {
    Id,
    Legacy,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodFlag {
    Milp,
    MilpK,
    LocalSearch,
}

#[derive(Clone, Copy, ValueEnum)]
enum CutFlag {
    Idic,
    Isic,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchFlag {
    Fractional,
    Linking,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjFlag {
    Norm1,
    Idic,
    Steepest,
}

#[derive(Args)]
struct DirectionArgs {
    #[arg(long, value_enum, default_value = "milp")]
    direction_method: MethodFlag,
    /// Neighborhood radius for milp-k and local-search.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "norm1")]
    obj: ObjFlag,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "id")]
    oracle: OracleFlag,
    #[command(flatten)]
    direction: DirectionArgs,
    #[arg(long, default_value_t = 0)]
    ls_depth_lb: usize,
    /// Integer or `inf`.
    #[arg(long, default_value = "inf")]
    ls_depth_ub: String,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "idic")]
    cuts: Vec<CutFlag>,
    #[arg(long, value_enum, default_value = "fractional")]
    branch: BranchFlag,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the node log to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    file: PathBuf,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    y: Vec<f64>,
    #[command(flatten)]
    direction: DirectionArgs,
}

#[derive(Args)]
struct KoptArgs {
    file: PathBuf,
    #[arg(long)]
    k: u64,
    /// Print the follower slice at a leader decision, e.g. `x=1` or `x=1,2`.
    #[arg(long)]
    slice: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Use the verification-suite parameters for this seed.
    #[arg(long)]
    suite: bool,
    #[arg(long, default_value_t = 2)]
    n1: usize,
    #[arg(long, default_value_t = 2)]
    n2: usize,
    #[arg(long, default_value_t = 0)]
    m1: usize,
    #[arg(long, default_value_t = 3)]
    m2: usize,
    #[arg(long, default_value_t = 5, allow_negative_numbers = true)]
    coeff_max: i64,
    #[arg(long, default_value_t = 5)]
    bound: i64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files; when empty, `--generate` instances are used.
    files: Vec<PathBuf>,
    /// Number of generated suite instances.
    #[arg(long, default_value_t = 30)]
    generate: u64,
    /// First seed of the generated instances.
    #[arg(long, default_value_t = 1001)]
    seed: u64,
    /// Configuration names, e.g. `id-milp,legacy,id-ls-k2-d10_inf`.
    #[arg(long, value_delimiter = ',')]
    configs: Vec<String>,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(short, long, default_value = "results.csv")]
    output: PathBuf,
    /// Run solves one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ProfileArgs {
    results: PathBuf,
    /// time, cpu, nodes or ifd-time.
    #[arg(long, default_value = "time")]
    measure: String,
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MIN_TIME)]
    min_time: f64,
    #[arg(short, long, default_value = "profiles")]
    output_dir: PathBuf,
}

/// Runtime failure with an exit code.
struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(1, e.to_string())
    }
}

fn usage_error(msg: String) -> ! {
    Cli::command().error(ErrorKind::ArgumentConflict, msg).exit()
}

fn load(path: &Path) -> Result<MiblpInstance, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(2, format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| Failure(1, format!("{}: {e}", path.display())))
}

fn oracle_config(d: &DirectionArgs, depth_lb: usize, depth_ub: Option<usize>) -> OracleConfig {
    let method = match d.direction_method {
        MethodFlag::Milp => DirectionMethod::ExactMilp,
        MethodFlag::MilpK => DirectionMethod::ExactMilpK,
        MethodFlag::LocalSearch => DirectionMethod::LocalSearch,
    };
    if d.k.is_some() && method == DirectionMethod::ExactMilp {
        usage_error("--k needs --direction-method milp-k or local-search".into());
    }
    OracleConfig {
        method,
        k: d.k.unwrap_or(OracleConfig::default().k),
        depth_lb,
        depth_ub,
        objective: match d.obj {
            ObjFlag::Norm1 => ObjectiveKind::Norm1,
            ObjFlag::Idic => ObjectiveKind::IdicFriendly,
            ObjFlag::Steepest => ObjectiveKind::Steepest,
        },
        ..OracleConfig::default()
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

fn cmd_solve(a: &SolveArgs) -> Result<(), Failure> {
    let depth_ub = match a.ls_depth_ub.as_str() {
        "inf" => None,
        v => Some(v.parse().unwrap_or_else(|_| usage_error(format!("--ls-depth-ub expects an integer or inf, got `{v}`")))),
    };
    let cfg = SolverConfig {
        oracle_mode: match a.oracle {
            OracleFlag::Id => OracleMode::ImprovingDirection,
            OracleFlag::Legacy => OracleMode::Legacy,
        },
        oracle: oracle_config(&a.direction, a.ls_depth_lb, depth_ub),
        cuts: CutFamilies {
            idic: a.cuts.iter().any(|c| matches!(c, CutFlag::Idic)),
            isic: a.cuts.iter().any(|c| matches!(c, CutFlag::Isic)),
        },
        branching: match a.branch {
            BranchFlag::Fractional => BranchStrategy::Fractional,
            BranchFlag::Linking => BranchStrategy::LinkingPriority,
        },
        time_limit: a.time_limit.map(Duration::from_secs_f64),
        node_limit: a.node_limit,
        seed: a.seed,
        trace: a.trace.is_some(),
        ..SolverConfig::default()
    };
    let inst = load(&a.file)?;
    let res = solve(&inst, &cfg)?;
    if let Some(path) = &a.trace {
        let mut text = res.trace.join("\n");
        text.push('\n');
        std::fs::write(path, text)?;
    }
    let incumbent = res.incumbent.as_ref().map_or("none".to_string(), Point::to_string);
    println!("status     {}", res.status);
    println!("incumbent  {incumbent}");
    println!("value      {}", res.objective);
    println!("bound      {}", res.bound);
    println!("gap        {}", res.gap);
    println!("nodes      {}", res.stats.nodes);
    println!("cuts       {} ({} global, {} local)", res.cuts.len(), res.stats.global_cuts, res.stats.local_cuts);
    println!("ifd time   {:.6}s (avg {:.6}s)", res.stats.ifd_time.as_secs_f64(), res.stats.avg_ifd_time().as_secs_f64());
    let (x, y) = res
        .incumbent
        .as_ref()
        .map_or((String::new(), String::new()), |p| (fmt_vec(&p.x), fmt_vec(&p.y)));
    println!(
        "record: status={} objective={} bound={} gap={} nodes={} x={x} y={y} idic_cuts={} isic_cuts={} oracle_calls={} ifd_seconds={:.6} seed={}",
        res.status,
        res.objective,
        res.bound,
        res.gap,
        res.stats.nodes,
        res.stats.idic_cuts,
        res.stats.isic_cuts,
        res.stats.oracle_calls,
        res.stats.ifd_time.as_secs_f64(),
        a.seed
    );
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<(), Failure> {
    let inst = load(&a.file)?;
    if a.x.len() != inst.n1 || a.y.len() != inst.n2 {
        usage_error(format!("point needs {} leader and {} follower values", inst.n1, inst.n2));
    }
    let ctx = OracleContext::new(&inst);
    let p = Point::new(a.x.clone(), a.y.clone());
    if !ctx.in_relaxation(&p.full()) {
        println!("note: {p} is outside the relaxation; the direction search may be vacuous");
    }
    let cfg = oracle_config(&a.direction, 0, None);
    let (outcome, _) = ctx.find_improving_direction(&p, 0, &cfg)?;
    match &outcome {
        OracleOutcome::Found(d) => {
            println!("outcome    Found");
            println!("direction  w=({})", fmt_vec(&d.w));
            println!("norm1      {}", d.norm1);
            println!("d2w        {}", d.improvement);
        }
        OracleOutcome::NoImprovingDirection => println!("outcome    NoImprovingDirection"),
        OracleOutcome::HeuristicExhausted => println!("outcome    HeuristicExhausted"),
    }
    if ctx.in_s(&p) {
        let feasible = ctx.certify_bilevel_feasible(&p)?;
        println!("in S       yes, {}", if feasible { "bilevel feasible" } else { "bilevel infeasible" });
    } else {
        println!("in S       no");
    }
    Ok(())
}

fn cmd_kopt(a: &KoptArgs) -> Result<(), Failure> {
    let inst = load(&a.file)?;
    let ctx = KoptContext::new(&inst)?;
    if let Some(spec) = &a.slice {
        let values = spec
            .strip_prefix("x=")
            .unwrap_or_else(|| usage_error(format!("--slice expects x=<v>[,<v>...], got `{spec}`")));
        let x: Vec<i64> = values
            .split(',')
            .map(|v| v.trim().parse())
            .collect::<Result<_, _>>()
            .unwrap_or_else(|_| usage_error(format!("--slice expects integers, got `{values}`")));
        if x.len() != inst.n1 {
            usage_error(format!("--slice needs {} leader values", inst.n1));
        }
        print!("{}", slice_csv(&ctx, &x)?);
        return Ok(());
    }
    let f: std::collections::HashSet<_> = enumerate_Fk(&ctx, ctx.k_bar())?.iter().filter_map(point_to_ints).collect();
    let fk = enumerate_Fk(&ctx, a.k)?;
    println!("k-bar {}", ctx.k_bar());
    println!("|F({})| = {}", a.k, fk.len());
    for p in &fk {
        let tag = if f.contains(&point_to_ints(p).expect("integer point")) { "F" } else { "F(k)\\F" };
        println!("{p} {tag}");
    }
    Ok(())
}

fn cmd_verify(file: &Path) -> Result<(), Failure> {
    let inst = load(file)?;
    let report = verify_instance(&inst)?;
    for c in &report.checks {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail);
    }
    if report.all_passed() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure(1, "verification failed".into()))
    }
}

fn cmd_gen(a: &GenArgs) -> Result<(), Failure> {
    let inst = if a.suite {
        suite_instance(a.seed)?
    } else {
        if a.coeff_max < 0 || a.bound < 1 {
            usage_error("--coeff-max must be nonnegative and --bound positive".into());
        }
        generate_random_instance(&GeneratorParams {
            seed: a.seed,
            n1: a.n1,
            n2: a.n2,
            m1: a.m1,
            m2: a.m2,
            coeff_range: (-a.coeff_max, a.coeff_max),
            bound: a.bound,
        })?
    };
    let text = write_instance(&inst);
    match &a.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<(), Failure> {
    let instances: Vec<(String, MiblpInstance)> = if a.files.is_empty() {
        (a.seed..a.seed + a.generate)
            .map(|s| Ok((format!("gen-{s}"), suite_instance(s)?)))
            .collect::<Result<_, Failure>>()?
    } else {
        a.files
            .iter()
            .map(|f| Ok((f.display().to_string(), load(f)?)))
            .collect::<Result<_, Failure>>()?
    };
    let names: Vec<String> = if a.configs.is_empty() {
        DEFAULT_CONFIGS.iter().map(|s| s.to_string()).collect()
    } else {
        a.configs.clone()
    };
    let configs = names
        .iter()
        .map(|n| config_from_name(n).map(|c| (n.clone(), c)))
        .collect::<Result<Vec<_>, _>>()
        .unwrap_or_else(|e| usage_error(e.to_string()));
    let exec = if a.sequential { Execution::Sequential } else { Execution::default() };
    let limits = MatrixLimits {
        time_limit: Some(Duration::from_secs_f64(a.time_limit)),
        node_limit: None,
    };
    let records = run_matrix(&instances, &configs, limits, Some(&a.output), exec)?;
    for r in &records {
        println!("{} {} {} {} {:.3}s", r.instance, r.config, r.status, r.objective, r.wall_seconds);
    }
    println!("{} runs appended to {}", records.len(), a.output.display());
    Ok(())
}

fn cmd_profile(a: &ProfileArgs) -> Result<(), Failure> {
    let measure: Measure = a.measure.parse().unwrap_or_else(|e: idbc::bench::ProfileError| usage_error(e.to_string()));
    let records = read_records(&a.results)?;
    let filter = ProfileFilter { min_time: a.min_time };
    let mut tables = vec![performance_profile(&records, measure, filter)?];
    if let Some(b) = &a.baseline {
        tables.push(baseline_profile(&records, measure, b, filter)?);
    }
    tables.push(cumulative_profile(&records));
    for t in &tables {
        for path in t.write_dat(&a.output_dir)? {
            println!("wrote {}", path.display());
        }
        for (cfg, better, worse) in &t.versus_baseline {
            println!("{cfg}: better on {:.1}%, worse on {:.1}%", 100.0 * better, 100.0 * worse);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Kopt(a) => cmd_kopt(a),
        Command::Verify { file } => cmd_verify(file),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Profile(a) => cmd_profile(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
