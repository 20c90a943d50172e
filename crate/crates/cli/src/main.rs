use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use lrp2e::construct::ConstructError;
use lrp2e::bench::{bench, write_bench, BenchConfig};
use lrp2e::io::generate::{generate_seeded, GenSpec};
use lrp2e::io::native::write_native;
use lrp2e::io::report::{run_rows, write_csv, write_report};
use lrp2e::io::solution::{write_solution, SolutionDocument, Status};
use lrp2e::io::{read_instance, IoError};
use lrp2e::oracle::{oracle, tiny_instance, OracleError};
use lrp2e::solve::{best_of, solve_runs, SolveConfig, SolveError};
use lrp2e::svg::{line_chart, Series};
use lrp2e::Instance;

const THREADS_ENV: &str = "LRP2E_THREADS";

#[derive(Parser)]
#[command(name = "lrp2e", version, about = "Two-echelon location-routing solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance, best of several seeded runs.
    Solve(SolveArgs),
    /// Write random instances.
    Generate(GenerateArgs),
    /// Exact optimum of a tiny instance by enumeration.
    Oracle(OracleArgs),
    /// Hybrid against plain comparison over several instances.
    Bench(BenchArgs),
    /// Convert a legacy benchmark file to the native format.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Base seed; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// TOML file overriding solver parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Wall-clock budget per instance (s), shared by its runs.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    Relaxed,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Expected instance kind; taken from the file when omitted.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Reference cost for the gap column.
    #[arg(long)]
    reference: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct GenerateArgs {
    /// Size class such as SI-D1-C5-T2 or MI-D3-C50-T6, or `tiny`.
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances, seeds seed..seed + count.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Infeasible(Option<String>),
    Parse(String),
    SizeCap(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Parse(_) => 3,
            Failure::SizeCap(_) => 4,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        if e.is_parse() {
            Failure::Parse(e.to_string())
        } else {
            Failure::Other(e.into())
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Config(_) | SolveError::Construct(ConstructError::BadK { .. }) => Failure::Parse(e.to_string()),
            SolveError::Construct(_) => Failure::Infeasible(Some(e.to_string())),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Convert(a) => cmd_convert(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Infeasible(None) => eprintln!("no feasible solution found"),
                Failure::Infeasible(Some(m)) => eprintln!("infeasible: {m}"),
                Failure::Parse(m) => eprintln!("error: {m}"),
                Failure::SizeCap(m) => eprintln!("refused: {m}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn load_config(path: Option<&Path>) -> Result<SolveConfig, Failure> {
    let Some(path) = path else { return Ok(SolveConfig::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: SolveConfig = toml::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    cfg.check()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn check_run_args(run: &RunArgs) -> Result<(), Failure> {
    if run.runs == 0 {
        return Err(Failure::Parse("--runs must be at least 1".into()));
    }
    if !(run.time_limit > 0.0) {
        return Err(Failure::Parse("--time-limit must be positive".into()));
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<(), Failure> {
    check_run_args(&a.run)?;
    let cfg = load_config(a.run.config.as_deref())?;
    let inst = read_instance(&a.instance)?;
    if let Some(mode) = a.mode {
        if (mode == Mode::Relaxed) != inst.relaxed {
            let kind = if inst.relaxed { "relaxed" } else { "full" };
            return Err(Failure::Parse(format!("{} is a {kind} instance", a.instance.display())));
        }
    }
    create_dir(&a.run.out)?;
    info!("solving {} with {} runs", inst.id, a.run.runs);
    let outs = solve_runs(&inst, &cfg, a.run.seed, a.run.runs, threads(), Some(a.run.time_limit))?;
    let best = best_of(&outs);
    let shown = best.unwrap_or(&outs[0]);
    let out = &a.run.out;
    write_solution(&SolutionDocument::from_outcome(&inst, shown), &out.join("solution.json"))?;
    write_report(&run_rows(&inst.id, &outs, a.reference), &out.join("report.csv"))?;
    write_csv(&shown.trace, &out.join("trace.csv"))?;
    write_csv(&shown.outer, &out.join("outer.csv"))?;
    let series = [
        Series { name: "current".into(), points: shown.trace.iter().map(|t| (t.iteration as f64, t.current)).collect() },
        Series {
            name: "best feasible".into(),
            points: shown.trace.iter().map(|t| (t.iteration as f64, t.best_feasible)).collect(),
        },
    ];
    let svg = line_chart(&format!("{}: second echelon cost", inst.id), "ALNS iteration", "cost", &series);
    let svg_path = out.join("cost.svg");
    std::fs::write(&svg_path, svg).with_context(|| format!("writing {}", svg_path.display()))?;
    let feasible = outs.iter().filter(|o| o.feasible()).count();
    match best {
        Some(b) => {
            println!("{}: best {:.4} (seed {}), {feasible}/{} runs feasible", inst.id, b.cost().unwrap(), b.seed, outs.len());
            Ok(())
        }
        None => Err(Failure::Infeasible(None)),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Failure> {
    let spec = if a.spec.eq_ignore_ascii_case("tiny") { None } else { Some(GenSpec::parse(&a.spec)?) };
    create_dir(&a.out)?;
    for seed in a.seed..a.seed + a.count {
        let inst = match &spec {
            Some(s) => {
                let mut inst = generate_seeded(s, seed);
                inst.id = format!("{}-s{seed}", inst.id);
                inst
            }
            None => tiny_instance(seed),
        };
        let path = a.out.join(format!("{}.toml", inst.id));
        write_native(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Failure> {
    let inst = read_instance(&a.instance)?;
    let res = oracle(&inst).map_err(|e| match e {
        OracleError::TooLarge(_) | OracleError::Relaxed => Failure::SizeCap(e.to_string()),
    })?;
    let Some(sol) = res.solution else { return Err(Failure::Infeasible(None)) };
    create_dir(&a.out)?;
    let doc = SolutionDocument::of_solution(&inst, &sol, None);
    write_solution(&doc, &a.out.join("oracle.json"))?;
    if doc.status != Status::Feasible {
        return Err(Failure::Other(anyhow::anyhow!("enumerated optimum fails validation: {:?}", doc.violations)));
    }
    println!("{}: optimum {:.6} ({} leaves enumerated)", inst.id, sol.cost.total(), res.leaves);
    Ok(())
}

fn instance_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "toml" || x == "dat"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    check_run_args(&a.run)?;
    let solve = load_config(a.run.config.as_deref())?;
    let instances: Vec<Instance> =
        instance_files(&a.instance)?.iter().map(|p| read_instance(p)).collect::<Result<_, _>>()?;
    let cfg = BenchConfig { solve, runs: a.run.runs, seed: a.run.seed, threads: threads(), budget: Some(a.run.time_limit) };
    let res = bench(&instances, &cfg);
    for f in write_bench(&res, &a.run.out)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_convert(a: ConvertArgs) -> Result<(), Failure> {
    let inst = read_instance(&a.instance)?;
    create_dir(&a.out)?;
    let path = a.out.join(format!("{}.toml", inst.id));
    write_native(&inst, &path)?;
    println!("{}", path.display());
    Ok(())
}
