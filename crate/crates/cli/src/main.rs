use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nnsketch::eval::{self, EvalConfig, Problem};
use nnsketch::io::{load_points, read_key, save_points, write_key};
use nnsketch::oracle::{gen_hard_instance, gen_queries, gen_random, Distribution};
use nnsketch::{BuildOptions, Engine, PointSet, Sketch};

/// Dimension above which the exact engine's ball enumeration gets slow.
const EXACT_DIM_WARN: usize = 10;

#[derive(Parser)]
#[command(name = "nnsk", version, about = "Euclidean nearest neighbor and distance sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sketch a point file.
    Build(BuildArgs),
    /// Nearest neighbor of each query, one index per line.
    QueryAnn(QueryArgs),
    /// Distance estimates, one line per query.
    QueryDist(QueryDistArgs),
    /// Monte Carlo evaluation against brute force.
    Eval(EvalArgs),
    /// Write a random or adversarial point file.
    Gen(GenArgs),
    /// Per-section size of a sketch.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Exact,
    Quadtree,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Exact => Engine::Exact,
            EngineArg::Quadtree => Engine::Quadtree,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Clusters,
    Planted,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Ann,
    Distances,
    Hard,
}

#[derive(Args)]
struct BuildArgs {
    /// Input points (.npts or text).
    points: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long, value_enum, default_value_t = EngineArg::Exact)]
    engine: EngineArg,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    distances: Switch,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    jl: Switch,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Constant in the projection target dimension.
    #[arg(long, default_value_t = 8.0)]
    projection_c: f64,
    #[arg(long)]
    hash_width: Option<u32>,
}

#[derive(Args)]
struct QueryArgs {
    sketch: PathBuf,
    /// Query points (.npts or text).
    queries: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryDistArgs {
    #[command(flatten)]
    io: QueryArgs,
    /// Only estimate the distance to this point.
    #[arg(long)]
    index: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum, default_value_t = ProblemArg::Ann)]
    problem: ProblemArg,
    #[arg(long, value_enum, default_value_t = EngineArg::Exact)]
    engine: EngineArg,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    d: usize,
    #[arg(long, default_value_t = 1024)]
    phi: i64,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 16)]
    q: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Approximation constant: answers must be within 1 + c·ε.
    #[arg(long, default_value_t = 16.0)]
    c: f64,
    #[arg(long, value_enum, default_value_t = DistArg::Uniform)]
    distribution: DistArg,
    #[arg(long, default_value_t = 8.0)]
    projection_c: f64,
    /// Evaluate a generated answer key instead: requires --points and --queries.
    #[arg(long, requires_all = ["points", "queries"])]
    key: Option<PathBuf>,
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Write per-trial rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the text report here as well as to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    d: usize,
    #[arg(long, default_value_t = 1024)]
    phi: i64,
    #[arg(long, value_enum, default_value_t = DistArg::Uniform)]
    distribution: DistArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write this many evaluation queries.
    #[arg(long)]
    queries: Option<usize>,
    /// Emit the adversarial instance; writes `<out>.queries.npts` and `<out>.key`.
    #[arg(long)]
    hard: bool,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// With --hard, query every position instead of only the planted ones.
    #[arg(long)]
    all_queries: bool,
}

#[derive(Args)]
struct StatsArgs {
    sketch: PathBuf,
}

fn distribution(arg: DistArg, phi: i64, eps: f64) -> Distribution {
    match arg {
        DistArg::Uniform => Distribution::Uniform,
        DistArg::Clusters => Distribution::GaussianClusters {
            count: 8,
            spread: phi as f64 / 32.0,
        },
        DistArg::Planted => Distribution::PlantedTwoCluster {
            level: phi.trailing_zeros().saturating_sub(1),
            eps: eps.min(0.49),
        },
    }
}

fn warn_dimension(engine: Engine, d: usize) {
    if engine == Engine::Exact && d > EXACT_DIM_WARN {
        eprintln!("warning: d = {d} exceeds {EXACT_DIM_WARN}; exact-engine queries enumerate balls exponential in d");
    }
}

fn sibling(path: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_sketch(path: &PathBuf) -> Result<Sketch> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Sketch::decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn load_queries(path: &Path) -> Result<PointSet> {
    load_points(path).with_context(|| format!("reading queries {}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build(a: BuildArgs) -> Result<()> {
    let points = load_points(&a.points).with_context(|| format!("reading {}", a.points.display()))?;
    let params = points.params(a.eps, a.delta, a.q, a.seed)?;
    let opts = BuildOptions {
        engine: a.engine.into(),
        distances: a.distances == Switch::On,
        jl: a.jl == Switch::On,
        projection_c: a.projection_c,
        hash_width: a.hash_width,
    };
    if !opts.jl {
        warn_dimension(opts.engine, points.dim());
    }
    let sketch = Sketch::build(&points, &params, &opts)?;
    let blob = sketch.encode();
    fs::write(&a.out, &blob).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {} bytes ({} bits/point)", blob.len(), blob.len() as f64 * 8.0 / points.len() as f64);
    Ok(())
}

fn query_ann(a: QueryArgs) -> Result<()> {
    let sketch = load_sketch(&a.sketch)?;
    let queries = load_queries(&a.queries)?;
    let mut out = String::new();
    for y in queries.rows() {
        writeln!(out, "{}", sketch.query_ann(y)?)?;
    }
    emit(&a.out, &out)
}

fn query_dist(a: QueryDistArgs) -> Result<()> {
    let sketch = load_sketch(&a.io.sketch)?;
    let queries = load_queries(&a.io.queries)?;
    let mut out = String::new();
    for y in queries.rows() {
        let row = match a.index {
            Some(k) => vec![sketch.query_distance(k, y)?],
            None => sketch.query_all_distances(y)?,
        };
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    emit(&a.io.out, &out)
}

fn eval_key(a: &EvalArgs, key_path: &PathBuf) -> Result<()> {
    let points = load_points(a.points.as_ref().unwrap())?;
    let queries = load_queries(a.queries.as_ref().unwrap())?;
    let key = read_key(&fs::read_to_string(key_path)?)?;
    if key.len() != queries.len() {
        bail!("key has {} entries but there are {} queries", key.len(), queries.len());
    }
    let engine: Engine = a.engine.into();
    warn_dimension(engine, points.dim());
    // Exact recovery needs a (1 + ε/8)-approximation.
    let params = points.params(a.eps / 8.0, a.delta, queries.len().min(points.len()), a.seed)?;
    let opts = BuildOptions {
        engine,
        ..BuildOptions::default()
    };
    let blob = Sketch::build(&points, &params, &opts)?.encode();
    let sketch = Sketch::decode(&blob)?;
    let mut hits = 0;
    for (y, k) in queries.rows().zip(&key) {
        hits += (sketch.query_ann(y)? == k.expected) as usize;
    }
    let text = format!(
        "queries={} recovered={hits} bit_recovery_rate={:.4} bits_total={} bits_per_point={:.2}\n",
        key.len(),
        hits as f64 / key.len().max(1) as f64,
        blob.len() * 8,
        blob.len() as f64 * 8.0 / points.len() as f64
    );
    print!("{text}");
    if let Some(p) = &a.report {
        fs::write(p, &text)?;
    }
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    if let Some(k) = &a.key {
        return eval_key(&a, k);
    }
    let config = EvalConfig {
        problem: match a.problem {
            ProblemArg::Ann => Problem::Ann,
            ProblemArg::Distances => Problem::Distances,
            ProblemArg::Hard => Problem::Hard,
        },
        engine: a.engine.into(),
        n: a.n,
        d: a.d,
        phi: a.phi,
        eps: a.eps,
        delta: a.delta,
        q: a.q,
        trials: a.trials,
        seed: a.seed,
        c: a.c,
        distribution: distribution(a.distribution, a.phi, a.eps),
        projection_c: a.projection_c,
    };
    if config.problem != Problem::Hard {
        warn_dimension(config.engine, config.d);
    }
    let report = eval::run(&config)?;
    let text = report.text();
    print!("{text}");
    if let Some(p) = &a.report {
        fs::write(p, &text)?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, report.csv())?;
    }
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    if a.hard {
        let inst = gen_hard_instance(a.n, a.eps, a.phi, a.seed, a.all_queries)?;
        save_points(&a.out, &inst.points)?;
        let queries = PointSet::from_rows(a.phi, &inst.queries)?;
        save_points(&sibling(&a.out, ".queries.npts"), &queries)?;
        fs::write(sibling(&a.out, ".key"), write_key(&inst.key))?;
        eprintln!(
            "hard instance: {} points, d = {}, k = {}, {} queries",
            inst.points.len(),
            inst.points.dim(),
            inst.k,
            inst.queries.len()
        );
        return Ok(());
    }
    let points = gen_random(a.n, a.d, a.phi, distribution(a.distribution, a.phi, a.eps), a.seed)?;
    save_points(&a.out, &points)?;
    if let Some(q) = a.queries {
        let queries = PointSet::from_rows(a.phi, &gen_queries(&points, q, a.seed))?;
        save_points(&sibling(&a.out, ".queries.npts"), &queries)?;
    }
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let sketch = load_sketch(&a.sketch)?;
    let (blob, sizes) = sketch.encode_with_breakdown();
    let p = sketch.params();
    let n = p.n as f64;
    println!(
        "engine={:?} n={} d={} phi={} eps={} delta={} q={}",
        sketch.engine(),
        p.n,
        p.d,
        p.phi,
        p.eps,
        p.delta,
        p.q
    );
    println!("{:<14}{:>12}{:>14}", "section", "bits", "bits/point");
    for (name, bits) in sizes.rows() {
        println!("{name:<14}{bits:>12}{:>14.3}", bits as f64 / n);
    }
    println!("{:<14}{:>12}{:>14.3}", "total", blob.len() * 8, blob.len() as f64 * 8.0 / n);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => build(a),
        Command::QueryAnn(a) => query_ann(a),
        Command::QueryDist(a) => query_dist(a),
        Command::Eval(a) => run_eval(a),
        Command::Gen(a) => gen(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
