use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gpqubo::anneal::Init;
use gpqubo::bench::{self, BenchConfig, BestKnown, OutputFormat};
use gpqubo::evaluate::{self, approximation_ratio, Formulation};
use gpqubo::io;
use gpqubo::qubo::text::{parse_qubo, write_qubo};
use gpqubo::sparsify::{sparsify_pipeline, PipelineConfig};
use gpqubo::{balance_bounds, cut_edges, AnnealConfig, Error, Graph, Penalty, Schedule, SolveResult};

#[derive(Parser)]
#[command(name = "gpqubo", version, about = "Graph partitioning as QUBO with a digital-annealer style solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Balanced bipartition of a graph.
    Partition(SolveArgs),
    /// Balanced k-way partition with one-hot indicators.
    Kway(SolveArgs),
    /// Forest-fire sparsify, solve on the sparse graph, project back.
    SparsifyPipeline(PipelineArgs),
    /// Run a graph x k x epsilon grid and print a comparison table.
    Bench(BenchArgs),
    /// Score a partition file or a QUBO solution.
    Evaluate(EvaluateArgs),
    /// Convert between METIS, MatrixMarket and QUBO text.
    Convert(ConvertArgs),
}

#[derive(Args, Clone)]
struct AnnealArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    replicas: usize,
    #[arg(long, default_value_t = 10_000)]
    sweeps: u64,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    temp_initial: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    temp_final: f64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Geometric)]
    schedule: ScheduleArg,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
    /// Record an energy trace point every N sweeps.
    #[arg(long)]
    trace_every: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Geometric,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Balanced,
}

impl AnnealArgs {
    fn config(&self) -> AnnealConfig {
        AnnealConfig {
            sweeps: self.sweeps,
            temp_initial: self.temp_initial,
            temp_final: self.temp_final,
            schedule: match self.schedule {
                ScheduleArg::Geometric => Schedule::Geometric,
                ScheduleArg::Linear => Schedule::Linear,
            },
            replicas: self.replicas,
            seed: self.seed,
            time_limit: self.time_limit,
            init: match self.init {
                InitArg::Random => Init::Random,
                InitArg::Balanced => Init::Balanced,
            },
            trace_every: self.trace_every,
            ..AnnealConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// METIS (.graph) or MatrixMarket (.mtx) file.
    #[arg(long)]
    graph: PathBuf,
    /// Number of parts; `partition` accepts only 2.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    penalty: Penalty,
    #[command(flatten)]
    anneal: AnnealArgs,
    /// Write the repaired partition here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// `json` summary or the plain `partition` file on stdout.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value = "auto")]
    penalty: Penalty,
    #[arg(long, default_value_t = 0.7)]
    keep_ratio: f64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Forest-fire burn probability.
    #[arg(long, default_value_t = 0.7)]
    pf: f64,
    #[arg(long, default_value_t = 10)]
    walks: usize,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph files; replaces the config's list.
    #[arg(long)]
    graph: Vec<PathBuf>,
    #[arg(long)]
    k: Vec<usize>,
    #[arg(long)]
    epsilon: Vec<f64>,
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    time_limit: Option<f64>,
    /// Run without a wall-clock budget.
    #[arg(long, conflicts_with = "time_limit")]
    no_time_limit: bool,
    /// Solve through the sparsification pipeline.
    #[arg(long)]
    pipeline: bool,
    #[arg(long)]
    keep_ratio: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    solver_id: Option<String>,
    /// External solver results (graph_id,solver_id,k,epsilon,cut[,time_limit]).
    #[arg(long)]
    external: Vec<PathBuf>,
    /// Extra best-known rows (graph_id,n,d_avg,k,epsilon,cut).
    #[arg(long)]
    best_known: Vec<PathBuf>,
    /// csv, json or markdown.
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, requires = "partition", conflicts_with = "qubo")]
    graph: Option<PathBuf>,
    /// Partition file: one label per line.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Reference cut for the approximation ratio; defaults to the registry.
    #[arg(long)]
    best_known: Option<usize>,
    #[arg(long, requires = "solution")]
    qubo: Option<PathBuf>,
    /// Solver result JSON, bare or the summary printed by `partition`.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// metis, mtx or qubo; inferred from the extension when omitted.
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    /// Parts when writing a QUBO.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value = "auto")]
    penalty: Penalty,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Partition(a) => run_solve(a, false),
        Command::Kway(a) => run_solve(a, true),
        Command::SparsifyPipeline(a) => run_pipeline(a),
        Command::Bench(a) => run_bench(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Convert(a) => run_convert(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_parse() {
        2
    } else if matches!(e, Error::Infeasible(_)) {
        3
    } else {
        1
    }
}

fn write_out(path: Option<&Path>, text: &str) -> gpqubo::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn graph_id(g: &Graph) -> &str {
    g.name().unwrap_or("graph")
}

fn run_solve(a: SolveArgs, kway: bool) -> gpqubo::Result<()> {
    let k = match (kway, a.k) {
        (false, None | Some(2)) => 2,
        (false, Some(k)) => return Err(Error::InvalidArgument(format!("partition is a bipartition; use kway for k = {k}"))),
        (true, k) => k.unwrap_or(3),
    };
    if !matches!(a.format.as_str(), "json" | "partition") {
        return Err(Error::UnknownFormat(a.format));
    }
    let g = io::read_graph(&a.graph)?;
    let formulation = if kway { Formulation::OneHot } else { Formulation::Auto };
    let run = evaluate::solve_partition(&g, k, a.epsilon, a.penalty, formulation, &a.anneal.config())?;
    let text = io::write_partition(&run.partition, graph_id(&g), a.epsilon);
    if let Some(out) = &a.output {
        std::fs::write(out, &text)?;
    }
    if a.format == "partition" {
        print!("{text}");
        return Ok(());
    }
    let solve: Value = serde_json::from_str(&run.solve.to_json())?;
    let summary = json!({
        "graph": graph_id(&g),
        "n": g.n(),
        "m": g.m(),
        "k": k,
        "epsilon": a.epsilon,
        "penalty": run.penalty,
        "attempts": run.attempts,
        "cut_raw": run.cut_raw,
        "cut_repaired": run.cut_repaired,
        "one_hot_ok": run.feasibility.one_hot_ok,
        "balance_ok": run.feasibility.balance_ok,
        "part_sizes": run.partition.part_sizes(),
        "solve": solve,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_pipeline(a: PipelineArgs) -> gpqubo::Result<()> {
    let g = io::read_graph(&a.graph)?;
    let cfg = PipelineConfig {
        keep_ratio: a.keep_ratio,
        burn_probability: a.pf,
        walks: a.walks,
        repeats: a.repeats,
    };
    let res = sparsify_pipeline(&g, a.k, a.epsilon, a.penalty, &a.anneal.config(), &cfg, a.anneal.seed)?;
    if let Some(out) = &a.output {
        std::fs::write(out, io::write_partition(&res.partition, graph_id(&g), a.epsilon))?;
    }
    let summary = json!({
        "graph": graph_id(&g),
        "n": g.n(),
        "m": g.m(),
        "k": a.k,
        "epsilon": a.epsilon,
        "penalty": res.penalty,
        "keep_ratio": a.keep_ratio,
        "burn_probability": a.pf,
        "walks": a.walks,
        "seed": a.anneal.seed,
        "projected_cut": res.projected_cut,
        "best_repetition": res.best_repetition,
        "part_sizes": res.partition.part_sizes(),
        "repetitions": res.repetitions,
        "wall_time": res.wall_time,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn bench_config(a: &BenchArgs) -> gpqubo::Result<BenchConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let mut cfg = BenchConfig::from_toml(&std::fs::read_to_string(p)?)?;
            // Graph paths in a config file are relative to the file.
            let base = p.parent().unwrap_or(Path::new(""));
            for g in &mut cfg.graphs {
                if g.is_relative() {
                    *g = base.join(&*g);
                }
            }
            cfg
        }
        None => BenchConfig::default(),
    };
    if !a.graph.is_empty() {
        cfg.graphs = a.graph.clone();
    }
    if !a.k.is_empty() {
        cfg.ks = a.k.clone();
    }
    if !a.epsilon.is_empty() {
        cfg.epsilons = a.epsilon.clone();
    }
    if let Some(p) = &a.penalty {
        cfg.penalty = p.clone();
    }
    if let Some(s) = a.seed {
        cfg.anneal.seed = s;
    }
    if let Some(r) = a.replicas {
        cfg.anneal.replicas = r;
    }
    if let Some(s) = a.sweeps {
        cfg.anneal.sweeps = s;
    }
    if a.time_limit.is_some() {
        cfg.anneal.time_limit = a.time_limit;
    }
    if a.no_time_limit {
        cfg.anneal.time_limit = None;
    }
    if a.pipeline || a.keep_ratio.is_some() || a.repeats.is_some() {
        cfg.pipeline.enabled = true;
    }
    if let Some(r) = a.keep_ratio {
        cfg.pipeline.params.keep_ratio = r;
    }
    if let Some(r) = a.repeats {
        cfg.pipeline.params.repeats = r;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(s) = &a.solver_id {
        cfg.solver_id = s.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_bench(a: BenchArgs) -> gpqubo::Result<()> {
    let format: OutputFormat = a.format.parse()?;
    let cfg = bench_config(&a)?;
    let mut registry = BestKnown::bundled();
    for p in &a.best_known {
        registry.extend_from_reader(std::fs::File::open(p)?)?;
    }
    let graphs = bench::load_graphs(&cfg.graphs)?;
    let internal = bench::run_grid(&graphs, &cfg, &registry)?;
    let mut external = Vec::new();
    for p in &a.external {
        external.extend(bench::ingest_external_path(p, &registry)?);
    }
    let records = bench::merge(internal, external, &registry);
    write_out(a.output.as_deref(), &bench::emit(&records, format)?)
}

fn run_evaluate(a: EvaluateArgs) -> gpqubo::Result<()> {
    if let (Some(q), Some(s)) = (&a.qubo, &a.solution) {
        let model = parse_qubo(&std::fs::read_to_string(q)?)?;
        let text = std::fs::read_to_string(s)?;
        // Accept a bare solver result or the `partition`/`kway` summary around one.
        let value: Value = serde_json::from_str(&text)?;
        let sol = match value.get("solve") {
            Some(inner) => SolveResult::from_json(&inner.to_string())?,
            None => SolveResult::from_json(&text)?,
        };
        let energy = model.energy(&sol.best_bits)?;
        let mut out = json!({ "energy": energy, "num_vars": model.num_vars() });
        if model.meta().is_some() {
            let (p, f) = evaluate::decode(&model, &sol.best_bits)?;
            out["labels"] = json!(p.labels());
            out["one_hot_ok"] = json!(f.one_hot_ok);
            out["balance_ok"] = json!(f.balance_ok);
            out["part_sizes"] = json!(f.part_sizes);
        }
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    let (Some(gpath), Some(ppath)) = (&a.graph, &a.partition) else {
        return Err(Error::InvalidArgument(
            "evaluate needs --graph with --partition, or --qubo with --solution".into(),
        ));
    };
    let g = io::read_graph(gpath)?;
    let p = io::parse_partition(&std::fs::read_to_string(ppath)?, a.k)?;
    let cut = cut_edges(&g, &p)?;
    let (lower, upper) = balance_bounds(g.n(), p.k(), a.epsilon)?;
    let sizes = p.part_sizes();
    let balance_ok = sizes.iter().all(|&s| s >= lower && s <= upper);
    let best = a
        .best_known
        .or_else(|| BestKnown::bundled().get(graph_id(&g), p.k(), a.epsilon));
    let out = json!({
        "graph": graph_id(&g),
        "k": p.k(),
        "epsilon": a.epsilon,
        "cut": cut,
        "part_sizes": sizes,
        "lower": lower,
        "upper": upper,
        "balance_ok": balance_ok,
        "best_known": best,
        "approximation_ratio": best.and_then(|b| approximation_ratio(cut, b)),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum FileFormat {
    Metis,
    Mtx,
    Qubo,
}

fn file_format(explicit: Option<&str>, path: &Path) -> gpqubo::Result<FileFormat> {
    let name = match explicit {
        Some(f) => f.to_ascii_lowercase(),
        None => path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase(),
    };
    match name.as_str() {
        "metis" | "graph" | "chaco" => Ok(FileFormat::Metis),
        "mtx" | "mm" => Ok(FileFormat::Mtx),
        "qubo" => Ok(FileFormat::Qubo),
        _ => Err(Error::UnknownFormat(name)),
    }
}

fn run_convert(a: ConvertArgs) -> gpqubo::Result<()> {
    let from = file_format(a.from.as_deref(), &a.input)?;
    let to = file_format(a.to.as_deref(), &a.output)?;
    let text = std::fs::read_to_string(&a.input)?;
    let out = if from == FileFormat::Qubo {
        let model = parse_qubo(&text)?;
        match to {
            FileFormat::Qubo => write_qubo(&model),
            FileFormat::Metis => io::write_metis(&model.interaction_graph()),
            FileFormat::Mtx => io::write_matrix_market(&model.interaction_graph()),
        }
    } else {
        let g = if from == FileFormat::Mtx {
            io::parse_matrix_market(&text)?
        } else {
            io::parse_metis(&text)?
        };
        match to {
            FileFormat::Metis => io::write_metis(&g),
            FileFormat::Mtx => io::write_matrix_market(&g),
            FileFormat::Qubo => write_qubo(&evaluate::build_model(&g, a.k, a.epsilon, a.penalty, Formulation::Auto)?),
        }
    };
    std::fs::write(&a.output, out)?;
    Ok(())
}
