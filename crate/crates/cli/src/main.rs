use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshrel::build::{build_minhop, build_urf_dt, build_urf_gg, CrossLinks, DtOptions, SelectMode, ThresholdSchedule};
use meshrel::experiment::{aggregate, aggregate_csv, rows_csv, run_experiment, self_check, ExperimentConfig};
use meshrel::fpp::{fpp_bounds, fpp_fast_traced, DEFAULT_CUT_CAP};
use meshrel::io::{report_float, write_atomic, GraphFile};
use meshrel::netgen::{ladder, random_dodag, random_geometric, BandLaw, GeoParams, RandomDagParams, Wiring, GEO_SINK};
use meshrel::sim::{simulate, ForwardingModel, TrialConfig};
use meshrel::urf::{rrurf_sink, urf_bounds, urf_sink};
use meshrel::{Error, ErrorKind, NodeId};

#[derive(Parser)]
#[command(name = "meshrel", version, about = "Reliability metrics and topology builders for mesh routing DAGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a connectivity graph or a routing DAG.
    Gen(GenArgs),
    /// Build a routing DAG from an undirected connectivity graph.
    Build(BuildArgs),
    /// Per-node reliability table as CSV.
    Metric(MetricArgs),
    /// Monte-Carlo delivery estimates as CSV.
    Simulate(SimArgs),
    /// Compare the three builders over a batch of random graphs.
    Experiment(ExperimentArgs),
    /// Check a graph file for structural problems.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Width x length relay grid between a source and a sink, e.g. 3x6.
    #[arg(long, value_name = "WxL", conflicts_with = "dag")]
    ladder: Option<String>,
    /// Random DODAG with this many nodes.
    #[arg(long, value_name = "N")]
    dag: Option<usize>,
    /// Link probability of ladder links.
    #[arg(long, default_value_t = 0.7)]
    p: f64,
    #[arg(long, value_enum, default_value_t = WiringArg::Interleaved)]
    wiring: WiringArg,
    #[arg(long, default_value_t = 3)]
    max_out: usize,
    #[arg(long)]
    max_edges: Option<usize>,
    /// Node count of a geometric graph.
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 10.0)]
    side: f64,
    #[arg(long, default_value_t = 0.5)]
    min_spacing: f64,
    /// Pairs closer than this always link.
    #[arg(long, default_value_t = 2.0)]
    r1: f64,
    /// Pairs farther than this never link.
    #[arg(long, default_value_t = 3.0)]
    r2: f64,
    #[arg(long, default_value_t = 0.7)]
    p_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    p_hi: f64,
    /// Link chance between r1 and r2: "linear" or a fixed probability.
    #[arg(long, default_value = "linear")]
    band: String,
    /// Required for random graphs.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WiringArg {
    Interleaved,
    Disjoint,
}

#[derive(Args)]
struct BuildArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    /// "start:step:end" or a comma list.
    #[arg(long, default_value = "1:-0.01:0")]
    thresholds: String,
    #[arg(long, default_value_t = 100)]
    rounds: u32,
    #[arg(long, value_enum, default_value_t = SelectArg::Lex)]
    select: SelectArg,
    #[arg(long, value_enum, default_value_t = CrossArg::EveryRound)]
    cross_links: CrossArg,
    /// Also write per-node hop, join round and URF as CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Minhop,
    UrfGg,
    UrfDt,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    Exact,
    Lex,
}

impl From<SelectArg> for SelectMode {
    fn from(s: SelectArg) -> Self {
        match s {
            SelectArg::Exact => SelectMode::Exact,
            SelectArg::Lex => SelectMode::Lex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CrossArg {
    EveryRound,
    AtEnd,
    Never,
}

impl From<CrossArg> for CrossLinks {
    fn from(c: CrossArg) -> Self {
        match c {
            CrossArg::EveryRound => CrossLinks::EveryRound,
            CrossArg::AtEnd => CrossLinks::AtEnd,
            CrossArg::Never => CrossLinks::Never,
        }
    }
}

#[derive(Args)]
struct MetricArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Flooding source; defaults to the file's source.
    #[arg(long)]
    source: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CUT_CAP)]
    cut_cap: usize,
    /// Print every cut step of the flooding sweep to stderr.
    #[arg(long)]
    trace: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Fpp,
    Urf,
    Rrurf,
    Bounds,
}

#[derive(Args)]
struct SimArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Defaults to the file's source.
    #[arg(long)]
    source: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Flood,
    Urf,
    Rr,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    runs: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "1:-0.01:0")]
    thresholds: String,
    #[arg(long, default_value_t = 100)]
    rounds: u32,
    #[arg(long, value_enum, default_value_t = SelectArg::Lex)]
    select: SelectArg,
    #[arg(long, value_enum, default_value_t = CrossArg::EveryRound)]
    cross_links: CrossArg,
    /// Also score every node with the flooding metric.
    #[arg(long)]
    with_fpp: bool,
    #[arg(long, default_value_t = DEFAULT_CUT_CAP)]
    cut_cap: usize,
}

#[derive(Args)]
struct ValidateArgs {
    input: PathBuf,
}

/// Exit code and stable code word for each error class.
fn classify(kind: ErrorKind) -> (u8, &'static str) {
    match kind {
        ErrorKind::Validation => (2, "validation"),
        ErrorKind::ResourceCap => (3, "resource-cap"),
        ErrorKind::Io => (4, "io"),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn node_arg(file: &GraphFile, given: Option<&str>) -> Result<NodeId, Error> {
    match given {
        Some(label) => file.find(label).ok_or_else(|| Error::Params(format!("no node labelled {label:?}"))),
        None => file.source.ok_or_else(|| Error::Params("file has no source; pass --source".into())),
    }
}

fn gen(args: GenArgs) -> Result<(), Error> {
    let need_seed = || args.seed.ok_or_else(|| Error::Params("random graphs need --seed".into()));
    let file = if let Some(shape) = &args.ladder {
        let (w, l) = shape
            .split_once('x')
            .and_then(|(w, l)| Some((w.parse().ok()?, l.parse().ok()?)))
            .ok_or_else(|| Error::Params(format!("ladder shape {shape:?} is not WxL")))?;
        let wiring = match args.wiring {
            WiringArg::Interleaved => Wiring::Interleaved,
            WiringArg::Disjoint => Wiring::Disjoint,
        };
        GraphFile::from_dodag(&ladder(w, l, args.p, wiring)?, None)
    } else if let Some(nodes) = args.dag {
        let params = RandomDagParams {
            nodes,
            max_out_degree: args.max_out,
            max_edges: args.max_edges,
            p_lo: args.p_lo,
            p_hi: args.p_hi,
        };
        GraphFile::from_dodag(&random_dodag(&params, need_seed()?)?, None)
    } else {
        let band = match args.band.as_str() {
            "linear" => BandLaw::Linear,
            q => BandLaw::Constant(q.parse().map_err(|_| Error::Params(format!("bad band law {q:?}")))?),
        };
        let params = GeoParams {
            nodes: args.n,
            side: args.side,
            min_spacing: args.min_spacing,
            always_radius: args.r1,
            never_radius: args.r2,
            p_lo: args.p_lo,
            p_hi: args.p_hi,
            band,
            seed: need_seed()?,
        };
        GraphFile::from_connectivity(&random_geometric(&params)?, GEO_SINK)
    };
    emit(args.output.as_deref(), &file.to_canonical_json())
}

fn build(args: BuildArgs) -> Result<(), Error> {
    let file = GraphFile::read(&args.input)?;
    let cg = file.to_connectivity()?;
    let b = file.sink;
    let mode = args.select.into();
    let built = match args.algo {
        Algo::Minhop => build_minhop(&cg, b)?,
        Algo::UrfGg => build_urf_gg(&cg, b, mode)?,
        Algo::UrfDt => {
            let schedule = ThresholdSchedule::parse(&args.thresholds, args.rounds)?;
            build_urf_dt(&cg, b, &schedule, DtOptions { mode, cross_links: args.cross_links.into() })?
        }
    };
    let unjoined = built.unjoined();
    if !unjoined.is_empty() {
        let labels: Vec<String> = unjoined.iter().map(|&v| file.label(v).to_string()).collect();
        eprintln!("meshrel: warning: {} node(s) never joined: {}", unjoined.len(), labels.join(" "));
    }
    let mut out = GraphFile::from_dodag(&built.topology, Some(&file.positions()));
    out.nodes = file.nodes.clone();
    if let Some(path) = &args.report {
        let mut csv = String::from("node,hop,join_round,urf\n");
        for v in 0..cg.node_count() {
            let opt = |x: Option<u32>| x.map_or_else(String::new, |h| h.to_string());
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                file.label(v),
                opt(built.hop[v]),
                opt(built.join_round[v]),
                report_float(built.rho[v])
            );
        }
        write_atomic(path, csv.as_bytes())?;
    }
    emit(args.output.as_deref(), &out.to_canonical_json())
}

fn metric(args: MetricArgs) -> Result<(), Error> {
    let file = GraphFile::read(&args.input)?;
    let mut csv = String::new();
    match args.kind {
        Kind::Fpp => {
            if file.is_interval() {
                return Err(Error::Params("fpp needs point probabilities; use --kind bounds for interval files".into()));
            }
            let g = file.to_dodag()?;
            let a = node_arg(&file, args.source.as_deref())?;
            let outcome = fpp_fast_traced(&g, a, args.cut_cap, |s| {
                if args.trace {
                    let cut: Vec<String> = s.cut.iter().map(|&v| file.label(v).to_string()).collect();
                    eprintln!(
                        "step {} added {} peak {} cut [{}] mass {}",
                        s.step,
                        file.label(s.added),
                        s.peak,
                        cut.join(" "),
                        report_float(s.pmf_sum())
                    );
                }
            })?;
            if args.trace {
                eprintln!("max cut {}", outcome.max_cut);
            }
            csv.push_str("node,fpp\n");
            for (v, x) in outcome.table.values.iter().enumerate() {
                let _ = writeln!(csv, "{},{}", file.label(v), report_float(*x));
            }
        }
        Kind::Urf | Kind::Rrurf => {
            let g = file.to_dodag()?;
            let table = if args.kind == Kind::Urf { urf_sink(&g)? } else { rrurf_sink(&g)? };
            let _ = writeln!(csv, "node,{}", table.kind.name());
            for (v, x) in table.values.iter().enumerate() {
                let _ = writeln!(csv, "{},{}", file.label(v), report_float(*x));
            }
        }
        Kind::Bounds => {
            let g = file.to_interval()?;
            let urf = urf_bounds(&g)?;
            for &v in &urf.overweight {
                eprintln!("meshrel: warning: upper weights at node {} sum above 1; urf_hi is loose", file.label(v));
            }
            let source = match args.source.as_deref() {
                Some(_) => Some(node_arg(&file, args.source.as_deref())?),
                None => file.source,
            };
            let fpp = source.map(|a| fpp_bounds(&g, a, args.cut_cap)).transpose()?;
            csv.push_str(if fpp.is_some() { "node,fpp_lo,fpp_hi,urf_lo,urf_hi\n" } else { "node,urf_lo,urf_hi\n" });
            for v in 0..g.node_count() {
                let _ = write!(csv, "{}", file.label(v));
                if let Some(f) = &fpp {
                    let _ = write!(csv, ",{},{}", report_float(f.lo.get(v)), report_float(f.hi.get(v)));
                }
                let _ = writeln!(csv, ",{},{}", report_float(urf.lo.get(v)), report_float(urf.hi.get(v)));
            }
        }
    }
    emit(args.output.as_deref(), &csv)
}

fn simulate_cmd(args: SimArgs) -> Result<(), Error> {
    let file = GraphFile::read(&args.input)?;
    let g = file.to_dodag()?;
    let model = match args.model {
        Model::Flood => ForwardingModel::Flood,
        Model::Urf => ForwardingModel::UrfRandomOrder,
        Model::Rr => ForwardingModel::RrOrdered,
    };
    let source = node_arg(&file, args.source.as_deref())?;
    let table = simulate(&g, TrialConfig { trials: args.trials, seed: args.seed, model, source })?;
    let mut csv = String::from("node,hits,trials,estimate,std_error\n");
    for (v, e) in table.nodes.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            file.label(v),
            e.hits,
            e.trials,
            report_float(e.value()),
            report_float(e.std_error())
        );
    }
    emit(args.output.as_deref(), &csv)
}

fn experiment(args: ExperimentArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::new(args.runs, args.seed);
    cfg.schedule = ThresholdSchedule::parse(&args.thresholds, args.rounds)?;
    cfg.select = args.select.into();
    cfg.dt.cross_links = args.cross_links.into();
    cfg.with_fpp = args.with_fpp;
    cfg.cut_cap = args.cut_cap;
    let rows = run_experiment(&cfg)?;
    let rows_text = rows_csv(&rows);
    let agg_text = aggregate_csv(&aggregate(&rows));
    self_check(&rows_text, &agg_text)?;
    std::fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("rows.csv"), rows_text.as_bytes())?;
    write_atomic(&args.out.join("aggregate.csv"), agg_text.as_bytes())?;
    print!("{agg_text}");
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Error> {
    let file = GraphFile::read(&args.input)?;
    if !file.directed {
        let cg = file.to_connectivity()?;
        if !cg.is_connected() {
            return Err(Error::Params("connectivity graph is not connected".into()));
        }
        println!("ok: {} nodes, {} links, connected", cg.node_count(), cg.links().len());
        return Ok(());
    }
    let g = file.to_interval()?;
    let report = g.lower().validate();
    if report.is_ok() {
        println!("ok: {} nodes, {} edges, acyclic", g.node_count(), g.lower().edges().len());
        return Ok(());
    }
    for v in &report.violations {
        println!("violation: {v}");
    }
    Err(Error::Params(format!("{} violation(s)", report.violations.len())))
}

fn init_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("MESHREL_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| Error::Params(format!("MESHREL_THREADS={raw:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Params(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Error> {
    init_threads()?;
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Build(a) => build(a),
        Command::Metric(a) => metric(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (status, code) = classify(e.kind());
            eprintln!("meshrel: error[{code}]: {e}");
            ExitCode::from(status)
        }
    }
}
