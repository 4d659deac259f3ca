//! Command-line front end.
//!
//! Subcommands: `run` (execute a query), `oracle` (brute-force reference),
//! `bench-intersect` (kernel microbenchmark, CSV), `estimate` (request
//! model vs. measured counters), `qvos` (list plannable vertex orders).
//!
//! Reports are `key: value` lines; only lines starting with `elapsed`
//! vary between identical runs. Exit codes: 10 I/O, 11 unparsable or
//! invalid input files, 12 unplannable order or bad configuration,
//! 13 reference-enumeration scale refusal.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use matchline::engine::{run_parallel, ParallelConfig, ParallelRun};
use matchline::graph::{
    build_csr, load_edge_list, make_undirected, read_csr, write_csr, CsrGraph, GraphError, SetRef,
    DUMP_MAGIC,
};
use matchline::intersect::{
    allcompare_intersect, fetch, leapfrog_intersect, merge_intersect, FetchCache, MemStats,
    SliceStore, MAX_INTERSECT_SETS,
};
use matchline::oracle::{enumerate, OracleError};
use matchline::perf::{extension_requests, relative_error, source_requests, step_shape};
use matchline::query::{
    default_qvo, enumerate_qvos, parse_query, plan_query, MatchMode, QueryError, QueryGraph,
    QueryPlan, Qvo,
};
use matchline::synth::set_family;
use matchline::EngineError;

const EXIT_IO: i32 = 10;
const EXIT_PARSE: i32 = 11;
const EXIT_CONFIG: i32 = 12;
const EXIT_SCALE: i32 = 13;

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> CliError {
        CliError { code, message: message.into() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::new(EXIT_IO, e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> CliError {
        let code = match e {
            GraphError::Io(_) => EXIT_IO,
            GraphError::Parse { .. } | GraphError::Dump(_) => EXIT_PARSE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<QueryError> for CliError {
    fn from(e: QueryError) -> CliError {
        let code = match e {
            QueryError::Parse { .. }
            | QueryError::Directive { .. }
            | QueryError::SelfLoop(_)
            | QueryError::TooSmall
            | QueryError::TooDeep { .. }
            | QueryError::Disconnected(_) => EXIT_PARSE,
            QueryError::BadOrder(_)
            | QueryError::ReciprocalFirstEdge { .. }
            | QueryError::TooManyInputs { .. }
            | QueryError::NoPlannableOrder => EXIT_CONFIG,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> CliError {
        CliError::new(EXIT_CONFIG, e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> CliError {
        CliError::new(EXIT_SCALE, e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "matchline",
    version,
    about = "Streaming subgraph matching with line-granular memory accounting"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a query through the matching pipeline.
    Run(RunArgs),
    /// Enumerate matchings with the brute-force reference (small graphs).
    Oracle(OracleArgs),
    /// Microbenchmark an intersection kernel; prints one CSV row.
    BenchIntersect(BenchArgs),
    /// Compare the closed-form request model against measured counters.
    Estimate(EstimateArgs),
    /// List the plannable vertex orders of a query.
    Qvos(QvosArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Hom,
    Iso,
}

#[derive(Args)]
struct QueryInput {
    /// Graph file: text edge list or binary dump (probed by magic bytes).
    #[arg(short = 'g', long)]
    graph: PathBuf,
    /// Query file (edge list plus %directed / %mode / %qvo directives).
    #[arg(short = 'q', long)]
    query: PathBuf,
    /// Replace the graph by its symmetric closure after loading.
    #[arg(long)]
    symmetrize: bool,
    /// Override the query file's matching mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Override the query file's edge directedness.
    #[arg(long)]
    directed: Option<bool>,
    /// Vertex order to run, e.g. "0,2,1" (overrides the file's %qvo).
    #[arg(long)]
    qvo: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: QueryInput,
    /// Try this many plannable orders on a sample and keep the cheapest.
    #[arg(long, value_name = "BUDGET", conflicts_with = "qvo")]
    auto_qvo: Option<usize>,
    /// Concurrent pipeline instances.
    #[arg(long, default_value_t = 4)]
    instances: u32,
    /// Relabeling stride applied before partitioning (multi-instance only).
    #[arg(long, default_value_t = 100)]
    stride: u32,
    /// Values per memory line.
    #[arg(long, default_value_t = 16)]
    line_width: u32,
    /// Disable the single-entry fetch caches.
    #[arg(long)]
    no_caching: bool,
    /// Disable degree-threshold pruning.
    #[arg(long)]
    no_pruning: bool,
    /// Count matchings without materializing tuples.
    #[arg(long)]
    count_only: bool,
    /// Print each matching as a `match:` line after the report.
    #[arg(long)]
    print_matchings: bool,
    /// Write the loaded (and possibly symmetrized) graph as a binary dump.
    #[arg(long, value_name = "PATH")]
    save_csr: Option<PathBuf>,
    /// Seed for the order-selection sample.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: QueryInput,
    /// Print each matching as a `match:` line after the report.
    #[arg(long)]
    print_matchings: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Intersection kernel to run.
    #[arg(long, value_enum, default_value_t = KernelArg::Allcompare)]
    kernel: KernelArg,
    /// Number of sets per intersection (2 to 4).
    #[arg(long, default_value_t = 2)]
    sets: usize,
    /// Values per set.
    #[arg(long, default_value_t = 1024)]
    size: u32,
    /// Fraction of each set shared by all sets (the intersection).
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, default_value_t = 16)]
    line_width: u32,
    /// Probability that a repetition reuses the previous sets (cache hits).
    #[arg(long, default_value_t = 0.0)]
    cache_hit_frac: f64,
    /// Repetitions to accumulate.
    #[arg(long, default_value_t = 100)]
    reps: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Omit the CSV header row.
    #[arg(long)]
    no_header: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    /// Block-wise all-pairs compare over lines (the pipeline's kernel).
    Allcompare,
    /// Element-wise search-and-sync rounds.
    Leapfrog,
    /// Plain k-way sorted merge (reference).
    Merge,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: QueryInput,
    #[arg(long, default_value_t = 16)]
    line_width: u32,
}

#[derive(Args)]
struct QvosArgs {
    /// Query file.
    #[arg(short = 'q', long)]
    query: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    directed: Option<bool>,
    /// Also pick the cheapest order by sampling this graph.
    #[arg(short = 'g', long)]
    graph: Option<PathBuf>,
    /// Orders to sample when picking the cheapest.
    #[arg(long, default_value_t = 8)]
    budget: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    symmetrize: bool,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Oracle(args) => cmd_oracle(args),
        Cmd::BenchIntersect(args) => cmd_bench(args),
        Cmd::Estimate(args) => cmd_estimate(args),
        Cmd::Qvos(args) => cmd_qvos(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

/// Loads a graph file, telling binary dumps from text edge lists by the
/// leading magic bytes.
fn load_graph(path: &Path, symmetrize: bool) -> Result<CsrGraph, CliError> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 4];
    let got = file.read(&mut magic)?;
    file.seek(SeekFrom::Start(0))?;
    let g = if got == 4 && &magic == DUMP_MAGIC {
        read_csr(BufReader::new(file))?
    } else {
        build_csr(&load_edge_list(BufReader::new(file))?)
    };
    Ok(if symmetrize { make_undirected(&g) } else { g })
}

/// Loads and applies the common query options: file, overrides, order.
fn load_query(input: &QueryInput) -> Result<(QueryGraph, Option<Vec<u32>>), CliError> {
    let file = File::open(&input.query)?;
    let parsed = parse_query(BufReader::new(file))?;
    let mut q = parsed.graph;
    if let Some(mode) = input.mode {
        q = q.with_mode(match mode {
            ModeArg::Hom => MatchMode::Homomorphism,
            ModeArg::Iso => MatchMode::Isomorphism,
        });
    }
    if let Some(directed) = input.directed {
        q = q.with_directed(directed)?;
    }
    // Re-derive the order against the final graph: overrides may have
    // changed which orders are valid.
    let order = if let Some(spec) = &input.qvo {
        Some(parse_order(spec)?)
    } else {
        parsed.qvo.map(|qvo| qvo.order().to_vec())
    };
    Ok((q, order))
}

fn parse_order(spec: &str) -> Result<Vec<u32>, CliError> {
    spec.split(',')
        .map(|s| s.trim().parse::<u32>())
        .collect::<Result<Vec<u32>, _>>()
        .map_err(|_| CliError::new(EXIT_CONFIG, format!("invalid vertex order: {spec:?}")))
}

/// Resolves the order to run: explicit > sampled best > file > default.
fn resolve_plan(
    g: &CsrGraph,
    q: &QueryGraph,
    order: Option<Vec<u32>>,
    auto_budget: Option<usize>,
    seed: u64,
) -> Result<(Qvo, QueryPlan), CliError> {
    if let Some(order) = order {
        let qvo = Qvo::new(q, order)?;
        let plan = plan_query(q, &qvo)?;
        return Ok((qvo, plan));
    }
    if let Some(budget) = auto_budget {
        return Ok(matchline::engine::choose_best_qvo(g, q, budget, seed)?);
    }
    Ok(default_qvo(q)?)
}

fn mode_name(mode: MatchMode) -> &'static str {
    match mode {
        MatchMode::Homomorphism => "hom",
        MatchMode::Isomorphism => "iso",
    }
}

fn on_off(v: bool) -> &'static str {
    if v {
        "on"
    } else {
        "off"
    }
}

fn print_run_report(
    run: &ParallelRun,
    g: &CsrGraph,
    q: &QueryGraph,
    qvo: &Qvo,
    cfg: &ParallelConfig,
) {
    println!("matchings: {}", run.results.count());
    println!("graph_vertices: {}", g.num_vertices());
    println!("graph_edges: {}", g.num_edges());
    println!("query_vertices: {}", q.num_vertices());
    println!("query_edges: {}", q.edges().len());
    println!("mode: {}", mode_name(q.mode()));
    println!("directed: {}", q.directed());
    println!("qvo: {qvo}");
    println!("instances: {}", cfg.instances);
    println!("stride: {}", cfg.stride);
    println!("line_width: {}", cfg.line_width);
    println!("caching: {}", on_off(cfg.caching));
    println!("pruning: {}", on_off(cfg.pruning));
    let mut total = MemStats::default();
    for s in &run.per_instance {
        total.absorb(&s.total_mem());
    }
    println!("pointer_requests: {}", total.pointer_requests);
    println!("line_requests: {}", total.line_requests);
    println!("cache_hits: {}", total.cache_hits);
    println!("cache_misses: {}", total.cache_misses);
    for (i, s) in run.per_instance.iter().enumerate() {
        let mut levels = vec![s.source.matchings.to_string()];
        levels.extend(s.extensions.iter().map(|e| e.matchings.to_string()));
        let mem = s.total_mem();
        println!("instance_{i}_matchings_by_level: {}", levels.join(","));
        println!("instance_{i}_pointer_requests: {}", mem.pointer_requests);
        println!("instance_{i}_line_requests: {}", mem.line_requests);
        println!("instance_{i}_cache_hits: {}", mem.cache_hits);
        println!("instance_{i}_cache_misses: {}", mem.cache_misses);
    }
    println!("elapsed_ms: {:.3}", run.elapsed.as_secs_f64() * 1e3);
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let g = load_graph(&args.input.graph, args.input.symmetrize)?;
    let (q, order) = load_query(&args.input)?;
    let (qvo, plan) = resolve_plan(&g, &q, order, args.auto_qvo, args.seed)?;
    if let Some(path) = &args.save_csr {
        let file = File::create(path)?;
        write_csr(&g, BufWriter::new(file))?;
    }
    let cfg = ParallelConfig {
        instances: args.instances,
        stride: args.stride,
        line_width: args.line_width,
        caching: !args.no_caching,
        pruning: !args.no_pruning,
        count_only: args.count_only,
    };
    let run = run_parallel(&g, &plan, &cfg)?;
    print_run_report(&run, &g, &q, &qvo, &cfg);
    if args.print_matchings {
        for t in run.results.tuples() {
            let parts: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            println!("match: {}", parts.join(","));
        }
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let g = load_graph(&args.input.graph, args.input.symmetrize)?;
    let (q, order) = load_query(&args.input)?;
    let qvo = match order {
        Some(order) => Qvo::new(&q, order)?,
        None => default_qvo(&q)?.0,
    };
    let started = Instant::now();
    let results = enumerate(&g, &q, &qvo)?;
    let elapsed = started.elapsed();
    println!("matchings: {}", results.count());
    println!("graph_vertices: {}", g.num_vertices());
    println!("graph_edges: {}", g.num_edges());
    println!("mode: {}", mode_name(q.mode()));
    println!("directed: {}", q.directed());
    println!("qvo: {qvo}");
    println!("elapsed_ms: {:.3}", elapsed.as_secs_f64() * 1e3);
    if args.print_matchings {
        for t in results.tuples() {
            let parts: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            println!("match: {}", parts.join(","));
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    if !(2..=MAX_INTERSECT_SETS).contains(&args.sets) {
        return Err(CliError::new(
            EXIT_CONFIG,
            format!("--sets must be between 2 and {MAX_INTERSECT_SETS}"),
        ));
    }
    if args.size == 0 || args.reps == 0 {
        return Err(CliError::new(EXIT_CONFIG, "--size and --reps must be positive"));
    }
    if !(0.0..=1.0).contains(&args.overlap) || !(0.0..=1.0).contains(&args.cache_hit_frac) {
        return Err(CliError::new(
            EXIT_CONFIG,
            "--overlap and --cache-hit-frac must be within [0, 1]",
        ));
    }

    // Schedule which repetition reuses the previous set group (a reuse makes
    // every per-spot fetch a cache hit) and which advances to a fresh group.
    let mut schedule_rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut schedule = Vec::with_capacity(args.reps as usize);
    let mut group = 0usize;
    schedule.push(0usize);
    for _ in 1..args.reps {
        if !schedule_rng.gen_bool(args.cache_hit_frac) {
            group += 1;
        }
        schedule.push(group);
    }
    let groups = group + 1;

    // All groups live in one arena so (array, left, size) keys are unique.
    let mut arena: Vec<u32> = Vec::new();
    let mut group_sets: Vec<Vec<SetRef>> = Vec::with_capacity(groups);
    let mut expected_output = 0;
    for gidx in 0..groups {
        let fam = set_family(args.sets, args.size, args.overlap, args.seed + gidx as u64);
        let base = arena.len() as u32;
        arena.extend_from_slice(&fam.arena);
        group_sets
            .push(fam.sets.iter().map(|s| SetRef::new(s.array, s.left + base, s.size)).collect());
        expected_output = fam.common;
    }
    let store = SliceStore(&arena);

    let mut stats = MemStats::default();
    let mut caches: Vec<FetchCache> = vec![FetchCache::new(true); MAX_INTERSECT_SETS];
    let mut compare_steps: u64 = 0;
    let mut output_size: u64 = 0;
    let started = Instant::now();
    for &gidx in &schedule {
        let sets = &group_sets[gidx];
        match args.kernel {
            KernelArg::Allcompare => {
                let out =
                    allcompare_intersect(&store, sets, args.line_width, &mut caches, &mut stats)
                        .expect("set count validated above");
                compare_steps += out.pipeline_steps();
                output_size = out.values.len() as u64;
            }
            KernelArg::Leapfrog | KernelArg::Merge => {
                let fetched: Vec<Vec<u32>> = sets
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| fetch(&store, s, args.line_width, &mut caches[i], &mut stats))
                    .collect();
                let views: Vec<&[u32]> = fetched.iter().map(|v| v.as_slice()).collect();
                match args.kernel {
                    KernelArg::Leapfrog => {
                        let (values, rounds) = leapfrog_intersect(&views);
                        compare_steps += rounds;
                        output_size = values.len() as u64;
                    }
                    _ => {
                        output_size = merge_intersect(&views).len() as u64;
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    debug_assert_eq!(output_size, u64::from(expected_output));

    let kernel = match args.kernel {
        KernelArg::Allcompare => "allcompare",
        KernelArg::Leapfrog => "leapfrog",
        KernelArg::Merge => "merge",
    };
    if !args.no_header {
        println!(
            "kernel,sets,size,overlap,line_width,cache_hit_frac,reps,output_size,\
             compare_steps,line_requests,cache_hits,cache_misses,elapsed_ns"
        );
    }
    println!(
        "{kernel},{},{},{:.2},{},{:.2},{},{output_size},{compare_steps},{},{},{},{}",
        args.sets,
        args.size,
        args.overlap,
        args.line_width,
        args.cache_hit_frac,
        args.reps,
        stats.line_requests,
        stats.cache_hits,
        stats.cache_misses,
        elapsed.as_nanos(),
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let g = load_graph(&args.input.graph, args.input.symmetrize)?;
    let (q, order) = load_query(&args.input)?;
    let (qvo, plan) = resolve_plan(&g, &q, order, None, 1)?;

    // One instance, caches off: the model assumes cold line-granular reads.
    let cfg = ParallelConfig {
        instances: 1,
        stride: 1,
        line_width: args.line_width,
        caching: false,
        pruning: true,
        count_only: true,
    };
    let run = run_parallel(&g, &plan, &cfg)?;
    let stats = &run.per_instance[0];

    let n = u64::from(g.num_vertices());
    let e = u64::from(g.num_edges());
    let avg_degree = if n == 0 { 0.0 } else { e as f64 / n as f64 };
    println!("qvo: {qvo}");
    println!("line_width: {}", args.line_width);
    println!("avg_degree: {avg_degree:.4}");

    let src_pred = source_requests(n, e, args.line_width);
    let src_meas = stats.source.mem.total_requests();
    print_stage("source", src_pred as f64, src_meas);

    let mut inputs = stats.source.matchings;
    for (i, step) in plan.steps.iter().enumerate() {
        let (f, s) = step_shape(step);
        let pred = extension_requests(inputs, f, s, avg_degree, args.line_width)
            .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
        let meas = stats.extensions[i].mem.total_requests();
        println!("level_{}_inputs: {inputs}", i + 2);
        print_stage(&format!("level_{}", i + 2), pred, meas);
        inputs = stats.extensions[i].matchings;
    }
    println!("elapsed_ms: {:.3}", run.elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn print_stage(name: &str, predicted: f64, measured: u64) {
    println!("{name}_predicted: {predicted:.4}");
    println!("{name}_measured: {measured}");
    match relative_error(measured as f64, predicted) {
        Some(err) => println!("{name}_rel_error: {err:.4}"),
        None => println!("{name}_rel_error: n/a"),
    }
}

fn cmd_qvos(args: QvosArgs) -> Result<(), CliError> {
    let input = QueryInput {
        graph: PathBuf::new(),
        query: args.query.clone(),
        symmetrize: false,
        mode: args.mode,
        directed: args.directed,
        qvo: None,
    };
    let (q, _) = load_query(&input)?;
    let orders = enumerate_qvos(&q);
    let mut plannable = 0;
    for qvo in &orders {
        if plan_query(&q, qvo).is_ok() {
            println!("order: {qvo}");
            plannable += 1;
        }
    }
    println!("plannable: {plannable}");
    if let Some(path) = &args.graph {
        let g = load_graph(path, args.symmetrize)?;
        let (best, _) = matchline::engine::choose_best_qvo(&g, &q, args.budget, args.seed)?;
        println!("best: {best}");
    }
    Ok(())
}
