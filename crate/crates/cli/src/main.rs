//! Experiment runner: dispatches to the simulator crate, validates
//! parameters, and writes JSON reports and CSV series.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when a numerical
//! invariant fails at runtime (norm drift, locality violation, a failed
//! divergence chain, a failed clustering audit, or a lost protocol sync).

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use config::{resolve, ConfigMap};
use spatialsearch::clustersearch::{
    audit_goodness, build_cluster_tree, default_thresholds, run_irregular_search, search_scattered,
    ClusterError, ClusterParams,
};
use spatialsearch::commsim::run_disjointness;
use spatialsearch::graph::{dimension_constant, make_grid, make_starfish, starfish_legs, Graph, Grid, Vertex};
use spatialsearch::gridsearch::{
    diameter_search_script, plan_levels, search_k, search_unique, GridParamError, GridParams,
    GridSearcher, SearchError, UnknownSearchConfig,
};
use spatialsearch::hybridlab::{
    grid_shell_regions, hybrid_divergences, select_min_region, trace_query_magnitudes,
    verify_chain, RegionPartition,
};
use spatialsearch::locality::{
    check_c_local, check_h_local, check_z_local, DenseUnitary, HVerdict,
};
use spatialsearch::matrix::CMat;
use spatialsearch::report::CostReport;
use spatialsearch::rng::SeedSplitter;
use spatialsearch::simcore::{BasisState, Input, LocalStep, SimError};

/// Environment variable naming the default output directory for relative
/// `--out` paths.
pub const OUT_DIR_ENV: &str = "SPATIALSEARCH_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn numeric(msg: impl Into<String>) -> Self {
        CliError::Numeric(msg.into())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Params(p) => CliError::Config(p.to_string()),
            SearchError::Graph(g) => CliError::Config(g.to_string()),
            SearchError::Sim(s) => CliError::Numeric(s.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<GridParamError> for CliError {
    fn from(e: GridParamError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<spatialsearch::graph::GraphError> for CliError {
    fn from(e: spatialsearch::graph::GraphError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::Sim(s) => CliError::Numeric(s.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "spatialsearch", about = "Quantum robot search experiments on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recursive amplified search on a hypercube grid.
    SearchGrid(SearchGridArgs),
    /// Hierarchical cluster search on an irregular graph.
    SearchIrregular(SearchIrregularArgs),
    /// Scattered-bit cluster search over a potential set.
    SearchScattered(SearchScatteredArgs),
    /// Z / C / H locality checks of an operator against a graph.
    VerifyLocality(VerifyLocalityArgs),
    /// Predicted vs simulated amplification probabilities as CSV.
    AmplifyDemo(AmplifyDemoArgs),
    /// Hybrid-argument instrumentation: query magnitudes, divergences, chain.
    HybridLowerbound(HybridArgs),
    /// Two-party disjointness protocol over the cube embedding.
    Disjointness(DisjointnessArgs),
    /// Parameter sweeps emitting one CSV row per point.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SearchGridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    /// Marked vertices: `3,17` (1-indexed) or `random:k`.
    #[arg(long)]
    marked: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    l0: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchIrregularArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Line-based graph file (`n`, then 1-indexed `u v` edges).
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Convenience alternative to --graph-file: a d-dimensional grid side.
    #[arg(long)]
    grid_side: Option<usize>,
    #[arg(long)]
    grid_d: Option<usize>,
    /// Dimension exponent of the ball-growth test (may be fractional).
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    marked: Option<String>,
    #[arg(long)]
    n1: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    boost_reps: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchScatteredArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long)]
    grid_side: Option<usize>,
    #[arg(long)]
    grid_d: Option<usize>,
    #[arg(long)]
    d: Option<f64>,
    /// Potential vertices: `1,5,9` (1-indexed) or `random:h`.
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Marked vertices (must lie in the potential set): list or `random:k`.
    #[arg(long)]
    marked: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyLocalityArgs {
    /// Dense operator (`dim` header, then `row col re im`) for modes z/h, or
    /// the block-structured step format for mode c.
    #[arg(long)]
    matrix_file: PathBuf,
    #[arg(long)]
    graph_file: PathBuf,
    #[arg(long)]
    mode: String,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct AmplifyDemoArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HybridArgs {
    /// Instance family: `starfish` or `grid`.
    #[arg(long)]
    graph: String,
    /// Instrumented algorithm: `diameter` or `grid-search`.
    #[arg(long)]
    algo: String,
    #[arg(long, default_value_t = 6)]
    legs: usize,
    #[arg(long, default_value_t = 2)]
    leg_len: usize,
    #[arg(long, default_value_t = 4)]
    side: usize,
    #[arg(long, default_value_t = 2)]
    k_side: usize,
    /// Switch-stride constant c (stride = max(1, floor(c * scale))).
    #[arg(long, default_value_t = 0.25)]
    stride_c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DisjointnessArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Bit string (`0110...`) or `random:k`.
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numerical invariant failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SearchGrid(args) => search_grid(args),
        Command::SearchIrregular(args) => search_irregular(args),
        Command::SearchScattered(args) => search_scattered_cmd(args),
        Command::VerifyLocality(args) => verify_locality(args),
        Command::AmplifyDemo(args) => amplify_demo(args),
        Command::HybridLowerbound(args) => hybrid_lowerbound(args),
        Command::Disjointness(args) => disjointness(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn out_path(requested: Option<PathBuf>) -> Option<PathBuf> {
    let path = requested?;
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            return Some(Path::new(&dir).join(path));
        }
    }
    Some(path)
}

fn write_output(path: Option<PathBuf>, contents: &str) -> Result<(), CliError> {
    match out_path(path) {
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| CliError::config(format!("cannot create {}: {e}", parent.display())))?;
                }
            }
            std::fs::write(&p, contents)
                .map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Parses `3,17` (1-indexed) or `random:k` into 0-indexed vertices.
fn parse_vertex_set(spec: &str, n: usize, seed: u64, stream: &str) -> Result<Vec<Vertex>, CliError> {
    if let Some(k) = spec.strip_prefix("random:") {
        let k: usize = k
            .parse()
            .map_err(|_| CliError::config(format!("bad random count in {spec:?}")))?;
        if k > n {
            return Err(CliError::config(format!("cannot pick {k} of {n} vertices")));
        }
        let mut all: Vec<Vertex> = (0..n as Vertex).collect();
        let mut rng = SeedSplitter::new(seed).stream(stream);
        use rand::seq::SliceRandom;
        all.shuffle(&mut rng);
        let mut picked: Vec<Vertex> = all.into_iter().take(k).collect();
        picked.sort_unstable();
        return Ok(picked);
    }
    if spec.trim().is_empty() || spec.trim() == "none" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for tok in spec.split(',') {
        let label: usize = tok
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("bad vertex label {tok:?}")))?;
        if label == 0 || label > n {
            return Err(CliError::config(format!(
                "vertex label {label} outside 1..={n}"
            )));
        }
        out.push((label - 1) as Vertex);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Parses a bit string or `random:k` into an input.
fn parse_bits(spec: &str, n: usize, seed: u64, stream: &str) -> Result<Input, CliError> {
    if spec.starts_with("random:") {
        return Ok(Input::from_marked(
            n,
            &parse_vertex_set(spec, n, seed, stream)?,
        ));
    }
    let bits: Vec<bool> = spec
        .trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CliError::config(format!("bad bit {other:?} in input"))),
        })
        .collect::<Result<_, _>>()?;
    if bits.len() != n {
        return Err(CliError::config(format!(
            "input has {} bits, expected {n}",
            bits.len()
        )));
    }
    Ok(Input::from_bits(bits))
}

fn load_graph(
    graph_file: &Option<PathBuf>,
    grid_side: Option<usize>,
    grid_d: Option<usize>,
) -> Result<Graph, CliError> {
    if let Some(path) = graph_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        return Graph::from_text(&text).map_err(|e| CliError::config(e.to_string()));
    }
    let side = grid_side.ok_or_else(|| CliError::config("need --graph-file or --grid-side"))?;
    let d = grid_d.unwrap_or(3);
    Ok(make_grid(d, side)
        .map_err(|e| CliError::config(e.to_string()))?
        .graph)
}

fn echo_params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn report_json(report: &CostReport, extra: serde_json::Value) -> String {
    let mut value = serde_json::to_value(report).expect("report serializes");
    if let (serde_json::Value::Object(map), serde_json::Value::Object(extra)) =
        (&mut value, extra)
    {
        for (k, v) in extra {
            map.insert(k, v);
        }
    }
    serde_json::to_string_pretty(&value).expect("json") + "\n"
}

fn search_grid(args: SearchGridArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    cfg.check_known(&["d", "side", "marked", "beta", "mu", "l0", "seed"])?;
    let d: usize = resolve(args.d, &cfg, "d", None)?;
    let side: usize = resolve(args.side, &cfg, "side", None)?;
    let mut params = GridParams::defaults(d);
    params.beta = resolve(args.beta, &cfg, "beta", Some(params.beta))?;
    params.mu = resolve(args.mu, &cfg, "mu", Some(params.mu))?;
    params.ell0 = resolve(args.l0, &cfg, "l0", Some(params.ell0))?;
    params.validate().map_err(|e| CliError::config(e.to_string()))?;
    let seed: u64 = resolve(args.seed, &cfg, "seed", Some(0))?;
    let marked_spec: String =
        resolve(args.marked, &cfg, "marked", Some("random:1".to_string()))?;

    let grid = make_grid(d, side).map_err(|e| CliError::config(e.to_string()))?;
    let n = grid.graph.n();
    let marked = parse_vertex_set(&marked_spec, n, seed, "cli-marked")?;
    let x = Input::from_marked(n, &marked);

    let start = std::time::Instant::now();
    let outcome = if marked.len() <= 1 {
        search_unique(&grid, &x, &params, seed)?
    } else {
        search_k(&grid, &x, marked.len(), &params, seed)?
    };
    let wall = start.elapsed().as_secs_f64() * 1e3;

    // Per-level table: measured vs predicted success for the unique case.
    let plan = plan_levels(side, &params)?;
    let searcher = GridSearcher::new(plan)?;
    let stats = searcher.level_stats()?;
    let mut fold = 1.0f64;
    let mut levels = Vec::new();
    for (r, stat) in stats.iter().enumerate() {
        let mut row = serde_json::json!({
            "level": r,
            "ell": searcher.plan.levels[r].ell,
            "n": searcher.plan.levels[r].n,
            "m": stat.m,
            "steps_full_pass": stat.t_a,
            "steps_inner_pass": stat.t_u,
        });
        if r > 0 {
            let ratio =
                searcher.plan.levels[r - 1].n as f64 / searcher.plan.levels[r].n as f64;
            fold = spatialsearch::amplify::predicted_success(fold * ratio, stat.m);
            row["predicted_success"] = serde_json::json!(fold);
            if marked.len() == 1 {
                let x_emb = Input::from_marked(
                    searcher.grid.graph.n(),
                    &embed_marked(&grid, &searcher, marked[0]),
                );
                let (state, _) = searcher.run_level_from(&x_emb, r, embed_vertex(&grid, &searcher, marked[0]))?;
                let measured = state.success_probability(BasisState::answer);
                row["measured_success"] = serde_json::json!(measured);
                row["delta"] = serde_json::json!(measured - fold);
            }
        }
        levels.push(row);
    }

    let mut report = CostReport::from_outcome(
        &outcome,
        echo_params(&[
            ("task", "search-grid".into()),
            ("d", d.to_string()),
            ("side", side.to_string()),
            ("marked", marked_spec.clone()),
            ("beta", params.beta.to_string()),
            ("mu", params.mu.to_string()),
            ("l0", params.ell0.to_string()),
            ("seed", seed.to_string()),
        ]),
    );
    report.wall_time_ms = wall;
    write_output(args.out, &report_json(&report, serde_json::json!({ "levels": levels })))
}

fn embed_vertex(grid: &Grid, searcher: &GridSearcher, v: Vertex) -> Vertex {
    let c = grid.coords.to_coords(v);
    searcher.grid.coords.to_vertex(&c)
}

fn embed_marked(grid: &Grid, searcher: &GridSearcher, v: Vertex) -> Vec<Vertex> {
    vec![embed_vertex(grid, searcher, v)]
}

fn search_irregular(args: SearchIrregularArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    cfg.check_known(&[
        "graph_file", "grid_side", "grid_d", "d", "marked", "n1", "beta", "boost_reps", "seed",
    ])?;
    let graph_file = args.graph_file.or_else(|| cfg.get("graph_file").map(PathBuf::from));
    let grid_side = match args.grid_side {
        Some(s) => Some(s),
        None => cfg.get("grid_side").map(|s| s.parse()).transpose()
            .map_err(|_| CliError::config("bad grid_side"))?,
    };
    let g = load_graph(&graph_file, grid_side, args.grid_d)?;
    let d: f64 = resolve(args.d, &cfg, "d", Some(3.0))?;
    let seed: u64 = resolve(args.seed, &cfg, "seed", Some(0))?;
    let marked_spec: String = resolve(args.marked, &cfg, "marked", Some("random:1".to_string()))?;
    let marked = parse_vertex_set(&marked_spec, g.n(), seed, "cli-marked")?;
    let x = Input::from_marked(g.n(), &marked);

    let mut params = ClusterParams::default();
    params.n1 = args.n1.or_else(|| cfg.get("n1").and_then(|s| s.parse().ok()));
    params.beta = resolve(args.beta, &cfg, "beta", Some(params.beta))?;
    params.boost_reps = args
        .boost_reps
        .or_else(|| cfg.get("boost_reps").and_then(|s| s.parse().ok()));
    if !(params.beta > 2.0 / d && params.beta < 1.0) {
        return Err(CliError::config(format!(
            "beta must lie in (2/d, 1) = ({:.3}, 1), got {}",
            2.0 / d,
            params.beta
        )));
    }

    let start = std::time::Instant::now();
    let outcome = run_irregular_search(&g, &x, d, seed, &params)?;
    let wall = start.elapsed().as_secs_f64() * 1e3;

    // The audited tree for the report (rebuilt with the same derivation).
    let kappa = dimension_constant(&g, d);
    let tree_seed = SeedSplitter::new(seed).stream_indexed("tree-seed", 0).gen::<u64>();
    let tree = build_cluster_tree(&g, &params, tree_seed);
    let audit = audit_goodness(&tree, &default_thresholds(&tree, kappa, g.n(), d));

    let mut report = CostReport::from_outcome(
        &outcome,
        echo_params(&[
            ("task", "search-irregular".into()),
            ("d", d.to_string()),
            ("marked", marked_spec.clone()),
            ("beta", params.beta.to_string()),
            ("seed", seed.to_string()),
            ("n", g.n().to_string()),
        ]),
    );
    report.wall_time_ms = wall;
    let extra = serde_json::json!({
        "kappa": kappa,
        "cluster_tree": tree,
        "goodness_audit": audit,
    });
    write_output(args.out, &report_json(&report, extra))
}

fn search_scattered_cmd(args: SearchScatteredArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    cfg.check_known(&["graph_file", "grid_side", "grid_d", "d", "potential", "k", "marked", "seed"])?;
    let g = load_graph(&args.graph_file, args.grid_side, args.grid_d)?;
    let d: f64 = resolve(args.d, &cfg, "d", Some(3.0))?;
    let seed: u64 = resolve(args.seed, &cfg, "seed", Some(0))?;
    let k: usize = resolve(args.k, &cfg, "k", Some(1))?;
    let potential_spec: String =
        resolve(args.potential, &cfg, "potential", Some("random:8".to_string()))?;
    let potential = parse_vertex_set(&potential_spec, g.n(), seed, "cli-potential")?;
    if potential.is_empty() {
        return Err(CliError::config("potential set must not be empty"));
    }
    let marked_spec: String = resolve(args.marked, &cfg, "marked", Some("none".to_string()))?;
    let marked = parse_vertex_set(&marked_spec, g.n(), seed, "cli-marked")?;
    for v in &marked {
        if !potential.contains(v) {
            return Err(CliError::config(format!(
                "marked vertex {} is outside the potential set",
                v + 1
            )));
        }
    }
    let x = Input::from_marked(g.n(), &marked);
    let start = std::time::Instant::now();
    let outcome = search_scattered(&g, &potential, k.max(1), &x, d, seed, &ClusterParams::default())?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let mut report = CostReport::from_outcome(
        &outcome,
        echo_params(&[
            ("task", "search-scattered".into()),
            ("d", d.to_string()),
            ("k", k.to_string()),
            ("h", potential.len().to_string()),
            ("seed", seed.to_string()),
        ]),
    );
    report.wall_time_ms = wall;
    write_output(args.out, &report_json(&report, serde_json::json!({})))
}

/// Dense matrix file: `dim` header then `row col re im` entries (0-indexed).
fn load_dense(path: &Path, n: usize) -> Result<DenseUnitary, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let dim: usize = lines
        .next()
        .ok_or_else(|| CliError::config("empty matrix file"))?
        .trim()
        .parse()
        .map_err(|_| CliError::config("matrix file must start with the dimension"))?;
    if !dim.is_multiple_of(n) {
        return Err(CliError::config(format!(
            "dimension {dim} is not a multiple of the vertex count {n}"
        )));
    }
    let work = dim / n;
    if !work.is_power_of_two() {
        return Err(CliError::config(format!(
            "work-space size {work} per vertex is not a power of two"
        )));
    }
    let mut mat = CMat::zeros(dim);
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(CliError::config(format!("bad matrix line {line:?}")));
        }
        let r: usize = tok[0].parse().map_err(|_| CliError::config("bad row"))?;
        let c: usize = tok[1].parse().map_err(|_| CliError::config("bad col"))?;
        let re: f64 = tok[2].parse().map_err(|_| CliError::config("bad re"))?;
        let im: f64 = tok[3].parse().map_err(|_| CliError::config("bad im"))?;
        if r >= dim || c >= dim {
            return Err(CliError::config(format!("entry ({r},{c}) outside {dim}x{dim}")));
        }
        mat[(r, c)] = num_complex::Complex64::new(re, im);
    }
    // Basis annotation: index = vertex * work + work_bits, vertex-major.
    let basis: Vec<(Vertex, u64)> = (0..dim)
        .map(|i| ((i / work) as Vertex, (i % work) as u64))
        .collect();
    DenseUnitary::new(mat, basis).map_err(|e| CliError::config(e.to_string()))
}

/// Step file for mode c: `blocks <count>`, then per block a line
/// `block <dim> <v> <w> ...` (1-indexed vertices) and dim*dim entry lines.
fn load_step(path: &Path, n: usize) -> Result<LocalStep, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| CliError::config("empty step file"))?;
    let count: usize = header
        .strip_prefix("blocks")
        .ok_or_else(|| CliError::config("step file must start with `blocks <count>`"))?
        .trim()
        .parse()
        .map_err(|_| CliError::config("bad block count"))?;
    let mut groups = Vec::new();
    for _ in 0..count {
        let block_line = lines
            .next()
            .ok_or_else(|| CliError::config("missing block header"))?;
        let tok: Vec<&str> = block_line.split_whitespace().collect();
        if tok.first() != Some(&"block") || tok.len() < 2 {
            return Err(CliError::config(format!("bad block header {block_line:?}")));
        }
        let dim: usize = tok[1].parse().map_err(|_| CliError::config("bad block dim"))?;
        if tok.len() != 2 + 2 * dim {
            return Err(CliError::config(
                "block header must list `<v> <w>` for every state",
            ));
        }
        let mut states = Vec::with_capacity(dim);
        for i in 0..dim {
            let v: usize = tok[2 + 2 * i].parse().map_err(|_| CliError::config("bad vertex"))?;
            let w: u64 = tok[3 + 2 * i].parse().map_err(|_| CliError::config("bad work"))?;
            if v == 0 || v > n {
                return Err(CliError::config(format!("vertex {v} outside 1..={n}")));
            }
            states.push(BasisState::new((v - 1) as Vertex, w));
        }
        let mut mat = CMat::zeros(dim);
        for _ in 0..dim * dim {
            let line = lines.next().ok_or_else(|| CliError::config("missing matrix entry"))?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 4 {
                return Err(CliError::config(format!("bad entry line {line:?}")));
            }
            let r: usize = tok[0].parse().map_err(|_| CliError::config("bad row"))?;
            let c: usize = tok[1].parse().map_err(|_| CliError::config("bad col"))?;
            let re: f64 = tok[2].parse().map_err(|_| CliError::config("bad re"))?;
            let im: f64 = tok[3].parse().map_err(|_| CliError::config("bad im"))?;
            mat[(r, c)] = num_complex::Complex64::new(re, im);
        }
        groups.push((states, mat));
    }
    Ok(LocalStep::vertex_local(groups))
}

fn verify_locality(args: VerifyLocalityArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.graph_file)
        .map_err(|e| CliError::config(format!("cannot read graph: {e}")))?;
    let g = Graph::from_text(&text).map_err(|e| CliError::config(e.to_string()))?;
    let tol = args.tol.unwrap_or(spatialsearch::locality::H_DEFAULT_TOL);
    let verdict = match args.mode.as_str() {
        "z" => {
            let u = load_dense(&args.matrix_file, g.n())?;
            let report = check_z_local(&u, &g);
            serde_json::json!({
                "mode": "z",
                "local": report.is_local,
                "violations": report.violations.len(),
            })
        }
        "c" => {
            let step = load_step(&args.matrix_file, g.n())?;
            let report = check_c_local(&step, &g);
            serde_json::json!({
                "mode": "c",
                "local": report.is_local,
                "cause": report.cause.map(|c| c.to_string()),
            })
        }
        "h" => {
            let u = load_dense(&args.matrix_file, g.n())?;
            match check_h_local(&u, &g, tol).map_err(|e| CliError::numeric(e.to_string()))? {
                HVerdict::Local => serde_json::json!({ "mode": "h", "local": true }),
                HVerdict::NonLocal { violations } => serde_json::json!({
                    "mode": "h", "local": false, "violations": violations.len(),
                }),
                HVerdict::Inconclusive => serde_json::json!({
                    "mode": "h", "local": "inconclusive",
                }),
            }
        }
        other => return Err(CliError::config(format!("unknown mode {other:?} (use z, c, or h)"))),
    };
    println!("{}", serde_json::to_string_pretty(&verdict).expect("json"));
    Ok(())
}

fn amplify_demo(args: AmplifyDemoArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.epsilon) {
        return Err(CliError::config("epsilon must lie in [0, 1]"));
    }
    let mut csv = String::from("epsilon,m,predicted,simulated,delta\n");
    let syn = spatialsearch::amplify::Synthetic::new(args.epsilon);
    for m in 0..=args.m {
        let predicted = spatialsearch::amplify::predicted_success(args.epsilon, m);
        let (simulated, _, _) = syn.run(m)?;
        let _ = writeln!(
            csv,
            "{},{},{:.6},{:.6},{:.3e}",
            args.epsilon,
            m,
            predicted,
            simulated,
            simulated - predicted
        );
    }
    write_output(args.out, &csv)
}

fn hybrid_lowerbound(args: HybridArgs) -> Result<(), CliError> {
    let init = BasisState::new(0, 0);
    let (g, partition, script, y, scale) = match (args.graph.as_str(), args.algo.as_str()) {
        ("starfish", "diameter") => {
            let g = make_starfish(args.legs, args.leg_len).map_err(|e| CliError::config(e.to_string()))?;
            let legs = starfish_legs(args.legs, args.leg_len);
            let partition = RegionPartition::new(
                g.n(),
                legs.into_iter()
                    .enumerate()
                    .map(|(j, vs)| (format!("leg{j}"), vs))
                    .collect(),
            )
            .map_err(CliError::config)?;
            let (script, _) = diameter_search_script(&g);
            let scale = g.diameter() as f64;
            (g, partition, script, None, scale)
        }
        ("grid", "grid-search") => {
            let grid = make_grid(3, args.side).map_err(|e| CliError::config(e.to_string()))?;
            let (partition, cores) = grid_shell_regions(&grid, args.k_side);
            let params = GridParams::defaults(3);
            let searcher = GridSearcher::new(plan_levels(args.side, &params)?)?;
            let script = searcher.record_top_level()?;
            let scale = args.k_side as f64;
            (grid.graph, partition, script, Some(cores), scale)
        }
        (g, a) => {
            return Err(CliError::config(format!(
                "unsupported combination --graph {g} --algo {a} (use starfish/diameter or grid/grid-search)"
            )))
        }
    };
    let x0 = Input::zeros(g.n());
    let stride = ((args.stride_c * scale).floor() as usize).max(1);
    let t = script.query_count();
    let w = t.div_ceil(stride);
    let gamma = trace_query_magnitudes(&g, &script, &x0, init, &partition)?;
    let j_star = select_min_region(&gamma, stride, w);
    let y = match y {
        Some(cores) => Input::from_marked(g.n(), &cores[j_star]),
        None => Input::from_marked(g.n(), &[spatialsearch::graph::starfish_tip(j_star, args.leg_len)]),
    };
    let trace = hybrid_divergences(&g, &script, &x0, &y, stride, init, &partition, j_star)?;
    let report = verify_chain(&trace, partition.len());

    let mut csv = String::from("q,region,gamma,d,bound,slack\n");
    for (q, (d, gam)) in trace.d_adjacent.iter().zip(&trace.gamma_star).enumerate() {
        let bound = 4.0 * gam;
        let _ = writeln!(
            csv,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
            q + 1,
            trace.region_star,
            gam,
            d,
            bound,
            bound - d
        );
    }
    write_output(args.out, &csv)?;
    eprintln!(
        "chain: per-switch {} triangle {} magnitude {} cauchy-schwarz {}; implied query bound {:.3}",
        report.per_switch_holds,
        report.triangle_holds,
        report.magnitude_holds,
        report.cauchy_schwarz_holds,
        report.implied_query_bound
    );
    if !report.holds {
        return Err(CliError::numeric("divergence chain violated".to_string()));
    }
    Ok(())
}

fn disjointness(args: DisjointnessArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    cfg.check_known(&["n", "x", "y", "seed"])?;
    let n: usize = resolve(args.n, &cfg, "n", None)?;
    let seed: u64 = resolve(args.seed, &cfg, "seed", Some(0))?;
    let x_spec: String = resolve(args.x, &cfg, "x", Some("random:1".to_string()))?;
    let y_spec: String = resolve(args.y, &cfg, "y", Some("random:1".to_string()))?;
    let x = parse_bits(&x_spec, n, seed, "cli-x")?;
    let y = parse_bits(&y_spec, n, seed ^ 0x9e37_79b9_7f4a_7c15, "cli-y")?;
    let start = std::time::Instant::now();
    let out = run_disjointness(&x, &y, seed, &UnknownSearchConfig::default())
        .map_err(|e| CliError::numeric(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    if !out.sync_ok {
        return Err(CliError::numeric("vertex synchronization violated".to_string()));
    }
    let value = serde_json::json!({
        "answer": out.answer,
        "found_item": out.found.map(|v| v + 1),
        "success_probability": out.success_probability,
        "qubits_communicated": out.qubit_count,
        "oracle_gadgets": out.oracle_gadgets,
        "relays": out.relays,
        "steps": out.counters.steps,
        "queries": out.counters.queries,
        "sync_ok": out.sync_ok,
        "seed": out.seed,
        "wall_time_ms": wall,
        "params": { "n": n, "x": x_spec, "y": y_spec },
    });
    write_output(
        args.out,
        &(serde_json::to_string_pretty(&value).expect("json") + "\n"),
    )
}

struct SweepRow {
    value: String,
    steps: u64,
    queries: u64,
    success: f64,
    predicted: f64,
    status: String,
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = ConfigMap::load(&args.config)?;
    let task = cfg
        .get("task")
        .ok_or_else(|| CliError::config("sweep config needs `task`"))?
        .to_string();
    let param = cfg
        .get("sweep_param")
        .ok_or_else(|| CliError::config("sweep config needs `sweep_param`"))?
        .to_string();
    let values_raw = cfg
        .get("sweep_values")
        .ok_or_else(|| CliError::config("sweep config needs `sweep_values`"))?;
    let values = parse_sweep_values(values_raw)?;

    let jobs = args.jobs.max(1);
    let mut rows: Vec<Option<Result<SweepRow, String>>> = Vec::new();
    rows.resize_with(values.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let rows_mutex = std::sync::Mutex::new(&mut rows);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(values.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= values.len() {
                    break;
                }
                let result = sweep_point(&task, &param, &values[i], &cfg)
                    .map_err(|e| match e {
                        CliError::Config(m) | CliError::Numeric(m) => m,
                    });
                rows_mutex.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let mut csv = String::from("param,value,steps,queries,success,predicted,status\n");
    let mut audit_passes = 0usize;
    let mut audit_total = 0usize;
    for (value, slot) in values.iter().zip(rows.iter()) {
        match slot.as_ref().expect("all points visited") {
            Ok(row) => {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{:.9},{:.9},{}",
                    param, row.value, row.steps, row.queries, row.success, row.predicted, row.status
                );
                if task == "cluster-audit" {
                    audit_total += 1;
                    if row.success > 0.5 {
                        audit_passes += 1;
                    }
                }
            }
            Err(msg) => {
                let _ = writeln!(csv, "{param},{value},0,0,0,0,error:{}", msg.replace(',', ";"));
            }
        }
    }
    if task == "cluster-audit" && audit_total > 0 {
        let _ = writeln!(
            csv,
            "summary,pass_rate,0,0,{:.9},0,ok",
            audit_passes as f64 / audit_total as f64
        );
    }
    write_output(args.out, &csv)
}

fn parse_sweep_values(raw: &str) -> Result<Vec<String>, CliError> {
    if let Some((a, b)) = raw.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| CliError::config("bad range start"))?;
        let b: i64 = b.trim().parse().map_err(|_| CliError::config("bad range end"))?;
        if b < a {
            return Err(CliError::config("empty sweep range"));
        }
        return Ok((a..=b).map(|v| v.to_string()).collect());
    }
    Ok(raw
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect())
}

fn sweep_point(task: &str, param: &str, value: &str, cfg: &ConfigMap) -> Result<SweepRow, CliError> {
    let get = |key: &str, default: Option<&str>| -> Result<String, CliError> {
        if key == param {
            return Ok(value.to_string());
        }
        match cfg.get(key) {
            Some(v) => Ok(v.to_string()),
            None => default
                .map(str::to_string)
                .ok_or_else(|| CliError::config(format!("missing `{key}`"))),
        }
    };
    match task {
        "amplify" => {
            let epsilon: f64 = get("epsilon", Some("0.111111"))?
                .parse()
                .map_err(|_| CliError::config("bad epsilon"))?;
            let m: u32 = get("m", Some("1"))?.parse().map_err(|_| CliError::config("bad m"))?;
            let syn = spatialsearch::amplify::Synthetic::new(epsilon);
            let (simulated, _, steps) = syn.run(m)?;
            Ok(SweepRow {
                value: value.to_string(),
                steps,
                queries: 0,
                success: simulated,
                predicted: spatialsearch::amplify::predicted_success(epsilon, m),
                status: "ok".into(),
            })
        }
        "search-grid" => {
            let d: usize = get("d", Some("2"))?.parse().map_err(|_| CliError::config("bad d"))?;
            let r: u32 = get("R", Some("1"))?.parse().map_err(|_| CliError::config("bad R"))?;
            let seed: u64 = get("seed", Some("0"))?.parse().map_err(|_| CliError::config("bad seed"))?;
            let params = GridParams::defaults(d);
            let side = if d == 2 {
                params.ell0.pow(r)
            } else {
                // Walk the side recurrence up to level r.
                let mut ell = params.ell0;
                for _ in 0..r {
                    let f = (ell as f64).powf(1.0 / params.beta - 1.0).ceil() as usize;
                    ell *= f.max(1);
                }
                ell
            };
            let grid = make_grid(d, side).map_err(|e| CliError::config(e.to_string()))?;
            let n = grid.graph.n();
            let marked = parse_vertex_set(&get("marked", Some("random:1"))?, n, seed, "sweep-marked")?;
            let x = Input::from_marked(n, &marked);
            let searcher = GridSearcher::new(plan_levels(side, &params)?)?;
            let (state, counters) = if marked.len() == 1 {
                searcher.run_level_from(&x, searcher.plan.top(), marked[0])?
            } else {
                searcher.run_level(&x, searcher.plan.top())?
            };
            Ok(SweepRow {
                value: value.to_string(),
                steps: counters.steps,
                queries: counters.queries,
                success: state.success_probability(BasisState::answer),
                predicted: searcher.plan.predicted_unique_success(),
                status: "ok".into(),
            })
        }
        "cluster-audit" => {
            let side: usize = get("side", Some("8"))?.parse().map_err(|_| CliError::config("bad side"))?;
            let d: f64 = get("d", Some("3"))?.parse().map_err(|_| CliError::config("bad d"))?;
            let seed: u64 = get("seed", Some("0"))?.parse().map_err(|_| CliError::config("bad seed"))?;
            let g = make_grid(3, side).map_err(|e| CliError::config(e.to_string()))?.graph;
            let kappa = dimension_constant(&g, d);
            let tree = build_cluster_tree(&g, &ClusterParams::default(), seed);
            let audit = audit_goodness(&tree, &default_thresholds(&tree, kappa, g.n(), d));
            let worst = audit
                .levels
                .iter()
                .map(|l| l.max_radius as f64 / l.threshold)
                .fold(0.0f64, f64::max);
            Ok(SweepRow {
                value: value.to_string(),
                steps: 0,
                queries: 0,
                success: if audit.pass { 1.0 } else { 0.0 },
                predicted: worst,
                status: "ok".into(),
            })
        }
        other => Err(CliError::config(format!(
            "unknown sweep task {other:?} (use amplify, search-grid, or cluster-audit)"
        ))),
    }
}

