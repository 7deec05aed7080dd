use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qeopt::benchmark::{run_experiment, write_atomic, ExperimentSpec};
use qeopt::emulator::{ar_star, optimize_params, qaoa_energy, qaoa_state, sample, OptimizeConfig, QaoaParams, SampleSet};
use qeopt::filters::{apply_filter, FilterConfig, FilterKind, ReadoutModel};
use qeopt::heuristics::{multistart, timed_multistart, HeuristicConfig, WarmStartPool};
use qeopt::params::build::{build_sk_table, build_tree_table, fit_mis_tables, mis_training_set, BuildConfig, MIS_LAMBDA};
use qeopt::params::{predict as predict_angles, Method, Tables};
use qeopt::partition::{solve_large as run_solve_large, LargeConfig};
use qeopt::problem::io::{graph_to_json, graph_to_text, parse_problem, qubo_to_json, qubo_to_text, Problem};
use qeopt::problem::{
    brute_force_spectrum_capped, generate_instance, maxcut_to_qubo, mis_to_qubo, CostDiagonal, InstanceKind, QuboInstance,
    WeightedGraph, Weights,
};
use qeopt::routing::{
    fiedler_layout, iterate_mapping, qap_layout, random_layout, AstarConfig, CostMode, HardwareGraph, Router,
};
use qeopt::DEFAULT_EMULATION_CAP;

use crate::{Common, Format, ProblemArg};

pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

pub type CmdResult = std::result::Result<(), StageError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

fn fail<T>(stage: &'static str, msg: impl std::fmt::Display) -> std::result::Result<T, StageError> {
    Err(StageError {
        stage,
        source: anyhow::anyhow!("{msg}"),
    })
}

fn emit(c: &Common, text: &str) -> CmdResult {
    match &c.out {
        Some(path) => write_atomic(path, text.as_bytes()).stage("output"),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path, stage: &'static str) -> std::result::Result<String, StageError> {
    std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .stage(stage)
}

struct Loaded {
    graph: Option<WeightedGraph>,
    qubo: QuboInstance,
}

/// A graph file becomes the Max-Cut or MIS QUBO; a QUBO file is used as is.
fn load_problem(path: &Path, problem: ProblemArg) -> std::result::Result<Loaded, StageError> {
    let text = read(path, "input")?;
    match parse_problem(&text).stage("input")? {
        Problem::Graph(g) => {
            let qubo = match problem {
                ProblemArg::Maxcut => maxcut_to_qubo(&g),
                ProblemArg::Mis => mis_to_qubo(&g, MIS_LAMBDA).stage("input")?,
            };
            Ok(Loaded { graph: Some(g), qubo })
        }
        Problem::Qubo(q) => Ok(Loaded { graph: None, qubo: q }),
    }
}

fn load_graph(path: &Path) -> std::result::Result<WeightedGraph, StageError> {
    match parse_problem(&read(path, "input")?).stage("input")? {
        Problem::Graph(g) => Ok(g),
        Problem::Qubo(_) => fail("input", "expected a graph file, found a QUBO"),
    }
}

fn tables() -> std::result::Result<Tables, StageError> {
    Tables::load().stage("params")
}

fn default_method(problem: ProblemArg) -> Method {
    match problem {
        ProblemArg::Maxcut => Method::Balanced,
        ProblemArg::Mis => Method::Mis,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Er,
    Regular,
    Line,
    Lattice,
    SwapEnhanced,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability for `er`.
    #[arg(long, default_value_t = 0.5)]
    p_edge: f64,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    swap_edges: usize,
    /// `unit` or `uniform:LO,HI`.
    #[arg(long, default_value = "unit")]
    weights: String,
    /// Write the QUBO of this problem instead of the graph.
    #[arg(long, value_enum)]
    qubo: Option<ProblemArg>,
}

fn parse_weights(s: &str) -> anyhow::Result<Weights> {
    if s == "unit" {
        return Ok(Weights::Unit);
    }
    let range = s
        .strip_prefix("uniform:")
        .ok_or_else(|| anyhow::anyhow!("weights must be `unit` or `uniform:LO,HI`, got {s:?}"))?;
    let (lo, hi) = range
        .split_once(',')
        .ok_or_else(|| anyhow::anyhow!("bad weight range {range:?}"))?;
    Ok(Weights::Uniform {
        lo: lo.trim().parse()?,
        hi: hi.trim().parse()?,
    })
}

pub fn gen(a: &GenArgs, c: &Common) -> CmdResult {
    let need_n = || a.n.ok_or_else(|| anyhow::anyhow!("--n is required for this kind")).stage("gen");
    let kind = match a.kind {
        KindArg::Er => InstanceKind::ErdosRenyi {
            n: need_n()?,
            p_edge: a.p_edge,
        },
        KindArg::Regular => InstanceKind::RandomRegular {
            n: need_n()?,
            degree: a.degree,
        },
        KindArg::Line => InstanceKind::Line { n: need_n()? },
        KindArg::Lattice => InstanceKind::DefectLattice {
            rows: a.rows,
            cols: a.cols,
        },
        KindArg::SwapEnhanced => InstanceKind::SwapEnhanced {
            n: need_n()?,
            swap_edges: a.swap_edges,
        },
    };
    let weights = parse_weights(&a.weights).stage("gen")?;
    let g = generate_instance(&kind, weights, c.seed).stage("gen")?;
    let text = match (a.qubo, c.format) {
        (None, Format::Csv) => graph_to_text(&g),
        (None, Format::Json) => graph_to_json(&g),
        (Some(p), f) => {
            let q = match p {
                ProblemArg::Maxcut => maxcut_to_qubo(&g),
                ProblemArg::Mis => mis_to_qubo(&g, MIS_LAMBDA).stage("gen")?,
            };
            match f {
                Format::Csv => qubo_to_text(&q),
                Format::Json => qubo_to_json(&q),
            }
        }
    };
    emit(c, &text)
}

#[derive(Args)]
pub struct PredictArgs {
    /// Graph file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "balanced")]
    method: Method,
    #[arg(long)]
    p: usize,
    /// Blend weight of the SK-based prediction for `balanced`.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

fn params_text(params: &QaoaParams, f: Format) -> String {
    match f {
        Format::Csv => format!("{}\n", params.to_interleaved()),
        Format::Json => format!("{}\n", serde_json::to_string(params).expect("angles serialise")),
    }
}

pub fn predict(a: &PredictArgs, c: &Common) -> CmdResult {
    let g = load_graph(&a.input)?;
    let params = predict_angles(&g, a.p, a.method, &tables()?, a.alpha).stage("params")?;
    emit(c, &params_text(&params, c.format))
}

#[derive(Args)]
pub struct EmulateArgs {
    /// Graph or QUBO file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ProblemArg::Maxcut)]
    problem: ProblemArg,
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// `gamma1,beta1,gamma2,beta2,...`; overrides prediction.
    #[arg(long)]
    angles: Option<String>,
    /// Prediction method for graph inputs.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Optimise the angles instead of predicting them.
    #[arg(long)]
    optimize: bool,
    #[arg(long, default_value_t = 1000)]
    shots: u64,
    #[arg(long, default_value_t = DEFAULT_EMULATION_CAP)]
    cap: usize,
}

pub fn emulate(a: &EmulateArgs, c: &Common) -> CmdResult {
    let inst = load_problem(&a.input, a.problem)?;
    let diag = CostDiagonal::for_qaoa(&inst.qubo, a.cap).stage("emulate")?;
    let params = match (&a.angles, &inst.graph) {
        (Some(s), _) => QaoaParams::parse_interleaved(s).stage("params")?,
        (None, Some(g)) if !a.optimize => predict_angles(
            g,
            a.p,
            a.method.unwrap_or(default_method(a.problem)),
            &tables()?,
            a.alpha,
        )
        .stage("params")?,
        _ => {
            let cfg = OptimizeConfig {
                seed: c.seed,
                ..Default::default()
            };
            optimize_params(&diag, a.p, &cfg).stage("params")?.params
        }
    };
    let energy = qaoa_energy(&diag, &params);
    log::info!(
        "angles {} energy {energy} AR* {}",
        params.to_interleaved(),
        ar_star(energy, &diag)
    );
    let s = sample(&qaoa_state(&diag, &params), a.shots, c.seed);
    emit(c, &sample_text(&s, c.format))
}

fn sample_text(s: &SampleSet, f: Format) -> String {
    match f {
        Format::Csv => s.to_text(),
        Format::Json => s.to_json(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouterArg {
    Greedy,
    Astar,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Fiedler,
    Qap,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Swaps,
    Depth,
}

#[derive(Args)]
pub struct RouteArgs {
    /// Problem graph file.
    #[arg(long)]
    input: PathBuf,
    /// `grid:RxC`, `heavyhex:156`, `line:N` or `file:PATH`.
    #[arg(long)]
    topology: String,
    #[arg(long, value_enum, default_value_t = RouterArg::Greedy)]
    method: RouterArg,
    #[arg(long, value_enum, default_value_t = LayoutArg::Fiedler)]
    layout: LayoutArg,
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    /// Exponent `q` of the distance score `sum_T d(T)^q`.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Swaps)]
    mode: ModeArg,
    /// Node budget for A*.
    #[arg(long)]
    beam: Option<usize>,
}

pub fn route(a: &RouteArgs, c: &Common) -> CmdResult {
    let g = load_graph(&a.input)?;
    let h = HardwareGraph::from_spec(&a.topology).stage("topology")?;
    let m0 = match a.layout {
        LayoutArg::Fiedler => fiedler_layout(&g, &h),
        LayoutArg::Qap => qap_layout(&g, &h, c.seed),
        LayoutArg::Random => random_layout(&g, &h, c.seed),
    }
    .stage("layout")?;
    let router = match a.method {
        RouterArg::Greedy => Router::Greedy { q: a.q },
        RouterArg::Astar => {
            let mut cfg = AstarConfig {
                q: a.q,
                mode: match a.mode {
                    ModeArg::Swaps => CostMode::Swaps,
                    ModeArg::Depth => CostMode::Depth,
                },
                ..Default::default()
            };
            if let Some(b) = a.beam {
                cfg.beam_limit = b;
            }
            Router::Astar(cfg)
        }
    };
    let (_, circuit) = iterate_mapping(&g, &h, &m0, &router, a.iterations).stage("route")?;
    let json = serde_json::to_string_pretty(&circuit).stage("output")?;
    let metrics = circuit.metrics();
    match &c.out {
        Some(path) => {
            write_atomic(path, format!("{json}\n").as_bytes()).stage("output")?;
            println!("{metrics}");
        }
        None => println!("{json}\n{metrics}"),
    }
    Ok(())
}

#[derive(Args)]
pub struct FilterArgs {
    /// Sample file (text or JSON).
    #[arg(long)]
    input: PathBuf,
    /// Filters applied in the given order.
    #[arg(long, value_delimiter = ',', required = true)]
    kind: Vec<FilterKind>,
    /// Filter configuration (JSON); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance for the energy and Hamming filters.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProblemArg::Maxcut)]
    problem: ProblemArg,
    /// Readout model (JSON) for readout correction.
    #[arg(long)]
    model: Option<PathBuf>,
}

pub fn filter(a: &FilterArgs, c: &Common) -> CmdResult {
    let mut s = SampleSet::parse(&read(&a.input, "input")?).stage("input")?;
    let cfg = match &a.config {
        Some(p) => FilterConfig::from_json(&read(p, "config")?).stage("config")?,
        None => FilterConfig::default(),
    };
    let inst = a.instance.as_deref().map(|p| load_problem(p, a.problem)).transpose()?;
    let model = match &a.model {
        Some(p) => Some(ReadoutModel::from_json(&read(p, "model")?).stage("model")?),
        None => None,
    };
    for &k in &a.kind {
        s = apply_filter(k, &s, inst.as_ref().map(|i| &i.qubo), model.as_ref(), &cfg).stage("filter")?;
    }
    emit(c, &sample_text(&s, c.format))
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeuristicArg {
    Tabu,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ProblemArg::Maxcut)]
    problem: ProblemArg,
    #[arg(long, value_enum, default_value_t = HeuristicArg::Tabu)]
    heuristic: HeuristicArg,
    /// Sample file to draw starts from, or `random`.
    #[arg(long, default_value = "random")]
    warmstart: String,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: u64,
    /// Restart until this many seconds have passed instead of a fixed count.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Certify the optimum by brute force and stop restarts that reach it.
    #[arg(long)]
    certify: bool,
}

pub fn solve(a: &SolveArgs, c: &Common) -> CmdResult {
    let inst = load_problem(&a.input, a.problem)?;
    let q = &inst.qubo;
    let pool = if a.warmstart == "random" {
        WarmStartPool::random(q.n(), a.restarts, c.seed).stage("warmstart")?
    } else {
        let s = SampleSet::parse(&read(Path::new(&a.warmstart), "warmstart")?).stage("warmstart")?;
        WarmStartPool::from_samples(&s, qeopt::heuristics::PoolSource::Qaoa, c.seed).stage("warmstart")?
    };
    let optimum = if a.certify {
        Some(brute_force_spectrum_capped(&q.to_minimization(), DEFAULT_EMULATION_CAP).stage("solve")?.min_value())
    } else {
        None
    };
    let cfg = HeuristicConfig {
        max_iters: a.max_iters,
        target: optimum,
        seed: c.seed,
        ..Default::default()
    };
    let mut trace = match a.time_limit {
        Some(t) => timed_multistart(q, &pool, t, &cfg),
        None => multistart(q, &pool, a.restarts, &cfg),
    }
    .stage("solve")?;
    trace.optimum = optimum;
    if let Some(best) = trace.best() {
        log::info!("best {} after {} iterations", q.from_min_value(best.best_cost), best.iters_to_best);
    }
    emit(
        c,
        &match c.format {
            Format::Csv => trace.to_csv(),
            Format::Json => trace.to_json(),
        },
    )
}

#[derive(Args)]
pub struct SolveLargeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ProblemArg::Maxcut)]
    problem: ProblemArg,
    #[arg(long, default_value_t = 16)]
    max_block: usize,
    /// Directory for the partition and the per-block solutions.
    #[arg(long)]
    blocks_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 1000)]
    shots: u64,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, value_delimiter = ',', default_value = "energy")]
    filters: Vec<FilterKind>,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: u64,
}

pub fn solve_large(a: &SolveLargeArgs, c: &Common) -> CmdResult {
    let inst = load_problem(&a.input, a.problem)?;
    let cfg = LargeConfig {
        max_block: a.max_block,
        p: a.p,
        shots: a.shots,
        method: a.method.unwrap_or(default_method(a.problem)),
        filters: a.filters.clone(),
        restarts: a.restarts,
        heuristic: HeuristicConfig {
            max_iters: a.max_iters,
            seed: c.seed,
            ..Default::default()
        },
        seed: c.seed,
        ..Default::default()
    };
    let sol = run_solve_large(&inst.qubo, inst.graph.as_ref(), &cfg, &tables()?).stage("partition")?;
    if let Some(dir) = &a.blocks_out {
        std::fs::create_dir_all(dir).stage("output")?;
        write_atomic(&dir.join("partition.json"), sol.partition.to_json().as_bytes()).stage("output")?;
        for (b, (vs, x)) in sol.partition.blocks().iter().zip(&sol.locals).enumerate() {
            let lines: String = vs.iter().zip(x).map(|(v, bit)| format!("{v} {bit}\n")).collect();
            write_atomic(&dir.join(format!("block_{b}.txt")), lines.as_bytes()).stage("output")?;
        }
    }
    let bits = qeopt::bits::to_string(&sol.recombined.x);
    let text = match c.format {
        Format::Csv => format!(
            "value,concatenated_value,blocks,cut_edges,assignment\n{},{},{},{},{}\n",
            sol.recombined.value,
            sol.concatenated_value,
            sol.partition.num_blocks(),
            sol.partition.cut_edges.len(),
            bits
        ),
        Format::Json => format!(
            "{}\n",
            serde_json::json!({
                "value": sol.recombined.value,
                "concatenated_value": sol.concatenated_value,
                "blocks": sol.partition.num_blocks(),
                "cut_edges": sol.partition.cut_edges.len(),
                "assignment": bits,
                "flips": sol.recombined.flips,
            })
        ),
    };
    emit(c, &text)
}

#[derive(Args)]
pub struct BenchArgs {
    /// Experiment specification (JSON).
    #[arg(long)]
    spec: PathBuf,
}

pub fn bench(a: &BenchArgs, c: &Common) -> CmdResult {
    let text = read(&a.spec, "spec")?;
    let spec = ExperimentSpec::from_json(&text).stage("spec")?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(format!("bench_{}", spec.id)));
    let report = run_experiment(&spec, &tables()?).stage("bench")?;
    report.write(&out).stage("output")?;
    let failed = report.cells.iter().filter(|c| c.report.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} cells failed; see qfactor.json", report.cells.len());
    }
    match c.format {
        Format::Csv => print!("{}", report.qfactor_csv()),
        Format::Json => println!("{}", report.to_json()),
    }
    Ok(())
}

#[derive(Args)]
pub struct BuildTablesArgs {
    /// Comma-separated subset of `tree,sk,mis`.
    #[arg(long, default_value = "tree,sk,mis")]
    only: String,
    /// Number of MIS training graphs.
    #[arg(long, default_value_t = 100)]
    mis_graphs: usize,
}

pub fn build_tables(a: &BuildTablesArgs, c: &Common) -> CmdResult {
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).stage("output")?;
    let cfg = BuildConfig {
        seed: c.seed,
        ..Default::default()
    };
    for part in a.only.split(',') {
        let (name, json) = match part.trim() {
            "tree" => ("tree_table.json", build_tree_table(&cfg).stage("tables")?.to_json()),
            "sk" => ("sk_table.json", build_sk_table(&cfg).stage("tables")?.to_json()),
            "mis" => {
                let gs = mis_training_set(a.mis_graphs, c.seed).stage("tables")?;
                ("mis_table.json", fit_mis_tables(&gs, &cfg).stage("tables")?.to_json())
            }
            other => return fail("tables", format!("unknown table {other:?}")),
        };
        write_atomic(&out.join(name), json.as_bytes()).stage("output")?;
    }
    Ok(())
}
