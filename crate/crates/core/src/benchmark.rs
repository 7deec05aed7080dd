//! Success curves, expected runtimes, Q-factors and full experiments.
//!
//! `F_opt(T)` is the fraction of restarts whose best-so-far cost reached
//! the optimum within `T` iterations, for `T = 1..=T_total`. A restart
//! that hits at iteration `h` counts from `T = max(h, 1)`. The expected
//! runtime is `C(T) = T / F_opt(T)` and `R_min` its minimum.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{inject_readout_noise, optimize_params, qaoa_state, sample, OptimizeConfig, SampleSet};
use crate::filters::{apply_filter, FilterConfig, FilterKind, ReadoutModel};
use crate::heuristics::{multistart, HeuristicConfig, PoolSource, RunTrace, WarmStartPool, COST_TOL};
use crate::params::{predict, Method, Tables};
use crate::problem::io::{parse_problem, Problem};
use crate::problem::{
    brute_force_spectrum_capped, generate_instance, maxcut_to_qubo, mis_to_qubo, CostDiagonal, InstanceKind, QuboInstance,
    WeightedGraph, Weights,
};
use crate::{Error, Result, DEFAULT_EMULATION_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoptCurve {
    /// `values[T - 1] = F_opt(T)`.
    pub values: Vec<f64>,
}

impl FoptCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("F_opt values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("F_opt must be nondecreasing"));
        }
        Ok(FoptCurve { values })
    }

    pub fn at(&self, t: u64) -> f64 {
        if t == 0 || self.values.is_empty() {
            return 0.0;
        }
        self.values[(t as usize).min(self.values.len()) - 1]
    }

    pub fn t_total(&self) -> u64 {
        self.values.len() as u64
    }
}

/// `R_min` and its minimiser. `r_min` is infinite and `t_star` is `None`
/// when nothing reached the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub r_min: f64,
    pub t_star: Option<f64>,
}

impl Runtime {
    pub const INFINITE: Runtime = Runtime {
        r_min: f64::INFINITY,
        t_star: None,
    };

    pub fn is_finite(&self) -> bool {
        self.r_min.is_finite()
    }
}

fn resolve_optimum(trace: &RunTrace, optimum: Option<f64>) -> Result<f64> {
    optimum
        .or(trace.optimum)
        .ok_or_else(|| Error::param("F_opt needs a known optimum"))
}

/// Hit iteration of every restart, `None` for restarts that never reach
/// the optimum.
pub fn hit_iterations(trace: &RunTrace, optimum: Option<f64>) -> Result<Vec<Option<u64>>> {
    let opt = resolve_optimum(trace, optimum)?;
    Ok(trace.restarts.iter().map(|r| r.hit_iter(opt)).collect())
}

/// Builds `F_opt` from hit iterations over `1..=t_total`.
pub fn fopt_from_hits(hits: &[Option<u64>], t_total: u64) -> FoptCurve {
    let mut bins = vec![0usize; t_total as usize + 1];
    for h in hits.iter().flatten() {
        let t = (*h).max(1);
        if t <= t_total {
            bins[t as usize] += 1;
        }
    }
    let total = hits.len().max(1) as f64;
    let mut acc = 0;
    let values = (1..=t_total as usize)
        .map(|t| {
            acc += bins[t];
            acc as f64 / total
        })
        .collect();
    FoptCurve { values }
}

pub fn fopt_curve(trace: &RunTrace, optimum: Option<f64>) -> Result<FoptCurve> {
    Ok(fopt_from_hits(&hit_iterations(trace, optimum)?, trace.max_iters))
}

/// Values closer than this (relatively) count as ties when minimising.
const TIE_TOL: f64 = 1e-12;

/// Minimum of `T / F_opt(T)` over `T` with `F_opt(T) > 0`, smallest `T`
/// on ties.
pub fn expected_runtime(curve: &FoptCurve) -> Runtime {
    let mut best = Runtime::INFINITE;
    for (i, &f) in curve.values.iter().enumerate() {
        if f > 0.0 {
            let c = (i + 1) as f64 / f;
            if c < best.r_min * (1.0 - TIE_TOL) {
                best = Runtime {
                    r_min: c,
                    t_star: Some((i + 1) as f64),
                };
            }
        }
    }
    best
}

/// Smallest time resolution used for restarts that start at the optimum.
pub const TIME_RESOLUTION: f64 = 1e-6;

/// [`expected_runtime`] with wall-clock seconds in place of iterations:
/// `F(t)` is the fraction of restarts that reached the optimum within `t`
/// seconds of their own start.
pub fn time_expected_runtime(trace: &RunTrace, optimum: Option<f64>) -> Result<Runtime> {
    let opt = resolve_optimum(trace, optimum)?;
    let total = trace.restarts.len().max(1) as f64;
    let mut hits: Vec<f64> = trace
        .restarts
        .iter()
        .filter_map(|r| r.hit_time(opt))
        .map(|t| t.max(TIME_RESOLUTION))
        .collect();
    hits.sort_by(f64::total_cmp);
    let mut best = Runtime::INFINITE;
    for (k, &t) in hits.iter().enumerate() {
        // Several restarts may share a hit time; use the last of the group.
        if hits.get(k + 1).is_some_and(|&u| u == t) {
            continue;
        }
        let c = t / ((k + 1) as f64 / total);
        if c < best.r_min * (1.0 - TIE_TOL) {
            best = Runtime {
                r_min: c,
                t_star: Some(t),
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFactorReport {
    pub instance: String,
    pub p: usize,
    pub filter: String,
    pub cold: Runtime,
    pub warm: Runtime,
    /// `None` when either runtime is infinite.
    pub q: Option<f64>,
    pub restarts_cold: usize,
    pub restarts_warm: usize,
    pub pool: String,
    /// True when the optimum is the best cost seen rather than certified.
    pub best_known: bool,
    pub error: Option<String>,
}

/// `Q = R_min(cold) / R_min(warm)` on iteration curves.
pub fn q_factor(cold: &RunTrace, warm: &RunTrace, optimum: Option<f64>) -> Result<QFactorReport> {
    if cold.n != warm.n {
        return Err(Error::DimensionMismatch {
            expected: cold.n,
            got: warm.n,
        });
    }
    let rc = expected_runtime(&fopt_curve(cold, optimum)?);
    let rw = expected_runtime(&fopt_curve(warm, optimum)?);
    Ok(QFactorReport {
        instance: String::new(),
        p: 0,
        filter: String::new(),
        cold: rc,
        warm: rw,
        q: q_of(rc, rw),
        restarts_cold: cold.restarts.len(),
        restarts_warm: warm.restarts.len(),
        pool: warm.source.map_or("unknown", |s| s.as_str()).to_string(),
        best_known: false,
        error: None,
    })
}

fn q_of(cold: Runtime, warm: Runtime) -> Option<f64> {
    (cold.is_finite() && warm.is_finite()).then(|| cold.r_min / warm.r_min)
}

/// Median over restarts of the best-so-far objective divided by the
/// optimum, for `T = 1..=T_total`. The objective is taken in maximisation
/// form: the instance's own value for maximisation QUBOs and the negated
/// value otherwise. Rejects a non-positive optimum.
pub fn approximation_ratio_curve(trace: &RunTrace, q: &QuboInstance, optimum: Option<f64>) -> Result<Vec<f64>> {
    let opt_min = resolve_optimum(trace, optimum)?;
    let to_max = |c: f64| -c;
    let opt = to_max(opt_min);
    if !(opt > 0.0) {
        return Err(Error::param(format!(
            "approximation ratio needs a positive optimum in maximisation form, got {opt}; shift the objective"
        )));
    }
    if q.n() != trace.n {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: trace.n,
        });
    }
    if trace.restarts.is_empty() {
        return Err(Error::param("trace has no restarts"));
    }
    Ok((1..=trace.max_iters)
        .map(|t| {
            let v: Vec<f64> = trace.restarts.iter().map(|r| to_max(r.best_at(t))).collect();
            median(&v) / opt
        })
        .collect())
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

// Experiments.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    MaxCut,
    Mis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case")]
pub enum InstanceSource {
    /// `count` instances generated with seeds `seed, seed + 1, ...`.
    Generate {
        #[serde(flatten)]
        kind: InstanceKind,
        #[serde(default)]
        weights: Weights,
        #[serde(default)]
        seed: u64,
        #[serde(default = "one")]
        count: usize,
    },
    File { path: PathBuf },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub name: String,
    pub source: InstanceSource,
    #[serde(default = "default_problem")]
    pub problem: ProblemKind,
}

fn default_problem() -> ProblemKind {
    ProblemKind::MaxCut
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Angles {
    #[default]
    Predicted,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WarmSource {
    #[default]
    Qaoa,
    /// Uniformly random strings in place of the QAOA samples.
    Uniform,
}

/// One experiment: every instance, depth and filter chain is a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub instances: Vec<InstanceSpec>,
    pub ps: Vec<usize>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    /// Prediction method; defaults to `balanced` for Max-Cut and `mis` for
    /// MIS instances.
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default)]
    pub angles: Angles,
    /// Filter chains applied in order; an empty chain means no filtering.
    #[serde(default = "default_filters")]
    pub filters: Vec<Vec<FilterKind>>,
    #[serde(default)]
    pub filter_config: FilterConfig,
    /// Readout noise injected into the samples before filtering.
    #[serde(default)]
    pub noise: Option<ReadoutModel>,
    pub restarts: usize,
    #[serde(default)]
    pub heuristic: HeuristicConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub warm_source: WarmSource,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_shots() -> u64 {
    1000
}
fn half() -> f64 {
    0.5
}
fn default_filters() -> Vec<Vec<FilterKind>> {
    vec![vec![]]
}
fn default_cap() -> usize {
    DEFAULT_EMULATION_CAP
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: ExperimentSpec = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() || self.ps.is_empty() {
            return Err(Error::param("experiment needs instances and depths"));
        }
        if self.restarts == 0 || self.shots == 0 || self.replicates == 0 {
            return Err(Error::param("restarts, shots and replicates must be positive"));
        }
        if self.ps.iter().any(|&p| p == 0) {
            return Err(Error::param("depths must be positive"));
        }
        self.filter_config.validate()?;
        self.heuristic.validate()
    }
}

pub fn filter_label(chain: &[FilterKind]) -> String {
    if chain.is_empty() {
        return "none".into();
    }
    chain
        .iter()
        .map(|k| match k {
            FilterKind::Readout => "readout",
            FilterKind::Energy => "energy",
            FilterKind::Frequency => "frequency",
            FilterKind::Hamming => "hamming",
        })
        .collect::<Vec<_>>()
        .join("+")
}

/// Per-cell curves kept for the CSV outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub id: String,
    pub n: usize,
    pub report: QFactorReport,
    pub fopt_cold: Vec<f64>,
    pub fopt_warm: Vec<f64>,
    pub ar_cold: Option<Vec<f64>>,
    pub ar_warm: Option<Vec<f64>>,
    /// Raw traces, kept in memory for resampling; not written to disk.
    pub cold_trace: Option<RunTrace>,
    pub warm_trace: Option<RunTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub id: String,
    pub cells: Vec<CellResult>,
}

struct Loaded {
    name: String,
    graph: Option<WeightedGraph>,
    qubo: QuboInstance,
}

fn load_instances(spec: &InstanceSpec) -> Result<Vec<Loaded>> {
    let to_qubo = |g: &WeightedGraph| -> Result<QuboInstance> {
        match spec.problem {
            ProblemKind::MaxCut => Ok(maxcut_to_qubo(g)),
            ProblemKind::Mis => mis_to_qubo(g, crate::params::build::MIS_LAMBDA),
        }
    };
    match &spec.source {
        InstanceSource::Generate {
            kind,
            weights,
            seed,
            count,
        } => (0..*count)
            .map(|k| {
                let g = generate_instance(kind, *weights, seed + k as u64)?;
                let name = if *count == 1 {
                    spec.name.clone()
                } else {
                    format!("{}-{k}", spec.name)
                };
                Ok(Loaded {
                    name,
                    qubo: to_qubo(&g)?,
                    graph: Some(g),
                })
            })
            .collect(),
        InstanceSource::File { path } => {
            let text = std::fs::read_to_string(path)?;
            Ok(vec![match parse_problem(&text)? {
                Problem::Graph(g) => Loaded {
                    name: spec.name.clone(),
                    qubo: to_qubo(&g)?,
                    graph: Some(g),
                },
                Problem::Qubo(q) => Loaded {
                    name: spec.name.clone(),
                    graph: None,
                    qubo: q,
                },
            }])
        }
    }
}

fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut rng_seed = seed;
    for &p in parts {
        rng_seed = ChaCha8Rng::seed_from_u64(rng_seed ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15)).gen();
    }
    rng_seed
}

/// QAOA samples for one instance and depth, before filtering.
fn qaoa_samples(
    inst: &Loaded,
    diag: &CostDiagonal,
    problem: ProblemKind,
    p: usize,
    spec: &ExperimentSpec,
    tables: &Tables,
    seed: u64,
) -> Result<SampleSet> {
    let params = match (spec.angles, &inst.graph) {
        (Angles::Predicted, Some(g)) => {
            let method = spec.method.unwrap_or(match problem {
                ProblemKind::MaxCut => Method::Balanced,
                ProblemKind::Mis => Method::Mis,
            });
            predict(g, p, method, tables, spec.alpha)?
        }
        _ => {
            let cfg = OptimizeConfig {
                seed,
                ..Default::default()
            };
            optimize_params(diag, p, &cfg)?.params
        }
    };
    let state = qaoa_state(diag, &params);
    Ok(sample(&state, spec.shots, seed))
}

fn cold_trace(inst: &Loaded, optimum: f64, spec: &ExperimentSpec, seed: u64) -> Result<RunTrace> {
    let pool = WarmStartPool::random(inst.qubo.n(), spec.restarts, seed)?;
    let cfg = HeuristicConfig {
        target: Some(optimum),
        seed: mix(seed, &[3]),
        ..spec.heuristic.clone()
    };
    let mut t = multistart(&inst.qubo, &pool, spec.restarts, &cfg)?;
    t.optimum = Some(optimum);
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    inst: &Loaded,
    optimum: f64,
    problem: ProblemKind,
    p: usize,
    chain: &[FilterKind],
    rep: usize,
    spec: &ExperimentSpec,
    tables: &Tables,
    cold: &RunTrace,
    cell_seed: u64,
) -> Result<CellResult> {
    let q = &inst.qubo;
    let n = q.n();
    let filter = filter_label(chain);
    let id = cell_id(&inst.name, p, &filter, rep, spec);
    let diag = CostDiagonal::for_qaoa(q, spec.cap)?;
    let mut samples = match spec.warm_source {
        WarmSource::Qaoa => qaoa_samples(inst, &diag, problem, p, spec, tables, cell_seed)?,
        WarmSource::Uniform => {
            let pool = WarmStartPool::random(n, spec.shots as usize, cell_seed)?;
            SampleSet::from_bitstrings(n, pool.strings().iter().map(|s| s.as_slice()))?
        }
    };
    if let Some(m) = &spec.noise {
        samples = inject_readout_noise(&samples, &m.flips(), mix(cell_seed, &[1]))?;
    }
    for &k in chain {
        samples = apply_filter(k, &samples, Some(q), spec.noise.as_ref(), &spec.filter_config)?;
    }
    let source = match (spec.warm_source, chain.is_empty()) {
        (WarmSource::Uniform, _) => PoolSource::Random,
        (_, true) => PoolSource::Qaoa,
        _ => PoolSource::FilteredQaoa,
    };
    let warm_pool = WarmStartPool::from_samples(&samples, source, mix(cell_seed, &[2]))?;
    let hcfg = HeuristicConfig {
        target: Some(optimum),
        seed: mix(cell_seed, &[3]),
        ..spec.heuristic.clone()
    };
    let mut warm = multistart(q, &warm_pool, spec.restarts, &hcfg)?;
    warm.optimum = Some(optimum);
    let fc = fopt_curve(cold, None)?;
    let fw = fopt_curve(&warm, None)?;
    let rc = expected_runtime(&fc);
    let rw = expected_runtime(&fw);
    let ar = |t: &RunTrace| approximation_ratio_curve(t, q, None).ok();
    Ok(CellResult {
        report: QFactorReport {
            instance: inst.name.clone(),
            p,
            filter,
            cold: rc,
            warm: rw,
            q: q_of(rc, rw),
            restarts_cold: cold.restarts.len(),
            restarts_warm: warm.restarts.len(),
            pool: source.as_str().into(),
            best_known: false,
            error: None,
        },
        id,
        n,
        fopt_cold: fc.values,
        fopt_warm: fw.values,
        ar_cold: ar(cold),
        ar_warm: ar(&warm),
        warm_trace: Some(warm),
        cold_trace: Some(cold.clone()),
    })
}

fn cell_id(name: &str, p: usize, filter: &str, rep: usize, spec: &ExperimentSpec) -> String {
    if spec.replicates > 1 {
        format!("{name}_p{p}_{filter}_r{rep}")
    } else {
        format!("{name}_p{p}_{filter}")
    }
}

/// Runs every cell of `spec`. The cold run of an instance and replicate
/// is shared by all its depths and filter chains and uses the same restart
/// count as the warm runs. A failing cell is recorded with its error and the rest continue.
/// Cells run on the current rayon pool; the report keeps spec order.
pub fn run_experiment(spec: &ExperimentSpec, tables: &Tables) -> Result<ExperimentReport> {
    spec.validate()?;
    let mut loaded = Vec::new();
    for ispec in &spec.instances {
        let insts = load_instances(ispec)?;
        let certified = insts
            .into_iter()
            .map(|inst| {
                let opt = match brute_force_spectrum_capped(&inst.qubo.to_minimization(), spec.cap) {
                    Ok(s) => Ok(s.min_value()),
                    Err(e) => Err(e.to_string()),
                };
                (inst, opt)
            })
            .collect::<Vec<_>>();
        loaded.push((ispec.problem, certified));
    }
    // One cold run per instance and replicate, shared by every depth and
    // filter chain of that pair.
    let mut cold_jobs = Vec::new();
    for (ii, (_, insts)) in loaded.iter().enumerate() {
        for (k, (inst, opt)) in insts.iter().enumerate() {
            for rep in 0..spec.replicates {
                cold_jobs.push((inst, opt, mix(spec.seed, &[ii as u64, k as u64, rep as u64, 0xc01d])));
            }
        }
    }
    let colds: Vec<Result<RunTrace>> = cold_jobs
        .into_par_iter()
        .map(|(inst, opt, seed)| match opt {
            Ok(o) => cold_trace(inst, *o, spec, seed),
            Err(msg) => Err(Error::param(format!("optimum: {msg}"))),
        })
        .collect();
    let mut jobs = Vec::new();
    let mut c = 0;
    for (ii, (problem, insts)) in loaded.iter().enumerate() {
        for (k, (inst, opt)) in insts.iter().enumerate() {
            for rep in 0..spec.replicates {
                let cold = &colds[c];
                c += 1;
                for &p in &spec.ps {
                    for chain in &spec.filters {
                        let parts = [ii as u64, k as u64, rep as u64, p as u64, hash_chain(chain)];
                        jobs.push((inst, opt, cold, *problem, p, chain.as_slice(), rep, mix(spec.seed, &parts)));
                    }
                }
            }
        }
    }
    let cells = jobs
        .into_par_iter()
        .map(|(inst, opt, cold, problem, p, chain, rep, seed)| {
            let res = match (opt, cold) {
                (Ok(o), Ok(cold)) => run_cell(inst, *o, problem, p, chain, rep, spec, tables, cold, seed),
                (Err(msg), _) => Err(Error::param(format!("optimum: {msg}"))),
                (_, Err(e)) => Err(Error::param(format!("cold run: {e}"))),
            };
            res.unwrap_or_else(|e| failed_cell(inst, p, chain, rep, spec, e))
        })
        .collect();
    Ok(ExperimentReport {
        id: spec.id.clone(),
        cells,
    })
}

fn hash_chain(chain: &[FilterKind]) -> u64 {
    crate::bits::hash(filter_label(chain).as_bytes())
}

fn failed_cell(inst: &Loaded, p: usize, chain: &[FilterKind], rep: usize, spec: &ExperimentSpec, e: Error) -> CellResult {
    let filter = filter_label(chain);
    let id = cell_id(&inst.name, p, &filter, rep, spec);
    log::warn!("cell {id} failed: {e}");
    CellResult {
        id,
        n: inst.qubo.n(),
        report: QFactorReport {
            instance: inst.name.clone(),
            p,
            filter,
            cold: Runtime::INFINITE,
            warm: Runtime::INFINITE,
            q: None,
            restarts_cold: 0,
            restarts_warm: 0,
            pool: String::new(),
            best_known: false,
            error: Some(e.to_string()),
        },
        fopt_cold: Vec::new(),
        fopt_warm: Vec::new(),
        ar_cold: None,
        ar_warm: None,
        warm_trace: None,
        cold_trace: None,
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "inf".into()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), num)
}

impl ExperimentReport {
    pub fn qfactor_csv(&self) -> String {
        let mut out = String::from("instance,p,filter,Q,Rmin_cold,Rmin_warm,Tstar_cold,Tstar_warm\n");
        for c in &self.cells {
            let r = &c.report;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.id.strip_suffix(&format!("_p{}_{}", r.p, r.filter)).unwrap_or(&r.instance),
                r.p,
                r.filter,
                opt_num(r.q),
                num(r.cold.r_min),
                num(r.warm.r_min),
                opt_num(r.cold.t_star),
                opt_num(r.warm.t_star)
            )
            .unwrap();
        }
        out
    }

    /// Minimum, median and maximum Q per `(n, p, filter)` over instances
    /// and replicates with a defined Q.
    pub fn summary_csv(&self) -> String {
        let mut groups: BTreeMap<(usize, usize, String), Vec<f64>> = BTreeMap::new();
        for c in &self.cells {
            if let Some(q) = c.report.q {
                groups.entry((c.n, c.report.p, c.report.filter.clone())).or_default().push(q);
            }
        }
        let mut out = String::from("n,p,filter,count,Q_min,Q_median,Q_max\n");
        for ((n, p, f), v) in groups {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            writeln!(out, "{n},{p},{f},{},{},{},{}", v.len(), lo, median(&v), hi).unwrap();
        }
        out
    }

    fn curves_csv(a: &[f64], b: &[f64]) -> String {
        let mut out = String::from("T,cold,warm\n");
        for t in 0..a.len().max(b.len()) {
            let g = |v: &[f64]| v.get(t).map_or(String::new(), |x| format!("{x}"));
            writeln!(out, "{},{},{}", t + 1, g(a), g(b)).unwrap();
        }
        out
    }

    /// The per-cell reports as JSON; infinite runtimes become `null`.
    pub fn to_json(&self) -> String {
        let reports: Vec<&QFactorReport> = self.cells.iter().map(|c| &c.report).collect();
        serde_json::to_string_pretty(&reports).expect("reports serialise")
    }

    /// Every output file as `(name, contents)`, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut files = vec![
            ("qfactor.csv".to_string(), self.qfactor_csv()),
            ("qfactor.json".to_string(), self.to_json()),
            ("qfactor_summary.csv".to_string(), self.summary_csv()),
        ];
        for c in &self.cells {
            if c.report.error.is_some() {
                continue;
            }
            files.push((format!("fopt_{}.csv", c.id), Self::curves_csv(&c.fopt_cold, &c.fopt_warm)));
            if let (Some(a), Some(b)) = (&c.ar_cold, &c.ar_warm) {
                files.push((format!("ar_{}.csv", c.id), Self::curves_csv(a, b)));
            }
        }
        files
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in self.files() {
            write_atomic(&dir.join(name), text.as_bytes())?;
        }
        Ok(())
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Sense-independent cost check used by tests and tools.
pub fn is_optimal(cost_min: f64, optimum_min: f64) -> bool {
    cost_min <= optimum_min + COST_TOL
}
