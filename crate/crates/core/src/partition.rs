//! Split-and-recombine for instances larger than the emulation cap.
//!
//! The interaction graph is cut into blocks of at most `max_block`
//! vertices, each block is solved on its own, and the block solutions are
//! glued together by choosing, per block, whether to flip every bit. The
//! choice is itself a QUBO over one variable per block.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{optimize_params, qaoa_state, sample, OptimizeConfig};
use crate::filters::{apply_filter, FilterConfig, FilterKind};
use crate::heuristics::{tabu_search, HeuristicConfig, PoolSource, WarmStartPool};
use crate::params::{predict, Method, Tables};
use crate::problem::{brute_force_spectrum_capped, CostDiagonal, Edge, QuboInstance, WeightedGraph};
use crate::{Error, Result};

const EPS: f64 = 1e-12;

/// Assignment of vertices to blocks plus the edges that cross blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub cut_edges: Vec<Edge>,
}

impl Partition {
    /// Builds a partition from an assignment, relabelling blocks in order
    /// of first appearance.
    pub fn from_assignment(g: &WeightedGraph, assignment: &[usize]) -> Result<Self> {
        if assignment.len() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                got: assignment.len(),
            });
        }
        let mut relabel = std::collections::BTreeMap::new();
        let assignment: Vec<usize> = assignment
            .iter()
            .map(|&b| {
                let next = relabel.len();
                *relabel.entry(b).or_insert(next)
            })
            .collect();
        let cut_edges = g
            .edges()
            .iter()
            .filter(|&&(i, j, _)| assignment[i] != assignment[j])
            .copied()
            .collect();
        Ok(Partition { assignment, cut_edges })
    }

    pub fn num_blocks(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    /// Vertices of each block in increasing order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks()];
        for (v, &b) in self.assignment.iter().enumerate() {
            blocks[b].push(v);
        }
        blocks
    }

    pub fn cut_weight(&self) -> f64 {
        self.cut_edges.iter().map(|e| e.2.abs()).sum()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks().iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Working graph for one coarsening level.
#[derive(Debug, Clone)]
struct Level {
    vweight: Vec<usize>,
    adj: Vec<Vec<(usize, f64)>>,
    /// Coarse vertex of every vertex of the finer level.
    fine_to_coarse: Vec<usize>,
}

fn level_from_graph(g: &WeightedGraph) -> Level {
    let mut adj = vec![Vec::new(); g.n()];
    for &(i, j, w) in g.edges() {
        adj[i].push((j, w.abs()));
        adj[j].push((i, w.abs()));
    }
    Level {
        vweight: vec![1; g.n()],
        adj,
        fine_to_coarse: Vec::new(),
    }
}

/// Heavy-edge matching: vertices are visited in a seeded random order and
/// matched to the unmatched neighbour with the heaviest connecting edge,
/// as long as the merged weight stays within `max_weight`.
fn coarsen(l: &Level, max_weight: usize, rng: &mut ChaCha8Rng) -> Level {
    let n = l.vweight.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![usize::MAX; n];
    for &v in &order {
        if mate[v] != usize::MAX {
            continue;
        }
        let best = l.adj[v]
            .iter()
            .filter(|&&(u, _)| u != v && mate[u] == usize::MAX && l.vweight[u] + l.vweight[v] <= max_weight)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some(&(u, _)) => {
                mate[v] = u;
                mate[u] = v;
            }
            None => mate[v] = v,
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut vweight = Vec::new();
    for v in 0..n {
        if map[v] == usize::MAX {
            map[v] = vweight.len();
            map[mate[v]] = vweight.len();
            vweight.push(l.vweight[v] + if mate[v] != v { l.vweight[mate[v]] } else { 0 });
        }
    }
    let mut merged: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); vweight.len()];
    for v in 0..n {
        for &(u, w) in &l.adj[v] {
            let (a, b) = (map[v], map[u]);
            if a != b {
                *merged[a].entry(b).or_insert(0.0) += w;
            }
        }
    }
    Level {
        vweight,
        adj: merged.into_iter().map(|m| m.into_iter().collect()).collect(),
        fine_to_coarse: map,
    }
}

/// Greedy graph growing: each block starts from the unassigned vertex of
/// least connectivity and absorbs the frontier vertex most strongly tied
/// to it until it reaches `target`. A block whose frontier runs dry stops
/// early. Leftovers go to the tied block with room, else to a new block.
fn grow(l: &Level, k: usize, target: usize, max_block: usize) -> Vec<usize> {
    let n = l.vweight.len();
    let mut part = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for b in 0..k {
        let Some(start) = (0..n)
            .filter(|&v| part[v] == usize::MAX)
            .min_by(|&a, &c| strength(l, a).total_cmp(&strength(l, c)).then(a.cmp(&c)))
        else {
            break;
        };
        part[start] = b;
        let mut size = l.vweight[start];
        let mut tie = vec![0.0; n];
        for &(u, w) in &l.adj[start] {
            tie[u] += w;
        }
        while size < target {
            let next = (0..n)
                .filter(|&v| part[v] == usize::MAX && tie[v] > 0.0 && size + l.vweight[v] <= target)
                .max_by(|&a, &c| tie[a].total_cmp(&tie[c]).then(c.cmp(&a)));
            let Some(v) = next else { break };
            part[v] = b;
            size += l.vweight[v];
            for &(u, w) in &l.adj[v] {
                tie[u] += w;
            }
        }
        sizes.push(size);
    }
    for v in 0..n {
        if part[v] != usize::MAX {
            continue;
        }
        let mut ties = vec![0.0; sizes.len()];
        for &(u, w) in &l.adj[v] {
            if part[u] != usize::MAX {
                ties[part[u]] += w;
            }
        }
        let fit = (0..sizes.len())
            .filter(|&b| sizes[b] + l.vweight[v] <= max_block)
            .max_by(|&a, &c| ties[a].total_cmp(&ties[c]).then(sizes[c].cmp(&sizes[a])).then(c.cmp(&a)));
        let b = fit.unwrap_or_else(|| {
            sizes.push(0);
            sizes.len() - 1
        });
        part[v] = b;
        sizes[b] += l.vweight[v];
    }
    part
}

fn strength(l: &Level, v: usize) -> f64 {
    l.adj[v].iter().map(|e| e.1).sum()
}

fn ties(l: &Level, part: &[usize], v: usize, blocks: usize) -> Vec<f64> {
    let mut t = vec![0.0; blocks];
    for &(u, w) in &l.adj[v] {
        t[part[u]] += w;
    }
    t
}

/// Kernighan-Lin style refinement: single moves with positive gain into
/// blocks with room, then pairwise swaps with positive gain, repeated until
/// a pass changes nothing.
fn refine(l: &Level, part: &mut [usize], max_block: usize) {
    let n = l.vweight.len();
    let blocks = part.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; blocks];
    for v in 0..n {
        sizes[part[v]] += l.vweight[v];
    }
    for _ in 0..50 {
        let mut changed = false;
        for v in 0..n {
            let t = ties(l, part, v, blocks);
            let a = part[v];
            let best = (0..blocks)
                .filter(|&b| b != a && sizes[b] + l.vweight[v] <= max_block)
                .max_by(|&x, &y| t[x].total_cmp(&t[y]).then(y.cmp(&x)));
            if let Some(b) = best {
                if t[b] - t[a] > EPS {
                    part[v] = b;
                    sizes[a] -= l.vweight[v];
                    sizes[b] += l.vweight[v];
                    changed = true;
                }
            }
        }
        let boundary: Vec<usize> = (0..n).filter(|&v| l.adj[v].iter().any(|&(u, _)| part[u] != part[v])).collect();
        for (x, &v) in boundary.iter().enumerate() {
            for &u in &boundary[x + 1..] {
                let (a, b) = (part[v], part[u]);
                if a == b {
                    continue;
                }
                let (wv, wu) = (l.vweight[v], l.vweight[u]);
                if sizes[a] - wv + wu > max_block || sizes[b] - wu + wv > max_block {
                    continue;
                }
                let tv = ties(l, part, v, blocks);
                let tu = ties(l, part, u, blocks);
                let w_uv: f64 = l.adj[v].iter().filter(|e| e.0 == u).map(|e| e.1).sum();
                let gain = (tv[b] - tv[a]) + (tu[a] - tu[b]) - 2.0 * w_uv;
                if gain > EPS {
                    part[v] = b;
                    part[u] = a;
                    sizes[a] = sizes[a] - wv + wu;
                    sizes[b] = sizes[b] - wu + wv;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Multilevel partition minimising the total `|w|` of cut edges with every
/// block holding at most `max_block` vertices. The block count starts at
/// `ceil(n / max_block)`; blocks are grown to `ceil(n / k)` vertices.
pub fn partition_graph(g: &WeightedGraph, max_block: usize, seed: u64) -> Result<Partition> {
    if max_block < 2 {
        return Err(Error::param("max_block must be at least 2"));
    }
    let n = g.n();
    if n == 0 {
        return Partition::from_assignment(g, &[]);
    }
    let k = n.div_ceil(max_block);
    let target = n.div_ceil(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = vec![level_from_graph(g)];
    let stop = (8 * k).max(32);
    let max_weight = (target / 3).max(1);
    while levels.last().unwrap().vweight.len() > stop {
        let next = coarsen(levels.last().unwrap(), max_weight, &mut rng);
        if next.vweight.len() * 10 > levels.last().unwrap().vweight.len() * 9 {
            break;
        }
        levels.push(next);
    }
    let coarsest = levels.last().unwrap();
    let mut part = grow(coarsest, k, target, max_block);
    refine(coarsest, &mut part, max_block);
    for i in (1..levels.len()).rev() {
        let map = &levels[i].fine_to_coarse;
        part = map.iter().map(|&c| part[c]).collect();
        refine(&levels[i - 1], &mut part, max_block);
    }
    Partition::from_assignment(g, &part)
}

/// Block-flip problem: `value(f) = offset + qubo.energy(f)` is the
/// original objective of the full assignment after flipping every block
/// `b` with `f_b = 1`.
///
/// With `s_i = 1 - 2 x_i`, flipping block `b` sends `x_i` to
/// `x_i + s_i f_b`. A linear term `c_i x_i` then adds `c_i s_i f_b`; a
/// pair `Q_ij x_i x_j` inside one block adds
/// `Q_ij (s_i x_j + s_j x_i + s_i s_j) f_b`; a pair across blocks `a`, `b`
/// adds `Q_ij (s_i x_j f_a + s_j x_i f_b + s_i s_j f_a f_b)`. For Max-Cut
/// the linear parts cancel and only the block couplings remain.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipQubo {
    pub qubo: QuboInstance,
    pub offset: f64,
}

impl FlipQubo {
    pub fn value(&self, flips: &[u8]) -> f64 {
        self.offset + self.qubo.energy(flips)
    }
}

/// Assembles per-block local solutions (in each block's vertex order) into
/// one assignment.
pub fn concatenate(partition: &Partition, locals: &[Vec<u8>]) -> Result<Vec<u8>> {
    let blocks = partition.blocks();
    if locals.len() != blocks.len() {
        return Err(Error::param(format!(
            "expected {} block solutions, got {}",
            blocks.len(),
            locals.len()
        )));
    }
    let mut x = vec![0u8; partition.assignment.len()];
    for (vs, local) in blocks.iter().zip(locals) {
        if local.len() != vs.len() {
            return Err(Error::DimensionMismatch {
                expected: vs.len(),
                got: local.len(),
            });
        }
        for (&v, &b) in vs.iter().zip(local) {
            x[v] = b;
        }
    }
    Ok(x)
}

pub fn apply_flips(partition: &Partition, x: &[u8], flips: &[u8]) -> Vec<u8> {
    x.iter()
        .zip(&partition.assignment)
        .map(|(&b, &blk)| b ^ flips[blk])
        .collect()
}

pub fn build_flip_qubo(q: &QuboInstance, partition: &Partition, locals: &[Vec<u8>]) -> Result<FlipQubo> {
    if partition.assignment.len() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: partition.assignment.len(),
        });
    }
    let x = concatenate(partition, locals)?;
    let blk = &partition.assignment;
    let nb = partition.num_blocks();
    let s: Vec<f64> = x.iter().map(|&b| 1.0 - 2.0 * b as f64).collect();
    let xf: Vec<f64> = x.iter().map(|&b| b as f64).collect();
    let mut linear = vec![0.0; nb];
    let mut pairs = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for (i, &c) in q.linear().iter().enumerate() {
        linear[blk[i]] += c * s[i];
    }
    for &(i, j, w) in q.quadratic() {
        let (a, b) = (blk[i], blk[j]);
        if a == b {
            linear[a] += w * (s[i] * xf[j] + s[j] * xf[i] + s[i] * s[j]);
        } else {
            linear[a] += w * s[i] * xf[j];
            linear[b] += w * s[j] * xf[i];
            *pairs.entry((a.min(b), a.max(b))).or_insert(0.0) += w * s[i] * s[j];
        }
    }
    let quadratic = pairs.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    Ok(FlipQubo {
        qubo: QuboInstance::new(nb, q.sense(), linear, quadratic)?,
        offset: q.energy(&x),
    })
}

/// Max-Cut block couplings `J_ab = sum w_ij z_i z_j` over cut edges with
/// `z = 1 - 2x` taken from the local solutions. The recombined cut is
/// `C_intra + W_cut / 2 - (1/2) sum_{a<b} J_ab s_a s_b` for block signs
/// `s = 1 - 2f`.
pub fn maxcut_block_couplings(partition: &Partition, locals: &[Vec<u8>]) -> Result<Vec<Edge>> {
    let x = concatenate(partition, locals)?;
    let mut pairs = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for &(i, j, w) in &partition.cut_edges {
        let (a, b) = (partition.assignment[i], partition.assignment[j]);
        let z = (1.0 - 2.0 * x[i] as f64) * (1.0 - 2.0 * x[j] as f64);
        *pairs.entry((a.min(b), a.max(b))).or_insert(0.0) += w * z;
    }
    Ok(pairs.into_iter().map(|((a, b), w)| (a, b, w)).collect())
}

/// Largest block count solved by enumeration.
pub const BRUTE_FORCE_BLOCKS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Recombined {
    pub x: Vec<u8>,
    pub flips: Vec<u8>,
    /// Objective of `x` in the instance's own sense.
    pub value: f64,
}

/// Chooses block flips for the local solutions: by enumeration for at most
/// [`BRUTE_FORCE_BLOCKS`] blocks (the all-zero pattern wins ties), else by
/// tabu search from no flips.
pub fn recombine(q: &QuboInstance, partition: &Partition, locals: &[Vec<u8>], cfg: &HeuristicConfig) -> Result<Recombined> {
    let fq = build_flip_qubo(q, partition, locals)?;
    let nb = fq.qubo.n();
    let flips = if nb <= BRUTE_FORCE_BLOCKS {
        let spec = brute_force_spectrum_capped(&fq.qubo.to_minimization(), BRUTE_FORCE_BLOCKS)?;
        let vals = spec.values();
        let mut best = 0;
        for (k, &v) in vals.iter().enumerate() {
            if v < vals[best] - EPS {
                best = k;
            }
        }
        crate::bits::from_index(best as u64, nb)
    } else {
        let r = tabu_search(&fq.qubo, &vec![0; nb], cfg)?;
        if r.cost <= fq.qubo.min_energy(&vec![0; nb]) {
            r.x
        } else {
            vec![0; nb]
        }
    };
    let x = apply_flips(partition, &concatenate(partition, locals)?, &flips);
    Ok(Recombined {
        value: q.energy(&x),
        x,
        flips,
    })
}

/// Sub-QUBO on `vertices` with every other variable dropped.
pub fn restrict(q: &QuboInstance, vertices: &[usize]) -> QuboInstance {
    let mut index = vec![usize::MAX; q.n()];
    for (k, &v) in vertices.iter().enumerate() {
        index[v] = k;
    }
    let linear = vertices.iter().map(|&v| q.linear()[v]).collect();
    let quadratic = q
        .quadratic()
        .iter()
        .filter(|&&(i, j, _)| index[i] != usize::MAX && index[j] != usize::MAX)
        .map(|&(i, j, w)| (index[i].min(index[j]), index[i].max(index[j]), w))
        .collect();
    QuboInstance::new(vertices.len(), q.sense(), linear, quadratic).expect("restriction of a valid instance")
}

#[derive(Debug, Clone)]
pub struct LargeConfig {
    pub max_block: usize,
    pub p: usize,
    pub shots: u64,
    pub method: Method,
    pub alpha: f64,
    pub filters: Vec<FilterKind>,
    pub filter_config: FilterConfig,
    pub restarts: usize,
    pub heuristic: HeuristicConfig,
    pub seed: u64,
}

impl Default for LargeConfig {
    fn default() -> Self {
        LargeConfig {
            max_block: 16,
            p: 2,
            shots: 1000,
            method: Method::Balanced,
            alpha: 0.5,
            filters: vec![FilterKind::Energy],
            filter_config: FilterConfig::default(),
            restarts: 20,
            heuristic: HeuristicConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeSolution {
    pub partition: Partition,
    pub locals: Vec<Vec<u8>>,
    pub recombined: Recombined,
    /// Objective of the plain concatenation of the local solutions.
    pub concatenated_value: f64,
}

/// Full pipeline on an instance over the qubit budget. Each block is
/// emulated with predicted angles when `graph` is given (angles are
/// optimised otherwise), sampled, filtered and used to warm-start a
/// multistart tabu run; the best result is the block's local solution.
pub fn solve_large(q: &QuboInstance, graph: Option<&WeightedGraph>, cfg: &LargeConfig, tables: &Tables) -> Result<LargeSolution> {
    if let Some(g) = graph {
        if g.n() != q.n() {
            return Err(Error::DimensionMismatch {
                expected: q.n(),
                got: g.n(),
            });
        }
    }
    let split_graph = graph.cloned().unwrap_or_else(|| q.interaction_graph());
    let partition = partition_graph(&split_graph, cfg.max_block, cfg.seed)?;
    let blocks = partition.blocks();
    let locals = blocks
        .par_iter()
        .enumerate()
        .map(|(b, vs)| {
            let seed = cfg.seed.wrapping_add(0x9e37_79b9 * (b as u64 + 1));
            solve_block(q, graph, vs, cfg, tables, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let concatenated_value = q.energy(&concatenate(&partition, &locals)?);
    let recombined = recombine(q, &partition, &locals, &cfg.heuristic)?;
    Ok(LargeSolution {
        partition,
        locals,
        recombined,
        concatenated_value,
    })
}

fn solve_block(
    q: &QuboInstance,
    graph: Option<&WeightedGraph>,
    vs: &[usize],
    cfg: &LargeConfig,
    tables: &Tables,
    seed: u64,
) -> Result<Vec<u8>> {
    let sub = restrict(q, vs);
    let diag = CostDiagonal::for_qaoa(&sub, cfg.max_block.max(vs.len()))?;
    let params = match graph {
        Some(g) => predict(&g.induced_subgraph(vs), cfg.p, cfg.method, tables, cfg.alpha)?,
        None => {
            let oc = OptimizeConfig {
                seed,
                restarts: 2,
                ..Default::default()
            };
            optimize_params(&diag, cfg.p, &oc)?.params
        }
    };
    let mut s = sample(&qaoa_state(&diag, &params), cfg.shots, seed);
    for &k in &cfg.filters {
        s = apply_filter(k, &s, Some(&sub), None, &cfg.filter_config)?;
    }
    let pool = WarmStartPool::from_samples(&s, PoolSource::FilteredQaoa, seed)?;
    let hc = HeuristicConfig {
        seed,
        ..cfg.heuristic.clone()
    };
    // The best sample seeds the first restart, so the local solution is
    // never worse than the best filtered sample.
    let mut best = best_string(&sub, &pool);
    let mut best_cost = sub.min_energy(&best);
    let starts = std::iter::once(best.clone()).chain((0..cfg.restarts.saturating_sub(1)).map(|r| pool.draw(r).to_vec()));
    for (r, start) in starts.enumerate() {
        let c = HeuristicConfig {
            seed: seed.wrapping_add(r as u64),
            ..hc.clone()
        };
        let res = tabu_search(&sub, &start, &c)?;
        if res.cost < best_cost {
            best_cost = res.cost;
            best = res.x;
        }
    }
    Ok(best)
}

/// Lowest-cost string in the pool.
fn best_string(q: &QuboInstance, pool: &WarmStartPool) -> Vec<u8> {
    pool.strings()
        .iter()
        .min_by(|a, b| q.min_energy(a).total_cmp(&q.min_energy(b)))
        .expect("non-empty pool")
        .clone()
}
