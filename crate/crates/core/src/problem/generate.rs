//! Seeded instance generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Edge, WeightedGraph};
use crate::routing::{self, HardwareGraph};
use crate::{Error, Result};

/// Graph family and its size parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceKind {
    ErdosRenyi { n: usize, p_edge: f64 },
    RandomRegular { n: usize, degree: usize },
    Line { n: usize },
    /// `rows x cols` square lattice with one interior vertex removed and the
    /// its row contracted across the gap.
    DefectLattice { rows: usize, cols: usize },
    /// Connected `n`-qubit patch of the 156-qubit heavy-hex device with
    /// `swap_edges` edges promoted to swap edges.
    SwapEnhanced { n: usize, swap_edges: usize },
}

/// Edge-weight distribution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Weights {
    #[default]
    Unit,
    Uniform { lo: f64, hi: f64 },
}

impl Weights {
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Weights::Unit => 1.0,
            Weights::Uniform { lo, hi } if lo == hi => lo,
            Weights::Uniform { lo, hi } => rng.gen_range(lo..hi),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Weights::Unit => Ok(()),
            Weights::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            Weights::Uniform { lo, hi } => Err(Error::param(format!("bad weight range [{lo}, {hi}]"))),
        }
    }
}

/// Generates an instance; a pure function of `(kind, weights, seed)`.
///
/// Weights are drawn after the topology, one per edge in sorted edge order.
/// Swap-enhanced graphs ignore `weights` unless it is non-unit, and default
/// to `U[-1, 1]`.
pub fn generate_instance(kind: &InstanceKind, weights: Weights, seed: u64) -> Result<WeightedGraph> {
    weights.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, pairs) = match *kind {
        InstanceKind::ErdosRenyi { n, p_edge } => {
            if !(0.0..=1.0).contains(&p_edge) {
                return Err(Error::param(format!("edge probability {p_edge} outside [0, 1]")));
            }
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < p_edge {
                        pairs.push((i, j));
                    }
                }
            }
            (n, pairs)
        }
        InstanceKind::RandomRegular { n, degree } => (n, random_regular(n, degree, &mut rng)?),
        InstanceKind::Line { n } => (n, (1..n).map(|i| (i - 1, i)).collect()),
        InstanceKind::DefectLattice { rows, cols } => defect_lattice(rows, cols)?,
        InstanceKind::SwapEnhanced { n, swap_edges } => {
            let w = match weights {
                Weights::Unit => Weights::Uniform { lo: -1.0, hi: 1.0 },
                other => other,
            };
            return swap_enhanced(n, swap_edges, w, &mut rng);
        }
    };
    let mut pairs = pairs;
    pairs.sort_unstable();
    let edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, weights.draw(&mut rng)))
        .collect();
    WeightedGraph::new(n, edges)
}

/// Uniform-ish random `degree`-regular graph by sequential random pairing of
/// stubs, restarting when the pairing gets stuck. Dense requests are built as
/// the complement of a sparse one.
fn random_regular(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    if degree >= n && !(n == 0 && degree == 0) {
        return Err(Error::param(format!("degree {degree} needs more than {n} vertices")));
    }
    if (n * degree) % 2 != 0 {
        return Err(Error::param(format!("n * d = {} must be even", n * degree)));
    }
    if degree > (n - 1) / 2 {
        let sparse = random_regular(n, n - 1 - degree, rng)?;
        let mut adj = vec![vec![false; n]; n];
        for (i, j) in sparse {
            adj[i][j] = true;
            adj[j][i] = true;
        }
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !adj[i][j] {
                    pairs.push((i, j));
                }
            }
        }
        return Ok(pairs);
    }
    for _ in 0..1000 {
        if let Some(p) = try_pairing(n, degree, rng) {
            return Ok(p);
        }
    }
    Err(Error::param(format!(
        "could not generate a {degree}-regular graph on {n} vertices"
    )))
}

fn try_pairing(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
    let mut adj = vec![vec![false; n]; n];
    let mut pairs = Vec::with_capacity(n * degree / 2);
    while !stubs.is_empty() {
        let mut found = None;
        for _ in 0..50 {
            let a = rng.gen_range(0..stubs.len());
            let b = rng.gen_range(0..stubs.len());
            let (u, v) = (stubs[a], stubs[b]);
            if a != b && u != v && !adj[u][v] {
                found = Some((a, b));
                break;
            }
        }
        if found.is_none() {
            // Random probing failed; look for any suitable pair before giving up.
            let mut candidates = Vec::new();
            for a in 0..stubs.len() {
                for b in a + 1..stubs.len() {
                    let (u, v) = (stubs[a], stubs[b]);
                    if u != v && !adj[u][v] {
                        candidates.push((a, b));
                    }
                }
            }
            found = Some(*candidates.choose(rng)?);
        }
        let (a, b) = found.unwrap();
        let (u, v) = (stubs[a], stubs[b]);
        adj[u][v] = true;
        adj[v][u] = true;
        pairs.push((u.min(v), u.max(v)));
        let (hi, lo) = (a.max(b), a.min(b));
        stubs.swap_remove(hi);
        stubs.swap_remove(lo);
    }
    Some(pairs)
}

/// Square lattice with a single defect: vertex `(rows/2, cols/2)` is deleted
/// and the row is contracted across the gap, joining its left and right
/// neighbours. The remaining vertical bonds are untouched, so five-cycles
/// appear at the seam and the checkerboard independent set gains a domain
/// wall.
fn defect_lattice(rows: usize, cols: usize) -> Result<(usize, Vec<(usize, usize)>)> {
    if rows < 3 || cols < 3 {
        return Err(Error::param("defect lattice needs at least 3 x 3 sites"));
    }
    let (r0, c0) = (rows / 2, cols / 2);
    let mut id = vec![vec![None; cols]; rows];
    let mut next = 0;
    for (r, row) in id.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            if (r, c) != (r0, c0) {
                *slot = Some(next);
                next += 1;
            }
        }
    }
    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let Some(u) = id[r][c] else { continue };
            if c + 1 < cols {
                if let Some(v) = id[r][c + 1] {
                    pairs.push((u, v));
                }
            }
            if r + 1 < rows {
                if let Some(v) = id[r + 1][c] {
                    pairs.push((u, v));
                }
            }
        }
    }
    if let (Some(a), Some(b)) = (id[r0][c0 - 1], id[r0][c0 + 1]) {
        pairs.push((a, b));
    }
    Ok((next, pairs))
}

fn swap_enhanced(
    n: usize,
    swap_edges: usize,
    weights: Weights,
    rng: &mut ChaCha8Rng,
) -> Result<WeightedGraph> {
    let hw = HardwareGraph::heavy_hex_156();
    if n < 2 || n > hw.num_qubits() {
        return Err(Error::param(format!("swap-enhanced size {n} outside [2, 156]")));
    }
    let patch = hw.bfs_patch(0, n);
    let base = hw.graph().induced_subgraph(&patch);
    let mut candidates: Vec<(usize, usize)> = base.edges().iter().map(|&(i, j, _)| (i, j)).collect();
    candidates.shuffle(rng);
    let adj = base.adjacency();
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut blocked = vec![false; n];
    for (i, j) in candidates {
        if chosen.len() == swap_edges {
            break;
        }
        if blocked[i] || blocked[j] {
            continue;
        }
        // Endpoints and all their neighbours become unavailable so that no
        // neighbour of a swap vertex touches another swap edge.
        let mut trial = chosen.clone();
        trial.push((i, j));
        if routing::check_swap_assumption(&base, &trial).is_err() {
            continue;
        }
        chosen.push((i, j));
        for v in [i, j] {
            blocked[v] = true;
            for &(u, _) in &adj[v] {
                blocked[u] = true;
            }
        }
    }
    if chosen.len() < swap_edges {
        return Err(Error::param(format!(
            "only {} compatible swap edges fit in a {n}-qubit patch",
            chosen.len()
        )));
    }
    let built = routing::build_swap_enhanced(&base, &chosen)?;
    let edges: Vec<Edge> = built
        .graph
        .edges()
        .iter()
        .map(|&(i, j, _)| (i, j, weights.draw(rng)))
        .collect();
    WeightedGraph::new(n, edges)
}
