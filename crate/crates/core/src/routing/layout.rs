//! Initial placements of problem vertices on hardware qubits.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HardwareGraph, QubitMapping};
use crate::problem::WeightedGraph;
use crate::{Error, Result};

/// Number of problem edges landing on hardware edges, and the summed
/// hardware distance over all problem edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutScore {
    pub overlap: usize,
    pub total_distance: u64,
}

impl LayoutScore {
    pub fn of(g: &WeightedGraph, h: &HardwareGraph, m: &QubitMapping) -> Self {
        score(g, h, m.as_slice())
    }

    /// Higher overlap first, then shorter total distance.
    fn better(&self, other: &Self) -> bool {
        (self.overlap, std::cmp::Reverse(self.total_distance)) > (other.overlap, std::cmp::Reverse(other.total_distance))
    }
}

fn score(g: &WeightedGraph, h: &HardwareGraph, pos: &[usize]) -> LayoutScore {
    let mut s = LayoutScore {
        overlap: 0,
        total_distance: 0,
    };
    for &(i, j, _) in g.edges() {
        let d = h.distance(pos[i], pos[j]);
        s.overlap += (d == 1) as usize;
        s.total_distance += d as u64;
    }
    s
}

fn check_fits(g: &WeightedGraph, h: &HardwareGraph) -> Result<()> {
    if g.n() > h.num_qubits() {
        return Err(Error::param(format!(
            "{} vertices do not fit on {} qubits",
            g.n(),
            h.num_qubits()
        )));
    }
    Ok(())
}

/// Orders vertices by their Fiedler-vector component (unweighted
/// Laplacian) and lays them along a simple hardware path. The path comes
/// from a depth-first search that prefers the neighbour with the fewest
/// free neighbours and backtracks within a step budget; if no path of
/// length `n` turns up, the order is packed onto a breadth-first chain
/// from the hardware centre instead.
pub fn fiedler_layout(g: &WeightedGraph, h: &HardwareGraph) -> Result<QubitMapping> {
    check_fits(g, h)?;
    let n = g.n();
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let order = fiedler_order(g);
    let path = hardware_path(h, n).unwrap_or_else(|| {
        log::warn!("no simple hardware path of length {n}; packing a BFS chain");
        h.bfs_patch(h.center(), n)
    });
    let mut pos = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = path[k];
    }
    QubitMapping::new(pos, h.num_qubits())
}

/// Vertices sorted by Fiedler component, ties by index. The eigenvector
/// sign is fixed so that vertex 0 is not after its mirror image.
pub(crate) fn fiedler_order(g: &WeightedGraph) -> Vec<usize> {
    let n = g.n();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for &(i, j, _) in g.edges() {
        lap[(i, j)] -= 1.0;
        lap[(j, i)] -= 1.0;
        lap[(i, i)] += 1.0;
        lap[(j, j)] += 1.0;
    }
    let eig = SymmetricEigen::new(lap);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut f: Vec<f64> = eig.eigenvectors.column(idx[1]).iter().copied().collect();
    if let Some(first) = f.iter().copied().find(|v| v.abs() > 1e-9) {
        if first > 0.0 {
            f.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
    order
}

const PATH_BUDGET: usize = 200_000;

/// Simple path on `n` qubits, if the search finds one within budget.
fn hardware_path(h: &HardwareGraph, n: usize) -> Option<Vec<usize>> {
    if n == 0 {
        return Some(Vec::new());
    }
    let q = h.num_qubits();
    let mut starts: Vec<usize> = (0..q).collect();
    // Low-degree qubits make good path ends.
    starts.sort_by_key(|&v| (h.neighbors(v).len(), v));
    let mut budget = PATH_BUDGET;
    for &s in starts.iter().take(16) {
        let mut used = vec![false; q];
        let mut path = vec![s];
        used[s] = true;
        if extend(h, n, &mut path, &mut used, &mut budget) {
            return Some(path);
        }
        if budget == 0 {
            break;
        }
    }
    None
}

fn extend(h: &HardwareGraph, n: usize, path: &mut Vec<usize>, used: &mut [bool], budget: &mut usize) -> bool {
    if path.len() == n {
        return true;
    }
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let last = *path.last().expect("non-empty path");
    let free = |v: usize, used: &[bool]| h.neighbors(v).iter().filter(|&&w| !used[w]).count();
    let mut next: Vec<usize> = h.neighbors(last).iter().copied().filter(|&v| !used[v]).collect();
    next.sort_by_key(|&v| (free(v, used), v));
    for v in next {
        used[v] = true;
        path.push(v);
        if extend(h, n, path, used, budget) {
            return true;
        }
        path.pop();
        used[v] = false;
    }
    false
}

/// Heuristic quadratic-assignment layout maximising the number of problem
/// edges placed on hardware edges, with total distance as tie-break.
/// Candidates come from a greedy growth around the hardware centre and
/// from seeded random placements; each is improved by exchange and
/// relocation moves, followed by perturb-and-descend rounds on the best.
pub fn qap_layout(g: &WeightedGraph, h: &HardwareGraph, seed: u64) -> Result<QubitMapping> {
    check_fits(g, h)?;
    let n = g.n();
    if n == 0 {
        return QubitMapping::new(Vec::new(), h.num_qubits());
    }
    let adj: Vec<Vec<usize>> = g.adjacency().into_iter().map(|r| r.into_iter().map(|e| e.0).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = vec![greedy_growth(&adj, h)];
    for _ in 0..3 {
        candidates.push(random_positions(n, h, &mut rng));
    }
    let mut best: Option<(LayoutScore, Vec<usize>)> = None;
    for mut pos in candidates {
        descend(g, &adj, h, &mut pos);
        let s = score(g, h, &pos);
        if best.as_ref().map_or(true, |(bs, _)| s.better(bs)) {
            best = Some((s, pos));
        }
    }
    let (mut best_score, mut best_pos) = best.expect("at least one candidate");
    let rounds = 30;
    for _ in 0..rounds {
        if best_score.overlap == g.num_edges() {
            break;
        }
        let mut pos = best_pos.clone();
        let kicks = 1 + n / 8;
        for _ in 0..kicks {
            let u = rng.gen_range(0..n);
            let target = rng.gen_range(0..h.num_qubits());
            relocate(&mut pos, u, target);
        }
        descend(g, &adj, h, &mut pos);
        let s = score(g, h, &pos);
        if s.better(&best_score) {
            best_score = s;
            best_pos = pos;
        }
    }
    QubitMapping::new(best_pos, h.num_qubits())
}

/// Moves `u` to `target`, swapping with its occupant if there is one.
fn relocate(pos: &mut [usize], u: usize, target: usize) {
    if let Some(v) = pos.iter().position(|&p| p == target) {
        pos.swap(u, v);
    } else {
        pos[u] = target;
    }
}

fn greedy_growth(adj: &[Vec<usize>], h: &HardwareGraph) -> Vec<usize> {
    let n = adj.len();
    let q = h.num_qubits();
    let mut pos = vec![usize::MAX; n];
    let mut taken = vec![false; q];
    let mut placed = 0;
    while placed < n {
        // Next vertex: most placed neighbours, then highest degree, then index.
        let u = (0..n)
            .filter(|&u| pos[u] == usize::MAX)
            .max_by_key(|&u| {
                let k = adj[u].iter().filter(|&&w| pos[w] != usize::MAX).count();
                (k, adj[u].len(), std::cmp::Reverse(u))
            })
            .expect("an unplaced vertex");
        let placed_nb: Vec<usize> = adj[u].iter().filter(|&&w| pos[w] != usize::MAX).map(|&w| pos[w]).collect();
        let target = if placed == 0 {
            h.center()
        } else if placed_nb.is_empty() {
            // New component: nearest free qubit to the centre.
            let c = h.center();
            (0..q).filter(|&p| !taken[p]).min_by_key(|&p| (h.distance(c, p), p)).expect("room left")
        } else {
            (0..q)
                .filter(|&p| !taken[p])
                .max_by_key(|&p| {
                    let hits = placed_nb.iter().filter(|&&x| h.is_edge(x, p)).count();
                    let dist: u64 = placed_nb.iter().map(|&x| h.distance(x, p) as u64).sum();
                    (hits, std::cmp::Reverse(dist), std::cmp::Reverse(p))
                })
                .expect("room left")
        };
        pos[u] = target;
        taken[target] = true;
        placed += 1;
    }
    pos
}

fn random_positions(n: usize, h: &HardwareGraph, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut patch = h.bfs_patch(rng.gen_range(0..h.num_qubits()), n);
    patch.shuffle(rng);
    patch
}

/// Hits and distance of the edges at `u` when it sits at `p`, skipping the
/// edge to `v`, whose length an exchange of `u` and `v` leaves unchanged.
fn local(adj: &[Vec<usize>], h: &HardwareGraph, pos: &[usize], u: usize, p: usize, v: usize) -> (i64, i64) {
    let mut hit = 0i64;
    let mut dist = 0i64;
    for &w in &adj[u] {
        if w == v {
            continue;
        }
        let d = h.distance(p, pos[w]) as i64;
        hit += (d == 1) as i64;
        dist += d;
    }
    (hit, dist)
}

/// First-improvement descent over exchanges of two vertices and moves of
/// one vertex to a free qubit.
fn descend(g: &WeightedGraph, adj: &[Vec<usize>], h: &HardwareGraph, pos: &mut [usize]) {
    let n = g.n();
    let q = h.num_qubits();
    let mut owner = vec![usize::MAX; q];
    for (v, &p) in pos.iter().enumerate() {
        owner[p] = v;
    }
    let improves = |dh: i64, dd: i64| dh > 0 || (dh == 0 && dd < 0);
    loop {
        let mut moved = false;
        for u in 0..n {
            for p in 0..q {
                let pu = pos[u];
                if p == pu {
                    continue;
                }
                let v = owner[p];
                let (h0u, d0u) = local(adj, h, pos, u, pu, v);
                let (h1u, d1u) = local(adj, h, pos, u, p, v);
                let (mut dh, mut dd) = (h1u - h0u, d1u - d0u);
                if v != usize::MAX {
                    let (h0v, d0v) = local(adj, h, pos, v, p, u);
                    let (h1v, d1v) = local(adj, h, pos, v, pu, u);
                    dh += h1v - h0v;
                    dd += d1v - d0v;
                }
                if improves(dh, dd) {
                    pos[u] = p;
                    owner[p] = u;
                    owner[pu] = v;
                    if v != usize::MAX {
                        pos[v] = pu;
                    }
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
}

/// Uniformly random placement onto a breadth-first patch of `n` qubits
/// around the hardware centre.
pub fn random_layout(g: &WeightedGraph, h: &HardwareGraph, seed: u64) -> Result<QubitMapping> {
    check_fits(g, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patch = h.bfs_patch(h.center(), g.n());
    patch.shuffle(&mut rng);
    QubitMapping::new(patch, h.num_qubits())
}
