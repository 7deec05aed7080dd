//! Problem instances: weighted graphs, QUBOs, Max-Cut and MIS encodings.
//!
//! A [`QuboInstance`] stores its objective `x^T Q x + c^T x` in canonical
//! form: the diagonal of `Q` is folded into the linear vector and each
//! off-diagonal pair `Q_ij + Q_ji` is kept once as a coefficient on
//! `x_i x_j` with `i < j`. The instance remembers whether it is to be
//! maximised or minimised. Everything downstream (emulator phases, tabu
//! search, filters) works on the minimisation form obtained from
//! [`QuboInstance::to_minimization`], and reports values back in the
//! original sense.

mod generate;
pub mod io;

pub use generate::{generate_instance, InstanceKind, Weights};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{bits, Error, Result, DEFAULT_EMULATION_CAP};

/// An undirected edge `(i, j, w)` with `i < j`.
pub type Edge = (usize, usize, f64);

/// Undirected weighted graph with optional node weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    node_weights: Option<Vec<f64>>,
}

impl WeightedGraph {
    /// Builds a graph, normalising every edge to `i < j` and sorting the edge
    /// list. Self-loops, out-of-range endpoints and duplicate edges are
    /// rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut list: Vec<Edge> = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::graph(format!("self-loop on vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::graph(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if !w.is_finite() {
                return Err(Error::graph(format!("non-finite weight on edge ({a}, {b})")));
            }
            list.push((a.min(b), a.max(b), w));
        }
        list.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(pair) = list.windows(2).find(|p| p[0].0 == p[1].0 && p[0].1 == p[1].1) {
            return Err(Error::graph(format!(
                "duplicate edge ({}, {})",
                pair[0].0, pair[0].1
            )));
        }
        Ok(WeightedGraph {
            n,
            edges: list,
            node_weights: None,
        })
    }

    /// Unit-weight graph from an edge list.
    pub fn unweighted(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(n, edges.into_iter().map(|(i, j)| (i, j, 1.0)))
    }

    pub fn with_node_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: weights.len(),
            });
        }
        self.node_weights = Some(weights);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_weights(&self) -> Option<&[f64]> {
        self.node_weights.as_deref()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j, _) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Mean vertex degree `2|E| / n`.
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    /// Adjacency lists with weights.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .is_ok()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Same topology with every weight set to 1.
    pub fn to_unweighted(&self) -> WeightedGraph {
        WeightedGraph {
            n: self.n,
            edges: self.edges.iter().map(|&(i, j, _)| (i, j, 1.0)).collect(),
            node_weights: None,
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        self.components().iter().all(|&c| c == 0)
    }

    /// Connected-component label for every vertex, labels in order of first
    /// appearance.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Weight of edges crossing the partition induced by `x`.
    pub fn cut_value(&self, x: &[u8]) -> f64 {
        self.edges
            .iter()
            .filter(|&&(i, j, _)| x[i] != x[j])
            .map(|e| e.2)
            .sum()
    }

    /// Induced subgraph on `vertices` (in the given order), relabelled
    /// `0..vertices.len()`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> WeightedGraph {
        let mut index = vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            index[v] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(i, j, _)| index[i] != usize::MAX && index[j] != usize::MAX)
            .map(|&(i, j, w)| (index[i].min(index[j]), index[i].max(index[j]), w))
            .collect::<Vec<_>>();
        let mut g = WeightedGraph::new(vertices.len(), edges).expect("subgraph of a valid graph");
        if let Some(nw) = &self.node_weights {
            g.node_weights = Some(vertices.iter().map(|&v| nw[v]).collect());
        }
        g
    }

    /// The Ising Hamiltonian `sum w_ij Z_i Z_j` whose ground state is the
    /// maximum cut.
    pub fn maxcut_hamiltonian(&self) -> IsingCoeffs {
        IsingCoeffs {
            constant: 0.0,
            linear: vec![0.0; self.n],
            quadratic: self.edges.clone(),
        }
    }
}

/// Objective direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// Multiplier taking an objective value to its minimisation form.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        }
    }
}

impl std::str::FromStr for Sense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "maximize" => Ok(Sense::Maximize),
            "min" | "minimize" => Ok(Sense::Minimize),
            other => Err(Error::param(format!("unknown sense {other:?}"))),
        }
    }
}

/// QUBO instance `x^T Q x + c^T x` over `x in {0,1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    n: usize,
    sense: Sense,
    linear: Vec<f64>,
    quadratic: Vec<Edge>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl QuboInstance {
    /// Canonical constructor. Terms `(i, i, w)` in `quadratic` are folded
    /// into the linear vector; off-diagonal pairs are normalised to `i < j`.
    /// A pair listed twice is rejected.
    pub fn new(n: usize, sense: Sense, linear: Vec<f64>, quadratic: Vec<Edge>) -> Result<Self> {
        if linear.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: linear.len(),
            });
        }
        let mut linear = linear;
        let mut pairs = Vec::with_capacity(quadratic.len());
        for (a, b, w) in quadratic {
            if a >= n || b >= n {
                return Err(Error::param(format!("term ({a}, {b}) out of range for n = {n}")));
            }
            if !w.is_finite() {
                return Err(Error::param(format!("non-finite coefficient on ({a}, {b})")));
            }
            if a == b {
                linear[a] += w;
            } else {
                pairs.push((a.min(b), a.max(b), w));
            }
        }
        pairs.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(p) = pairs.windows(2).find(|p| p[0].0 == p[1].0 && p[0].1 == p[1].1) {
            return Err(Error::param(format!("duplicate term ({}, {})", p[0].0, p[0].1)));
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j, w) in &pairs {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        Ok(QuboInstance {
            n,
            sense,
            linear,
            quadratic: pairs,
            adj,
        })
    }

    /// Builds an instance from a dense (not necessarily symmetric) matrix.
    pub fn from_matrix(q: &[Vec<f64>], c: &[f64], sense: Sense) -> Result<Self> {
        let n = c.len();
        if q.len() != n || q.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.len(),
            });
        }
        let mut linear = c.to_vec();
        let mut pairs = Vec::new();
        for i in 0..n {
            linear[i] += q[i][i];
            for j in i + 1..n {
                let w = q[i][j] + q[j][i];
                if w != 0.0 {
                    pairs.push((i, j, w));
                }
            }
        }
        Self::new(n, sense, linear, pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Linear coefficients (including the folded diagonal of `Q`).
    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Pair coefficients `w` on `x_i x_j`, `i < j`.
    pub fn quadratic(&self) -> &[Edge] {
        &self.quadratic
    }

    /// Neighbours of each variable with the pair coefficient.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    /// Symmetric dense `Q` with zero diagonal; pairs its split evenly.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.n]; self.n];
        for &(i, j, w) in &self.quadratic {
            q[i][j] = w / 2.0;
            q[j][i] = w / 2.0;
        }
        q
    }

    /// Objective value `x^T Q x + c^T x` in the instance's own sense.
    pub fn energy(&self, x: &[u8]) -> f64 {
        let mut e = 0.0;
        for (i, &c) in self.linear.iter().enumerate() {
            if x[i] != 0 {
                e += c;
            }
        }
        for &(i, j, w) in &self.quadratic {
            if x[i] != 0 && x[j] != 0 {
                e += w;
            }
        }
        e
    }

    /// Objective in minimisation form: `sign * energy`.
    pub fn min_energy(&self, x: &[u8]) -> f64 {
        self.sense.sign() * self.energy(x)
    }

    /// Equivalent minimisation instance (coefficients negated when the
    /// instance maximises).
    pub fn to_minimization(&self) -> QuboInstance {
        match self.sense {
            Sense::Minimize => self.clone(),
            Sense::Maximize => QuboInstance {
                n: self.n,
                sense: Sense::Minimize,
                linear: self.linear.iter().map(|c| -c).collect(),
                quadratic: self.quadratic.iter().map(|&(i, j, w)| (i, j, -w)).collect(),
                adj: self
                    .adj
                    .iter()
                    .map(|row| row.iter().map(|&(j, w)| (j, -w)).collect())
                    .collect(),
            },
        }
    }

    /// Converts a minimisation-form value back to the instance's own sense.
    pub fn from_min_value(&self, v: f64) -> f64 {
        self.sense.sign() * v
    }

    /// Change in `energy` from flipping bit `i` of `x`.
    pub fn flip_delta(&self, x: &[u8], i: usize) -> f64 {
        let mut field = self.linear[i];
        for &(j, w) in &self.adj[i] {
            if x[j] != 0 {
                field += w;
            }
        }
        if x[i] == 0 {
            field
        } else {
            -field
        }
    }

    /// Interaction graph of the quadratic terms, weighted by the pair
    /// coefficients.
    pub fn interaction_graph(&self) -> WeightedGraph {
        WeightedGraph::new(self.n, self.quadratic.iter().copied()).expect("canonical pairs")
    }
}

/// `x^T Q x + c^T x` with a dimension check.
pub fn qubo_energy(q: &QuboInstance, x: &[u8]) -> Result<f64> {
    if x.len() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: x.len(),
        });
    }
    Ok(q.energy(x))
}

/// Spin assignment over `{+1, -1}`, related to bits by `x = (1 - z) / 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinAssignment(Vec<i8>);

impl SpinAssignment {
    pub fn new(z: Vec<i8>) -> Result<Self> {
        if let Some(bad) = z.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::param(format!("spin value {bad} is not +1 or -1")));
        }
        Ok(SpinAssignment(z))
    }

    pub fn from_bits(x: &[u8]) -> Self {
        SpinAssignment(bits::spins(x))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        bits::from_spins(&self.0)
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sum_{(i,j) in E} w_ij z_i z_j`.
pub fn maxcut_energy(g: &WeightedGraph, z: &SpinAssignment) -> Result<f64> {
    if z.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: z.len(),
        });
    }
    let s = z.as_slice();
    Ok(g.edges()
        .iter()
        .map(|&(i, j, w)| w * (s[i] * s[j]) as f64)
        .sum())
}

/// Max-Cut as the maximisation QUBO `sum w_ij (x_i + x_j - 2 x_i x_j)`.
pub fn maxcut_to_qubo(g: &WeightedGraph) -> QuboInstance {
    let mut linear = vec![0.0; g.n()];
    let mut quadratic = Vec::with_capacity(g.num_edges());
    for &(i, j, w) in g.edges() {
        linear[i] += w;
        linear[j] += w;
        quadratic.push((i, j, -2.0 * w));
    }
    QuboInstance::new(g.n(), Sense::Maximize, linear, quadratic).expect("valid graph")
}

/// MIS as the maximisation QUBO `sum x_i - lambda sum_{E} x_i x_j`.
/// Edge weights are ignored.
pub fn mis_to_qubo(g: &WeightedGraph, lambda: f64) -> Result<QuboInstance> {
    if !(lambda >= 1.0) {
        return Err(Error::param(format!("MIS penalty must be >= 1, got {lambda}")));
    }
    let quadratic = g.edges().iter().map(|&(i, j, _)| (i, j, -lambda)).collect();
    QuboInstance::new(g.n(), Sense::Maximize, vec![1.0; g.n()], quadratic)
}

/// Coefficients of `constant + sum h_i Z_i + sum J_ij Z_i Z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingCoeffs {
    pub constant: f64,
    pub linear: Vec<f64>,
    pub quadratic: Vec<Edge>,
}

impl IsingCoeffs {
    pub fn evaluate(&self, z: &[i8]) -> f64 {
        let mut e = self.constant;
        for (i, &h) in self.linear.iter().enumerate() {
            e += h * z[i] as f64;
        }
        for &(i, j, w) in &self.quadratic {
            e += w * (z[i] * z[j]) as f64;
        }
        e
    }
}

/// Cost Hamiltonian of the instance: the minimisation form of the objective
/// rewritten in spins via `x_i = (1 - z_i) / 2`. Its ground state is the
/// optimum of the instance in its own sense.
pub fn cost_hamiltonian_coeffs(q: &QuboInstance) -> IsingCoeffs {
    let m = q.to_minimization();
    let mut constant = 0.0;
    let mut linear = vec![0.0; m.n()];
    for (i, &c) in m.linear().iter().enumerate() {
        constant += c / 2.0;
        linear[i] -= c / 2.0;
    }
    let mut quadratic = Vec::with_capacity(m.quadratic().len());
    for &(i, j, w) in m.quadratic() {
        constant += w / 4.0;
        linear[i] -= w / 4.0;
        linear[j] -= w / 4.0;
        quadratic.push((i, j, w / 4.0));
    }
    IsingCoeffs {
        constant,
        linear,
        quadratic,
    }
}

/// Full diagonal of a cost function over all `2^n` bit-strings.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDiagonal {
    values: Vec<f64>,
    min_value: f64,
    max_value: f64,
}

impl CostDiagonal {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_power_of_two() {
            return Err(Error::param("diagonal length must be a power of two"));
        }
        let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(CostDiagonal {
            values,
            min_value,
            max_value,
        })
    }

    /// The diagonal the emulator phases with: the minimisation form of `q`.
    pub fn for_qaoa(q: &QuboInstance, cap: usize) -> Result<Self> {
        brute_force_spectrum_capped(&q.to_minimization(), cap)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_qubits(&self) -> usize {
        self.values.len().trailing_zeros() as usize
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }
}

/// Every objective value in the instance's own sense, indexed by bit-string
/// (variable `i` is bit `i` of the index).
pub fn brute_force_spectrum(q: &QuboInstance) -> Result<CostDiagonal> {
    brute_force_spectrum_capped(q, DEFAULT_EMULATION_CAP)
}

/// [`brute_force_spectrum`] with an explicit qubit cap.
pub fn brute_force_spectrum_capped(q: &QuboInstance, cap: usize) -> Result<CostDiagonal> {
    let n = q.n();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let size = 1usize << n;
    let mut values = vec![0.0; size];
    // Gray-code walk: each step flips one bit and updates the energy with
    // that bit's local field.
    let mut x = vec![0u8; n];
    let mut energy = 0.0;
    for step in 1..size {
        let bit = step.trailing_zeros() as usize;
        energy += q.flip_delta(&x, bit);
        x[bit] ^= 1;
        let gray = step ^ (step >> 1);
        values[gray] = energy;
    }
    CostDiagonal::from_values(values)
}
