//! Hardware coupling graphs with precomputed shortest-path distances.

use std::collections::VecDeque;
use std::path::Path;

use crate::problem::io::{parse_problem, Problem};
use crate::problem::WeightedGraph;
use crate::{Error, Result};

const HEAVY_HEX_156: &str = include_str!("../../assets/heavy_hex_156.txt");

/// Connected coupling graph of a device.
#[derive(Debug, Clone)]
pub struct HardwareGraph {
    graph: WeightedGraph,
    adj: Vec<Vec<usize>>,
    dist: Vec<Vec<u32>>,
    edge_list: Vec<(usize, usize)>,
}

impl HardwareGraph {
    pub fn new(graph: WeightedGraph) -> Result<Self> {
        if graph.n() == 0 {
            return Err(Error::graph("hardware graph has no qubits"));
        }
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        let graph = graph.to_unweighted();
        let q = graph.n();
        let mut adj = vec![Vec::new(); q];
        for &(i, j, _) in graph.edges() {
            adj[i].push(j);
            adj[j].push(i);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        let dist = (0..q).map(|s| bfs(&adj, s)).collect();
        let edge_list = graph.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        Ok(HardwareGraph {
            graph,
            adj,
            dist,
            edge_list,
        })
    }

    pub fn from_edges(q: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(WeightedGraph::unweighted(q, edges)?)
    }

    /// `rows x cols` square grid, qubit `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::from_edges(rows * cols, edges)
    }

    /// Simple path `0 - 1 - ... - (q-1)`.
    pub fn line(q: usize) -> Result<Self> {
        Self::from_edges(q, (1..q).map(|i| (i - 1, i)))
    }

    /// The 156-qubit heavy-hex lattice shipped as a data file.
    pub fn heavy_hex_156() -> Self {
        match parse_problem(HEAVY_HEX_156) {
            Ok(Problem::Graph(g)) => Self::new(g).expect("bundled topology is valid"),
            _ => unreachable!("bundled topology is a graph file"),
        }
    }

    /// Parses `grid:RxC`, `heavyhex:156`, `line:Q` or `file:PATH` (a graph
    /// file in the problem text or JSON format).
    pub fn from_spec(spec: &str) -> Result<Self> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::param(format!("topology {spec:?} is not KIND:ARG")))?;
        match kind {
            "grid" => {
                let (r, c) = arg
                    .split_once(['x', 'X'])
                    .ok_or_else(|| Error::param(format!("grid size {arg:?} is not RxC")))?;
                let r = r.parse().map_err(|_| Error::param(format!("bad grid rows {r:?}")))?;
                let c = c.parse().map_err(|_| Error::param(format!("bad grid cols {c:?}")))?;
                Self::grid(r, c)
            }
            "heavyhex" if arg == "156" => Ok(Self::heavy_hex_156()),
            "heavyhex" => Err(Error::param("only heavyhex:156 is available")),
            "line" => Self::line(arg.parse().map_err(|_| Error::param(format!("bad size {arg:?}")))?),
            "file" => {
                let text = std::fs::read_to_string(Path::new(arg))?;
                match parse_problem(&text)? {
                    Problem::Graph(g) => Self::new(g),
                    Problem::Qubo(_) => Err(Error::param("topology file must hold a graph")),
                }
            }
            other => Err(Error::param(format!("unknown topology kind {other:?}"))),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    /// Edges `(a, b)`, `a < b`, in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edge_list
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adj[q]
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.dist[a][b]
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        self.dist[a][b] == 1
    }

    pub fn diameter(&self) -> u32 {
        self.dist.iter().flatten().copied().max().unwrap_or(0)
    }

    /// First `n` qubits in breadth-first order from `start`.
    pub fn bfs_patch(&self, start: usize, n: usize) -> Vec<usize> {
        let mut seen = vec![false; self.num_qubits()];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            if order.len() == n {
                break;
            }
            order.push(u);
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        order
    }

    /// Qubit with the smallest eccentricity (lowest index on ties).
    pub fn center(&self) -> usize {
        (0..self.num_qubits())
            .min_by_key(|&v| (self.dist[v].iter().max().copied().unwrap_or(0), v))
            .unwrap_or(0)
    }
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<u32> {
    let mut d = vec![u32::MAX; adj.len()];
    d[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if d[v] == u32::MAX {
                d[v] = d[u] + 1;
                queue.push_back(v);
            }
        }
    }
    d
}
