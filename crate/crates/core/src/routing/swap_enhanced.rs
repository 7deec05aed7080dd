//! Graphs whose extra edges ride on swaps merged into cost interactions.
//!
//! A swap edge `(i, j)` of a device subgraph is executed as a merged
//! interaction-plus-swap, after which `i` sits next to the other
//! neighbours of `j` and vice versa. Those new pairs become extra problem
//! edges at two CNOTs each.

use std::collections::HashMap;

use super::{edge_key, Event, HardwareGraph, QubitMapping, RoutedCircuit};
use crate::problem::WeightedGraph;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SwapEnhanced {
    /// `E' ∪ E_new`. Base edges keep their weights; new edges get weight 1.
    pub graph: WeightedGraph,
    /// One cost layer on `hardware`; term ids index `graph.edges()`.
    /// Execute forwards on odd layers and backwards on even ones. After an
    /// odd number of layers `plan.final_mapping` gives the bit relabelling.
    pub plan: RoutedCircuit,
    pub hardware: HardwareGraph,
    pub new_edges: Vec<(usize, usize)>,
}

/// Every swap edge must be a base edge, and the other neighbours of a swap
/// vertex must not touch any swap edge.
pub fn check_swap_assumption(base: &WeightedGraph, swap_edges: &[(usize, usize)]) -> Result<()> {
    let n = base.n();
    let mut on_swap = vec![false; n];
    for &(i, j) in swap_edges {
        if i >= n || j >= n || !base.has_edge(i, j) {
            return Err(Error::graph(format!("swap edge ({i}, {j}) is not a graph edge")));
        }
        for v in [i, j] {
            if std::mem::replace(&mut on_swap[v], true) {
                return Err(Error::graph(format!("vertex {v} is on two swap edges")));
            }
        }
    }
    let adj = base.adjacency();
    for &(i, j) in swap_edges {
        for (v, partner) in [(i, j), (j, i)] {
            if let Some(&(u, _)) = adj[v].iter().find(|&&(u, _)| u != partner && on_swap[u]) {
                return Err(Error::graph(format!(
                    "neighbour {u} of swap vertex {v} lies on another swap edge"
                )));
            }
        }
    }
    Ok(())
}

/// Builds the augmented graph and its fixed execution plan: plain
/// interactions on `E' \ E_SWAP`, merged interaction-swaps on `E_SWAP`,
/// then the new interactions. New pairs already present in `E'` are not
/// added again.
pub fn build_swap_enhanced(base: &WeightedGraph, swap_edges: &[(usize, usize)]) -> Result<SwapEnhanced> {
    check_swap_assumption(base, swap_edges)?;
    let hardware = HardwareGraph::new(base.clone())?;
    let n = base.n();
    let swaps: Vec<(usize, usize)> = swap_edges.iter().map(|&(i, j)| edge_key(i, j)).collect();
    let adj = base.adjacency();
    // (logical pair, physical edge) for each new edge.
    let mut extra: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for &(i, j) in &swaps {
        for (v, partner) in [(i, j), (j, i)] {
            for &(u, _) in &adj[partner] {
                if u == v {
                    continue;
                }
                let pair = edge_key(v, u);
                if !base.has_edge(pair.0, pair.1) && !extra.iter().any(|e| e.0 == pair) {
                    extra.push((pair, edge_key(partner, u)));
                }
            }
        }
    }
    let mut edges = base.edges().to_vec();
    edges.extend(extra.iter().map(|&((a, b), _)| (a, b, 1.0)));
    let mut graph = WeightedGraph::new(n, edges)?;
    if let Some(w) = base.node_weights() {
        graph = graph.with_node_weights(w.to_vec())?;
    }
    let term: HashMap<(usize, usize), usize> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(t, &(a, b, _))| ((a, b), t))
        .collect();

    let mut events = Vec::new();
    for &(a, b, _) in base.edges() {
        if !swaps.contains(&(a, b)) {
            events.push(Event::Interaction {
                edge: (a, b),
                term: term[&(a, b)],
            });
        }
    }
    let initial = QubitMapping::identity(n, n)?;
    let mut fin = initial.clone();
    for &e in &swaps {
        events.push(Event::MergedSwapInteraction { edge: e, term: term[&e] });
        fin.apply_swap(e.0, e.1);
    }
    for &(pair, phys) in &extra {
        events.push(Event::Interaction {
            edge: phys,
            term: term[&pair],
        });
    }
    Ok(SwapEnhanced {
        graph,
        plan: RoutedCircuit {
            events,
            initial,
            final_mapping: fin,
            fallback: false,
        },
        hardware,
        new_edges: extra.into_iter().map(|e| e.0).collect(),
    })
}
