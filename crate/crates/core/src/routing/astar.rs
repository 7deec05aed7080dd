//! Best-first search over partial swap networks.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::greedy::{apply, check_mapping, greedy_route, swap_delta, Terms, EMPTY};
use super::{edge_key, Event, HardwareGraph, QubitMapping, RoutedCircuit};
use crate::problem::WeightedGraph;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `g` counts swaps; children differ by one swap.
    #[default]
    Swaps,
    /// `g` counts swap layers; a child applies a seed swap plus a greedy
    /// set of disjoint swaps that each lower the total distance.
    Depth,
}

#[derive(Debug, Clone)]
pub struct AstarConfig {
    pub q: f64,
    pub mode: CostMode,
    /// Maximum number of expanded nodes before giving up.
    pub beam_limit: usize,
    /// Keep searching after the first goal, pruning with the lower bound
    /// `max_T d(T) - 1` (halved, rounded up, in depth mode), until the best
    /// goal is proven optimal or the beam is exhausted.
    pub prove_optimal: bool,
}

impl Default for AstarConfig {
    fn default() -> Self {
        AstarConfig {
            q: 1.0,
            mode: CostMode::Swaps,
            beam_limit: 50_000,
            prove_optimal: false,
        }
    }
}

struct Node {
    inv: Vec<usize>,
    done: Vec<u64>,
    g: u32,
    parent: usize,
    events: Vec<Event>,
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    h: f64,
    seq: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest f, then h, then seq.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn is_done(done: &[u64], t: usize) -> bool {
    done[t / 64] >> (t % 64) & 1 == 1
}

struct Search<'a> {
    terms: Terms,
    h: &'a HardwareGraph,
    n: usize,
}

impl Search<'_> {
    fn positions(&self, inv: &[usize]) -> Vec<usize> {
        let mut pos = vec![0; self.n];
        for (p, &l) in inv.iter().enumerate() {
            if l != EMPTY {
                pos[l] = p;
            }
        }
        pos
    }

    /// Implements every remaining term now at distance 1.
    fn implement(&self, pos: &[usize], done: &mut [u64], events: &mut Vec<Event>) {
        for (t, &(i, j)) in self.terms.ends.iter().enumerate() {
            if !is_done(done, t) && self.h.is_edge(pos[i], pos[j]) {
                done[t / 64] |= 1 << (t % 64);
                events.push(Event::Interaction {
                    edge: edge_key(pos[i], pos[j]),
                    term: t,
                });
            }
        }
    }

    /// Total distance and the largest distance over remaining terms.
    fn heuristic(&self, pos: &[usize], done: &[u64]) -> (f64, u32) {
        let mut sum = 0.0;
        let mut max = 0;
        for (t, &(i, j)) in self.terms.ends.iter().enumerate() {
            if !is_done(done, t) {
                let d = self.h.distance(pos[i], pos[j]);
                sum += self.terms.pow[d as usize];
                max = max.max(d);
            }
        }
        (sum, max)
    }

    fn active(&self, inv: &[usize], done: &[u64], p: usize) -> bool {
        inv[p] != EMPTY && self.terms.incident[inv[p]].iter().any(|&t| !is_done(done, t))
    }
}

/// A* routing of one cost layer with `f = g + sum_T d(T)^q`. The distance
/// sum is not admissible, so the first goal is not guaranteed optimal
/// unless [`AstarConfig::prove_optimal`] is set. When the beam runs out
/// before any goal is found the greedy route is returned with
/// [`RoutedCircuit::fallback`] set.
pub fn astar_route(g: &WeightedGraph, h: &HardwareGraph, m0: &QubitMapping, cfg: &AstarConfig) -> Result<RoutedCircuit> {
    check_mapping(g, h, m0)?;
    let s = Search {
        terms: Terms::new(g, h, cfg.q)?,
        h,
        n: g.n(),
    };
    let words = s.terms.ends.len().div_ceil(64).max(1);
    let mut inv = vec![EMPTY; h.num_qubits()];
    for (v, &p) in m0.as_slice().iter().enumerate() {
        inv[p] = v;
    }
    let mut done = vec![0u64; words];
    let mut events = Vec::new();
    s.implement(m0.as_slice(), &mut done, &mut events);
    let lower_bound = |maxd: u32| -> u32 {
        let slack = maxd.saturating_sub(1);
        match cfg.mode {
            CostMode::Swaps => slack,
            CostMode::Depth => slack.div_ceil(2),
        }
    };

    let mut arena = vec![Node {
        inv,
        done,
        g: 0,
        parent: usize::MAX,
        events,
    }];
    let mut closed: HashMap<(Vec<usize>, Vec<u64>), u32> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let (h0, _) = s.heuristic(m0.as_slice(), &arena[0].done);
    heap.push((Entry { f: h0, h: h0, seq: 0 }, 0usize));
    let mut best: Option<(u32, usize)> = None;
    let mut expanded = 0usize;
    let total = s.terms.ends.len();

    while let Some((_, idx)) = heap.pop() {
        let node_g = arena[idx].g;
        let pos = s.positions(&arena[idx].inv);
        let remaining = (0..total).filter(|&t| !is_done(&arena[idx].done, t)).count();
        if remaining == 0 {
            if best.map_or(true, |(bg, _)| node_g < bg) {
                best = Some((node_g, idx));
            }
            if !cfg.prove_optimal {
                break;
            }
            continue;
        }
        if let Some((bg, _)) = best {
            let (_, maxd) = s.heuristic(&pos, &arena[idx].done);
            if node_g + lower_bound(maxd) >= bg {
                continue;
            }
        }
        if expanded >= cfg.beam_limit {
            break;
        }
        expanded += 1;
        for swaps in children(&s, &arena[idx], &pos, cfg.mode) {
            let mut inv = arena[idx].inv.clone();
            let mut done = arena[idx].done.clone();
            let mut cpos = pos.clone();
            let mut events = Vec::new();
            for &(a, b) in &swaps {
                apply(&mut cpos, &mut inv, a, b);
                events.push(Event::Swap { edge: (a, b) });
            }
            s.implement(&cpos, &mut done, &mut events);
            let cg = node_g + 1;
            let (ch, maxd) = s.heuristic(&cpos, &done);
            if let Some((bg, _)) = best {
                if cg + lower_bound(maxd) >= bg {
                    continue;
                }
            }
            let key = (inv, done);
            match closed.get(&key) {
                Some(&seen) if seen <= cg => continue,
                _ => {
                    closed.insert(key.clone(), cg);
                }
            }
            let (inv, done) = key;
            let seq = arena.len();
            arena.push(Node {
                inv,
                done,
                g: cg,
                parent: idx,
                events,
            });
            heap.push((
                Entry {
                    f: cg as f64 + ch,
                    h: ch,
                    seq,
                },
                seq,
            ));
        }
    }

    let Some((_, goal)) = best else {
        log::warn!("A* beam limit of {} nodes exhausted; using the greedy route", cfg.beam_limit);
        let mut c = greedy_route(g, h, m0, cfg.q)?;
        c.fallback = true;
        return Ok(c);
    };
    let mut chain = Vec::new();
    let mut k = goal;
    while k != usize::MAX {
        chain.push(k);
        k = arena[k].parent;
    }
    let events: Vec<Event> = chain.iter().rev().flat_map(|&k| arena[k].events.iter().copied()).collect();
    let pos = s.positions(&arena[goal].inv);
    Ok(RoutedCircuit {
        events,
        initial: m0.clone(),
        final_mapping: QubitMapping::new(pos, h.num_qubits())?,
        fallback: false,
    })
}

/// Swap sets applied to form the children of a node.
fn children(s: &Search<'_>, node: &Node, pos: &[usize], mode: CostMode) -> Vec<Vec<(usize, usize)>> {
    let seeds: Vec<(usize, usize)> = s
        .h
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| s.active(&node.inv, &node.done, a) || s.active(&node.inv, &node.done, b))
        .collect();
    match mode {
        CostMode::Swaps => seeds.into_iter().map(|e| vec![e]).collect(),
        CostMode::Depth => seeds
            .iter()
            .map(|&seed| {
                let mut inv = node.inv.clone();
                let mut pos = pos.to_vec();
                let mut used = vec![false; s.h.num_qubits()];
                let mut layer = vec![seed];
                apply(&mut pos, &mut inv, seed.0, seed.1);
                used[seed.0] = true;
                used[seed.1] = true;
                let done = |t: usize| is_done(&node.done, t);
                for &(a, b) in &seeds {
                    if used[a] || used[b] {
                        continue;
                    }
                    if swap_delta(&s.terms, s.h, &pos, &inv, &done, a, b) < -1e-12 {
                        apply(&mut pos, &mut inv, a, b);
                        used[a] = true;
                        used[b] = true;
                        layer.push((a, b));
                    }
                }
                layer
            })
            .collect(),
    }
}
