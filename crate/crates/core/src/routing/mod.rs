//! Qubit layout and swap-network routing for one QAOA cost layer.
//!
//! Every problem edge is a *term*: a two-qubit diagonal interaction that
//! can only be applied when its endpoints sit on coupled qubits. A router
//! turns an initial layout into an ordered list of swaps and interactions
//! that implements every term exactly once.

mod astar;
mod greedy;
mod hardware;
mod layout;
mod swap_enhanced;

pub use astar::{astar_route, AstarConfig, CostMode};
pub use greedy::greedy_route;
pub use hardware::HardwareGraph;
pub use layout::{fiedler_layout, qap_layout, random_layout, LayoutScore};
pub use swap_enhanced::{build_swap_enhanced, check_swap_assumption, SwapEnhanced};

use serde::{Deserialize, Serialize};

use crate::emulator::circuit::Register;
use crate::emulator::{QaoaParams, Statevector};
use crate::problem::{QuboInstance, WeightedGraph};
use crate::{Error, Result};

/// Injective map from logical vertices to physical qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitMapping {
    log_to_phys: Vec<usize>,
    num_physical: usize,
}

impl QubitMapping {
    pub fn new(log_to_phys: Vec<usize>, num_physical: usize) -> Result<Self> {
        let mut used = vec![false; num_physical];
        for &p in &log_to_phys {
            if p >= num_physical {
                return Err(Error::param(format!("qubit {p} out of range {num_physical}")));
            }
            if std::mem::replace(&mut used[p], true) {
                return Err(Error::param(format!("qubit {p} assigned twice")));
            }
        }
        Ok(QubitMapping {
            log_to_phys,
            num_physical,
        })
    }

    pub fn identity(n: usize, num_physical: usize) -> Result<Self> {
        Self::new((0..n).collect(), num_physical)
    }

    pub fn num_logical(&self) -> usize {
        self.log_to_phys.len()
    }

    pub fn num_physical(&self) -> usize {
        self.num_physical
    }

    pub fn phys(&self, v: usize) -> usize {
        self.log_to_phys[v]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.log_to_phys
    }

    /// Physical-to-logical table, `None` for unused qubits.
    pub fn inverse(&self) -> Vec<Option<usize>> {
        let mut inv = vec![None; self.num_physical];
        for (v, &p) in self.log_to_phys.iter().enumerate() {
            inv[p] = Some(v);
        }
        inv
    }

    /// Applies a swap of the contents of physical qubits `a` and `b`.
    pub fn apply_swap(&mut self, a: usize, b: usize) {
        for p in &mut self.log_to_phys {
            if *p == a {
                *p = b;
            } else if *p == b {
                *p = a;
            }
        }
    }
}

/// One step of a routed circuit. Edges are physical `(a, b)` with `a < b`;
/// `term` indexes the problem graph's edge list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    Swap { edge: (usize, usize) },
    Interaction { edge: (usize, usize), term: usize },
    /// Interaction followed by a swap on the same edge.
    MergedSwapInteraction { edge: (usize, usize), term: usize },
}

impl Event {
    pub fn edge(&self) -> (usize, usize) {
        match *self {
            Event::Swap { edge } | Event::Interaction { edge, .. } | Event::MergedSwapInteraction { edge, .. } => edge,
        }
    }

    pub fn term(&self) -> Option<usize> {
        match *self {
            Event::Swap { .. } => None,
            Event::Interaction { term, .. } | Event::MergedSwapInteraction { term, .. } => Some(term),
        }
    }

    pub fn swaps(&self) -> bool {
        !matches!(self, Event::Interaction { .. })
    }

    pub fn cnots(&self) -> usize {
        match self {
            Event::Swap { .. } => 3,
            Event::Interaction { .. } => 2,
            Event::MergedSwapInteraction { .. } => 3,
        }
    }

    fn touches(&self, q: usize) -> bool {
        let (a, b) = self.edge();
        a == q || b == q
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitMetrics {
    pub swaps: usize,
    pub cnots: usize,
    pub depth: usize,
}

impl std::fmt::Display for CircuitMetrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "swaps={} cnots={} depth={}", self.swaps, self.cnots, self.depth)
    }
}

/// Swap network for one cost layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedCircuit {
    pub events: Vec<Event>,
    pub initial: QubitMapping,
    #[serde(rename = "final")]
    pub final_mapping: QubitMapping,
    /// Set when a search router gave up and returned the greedy result.
    #[serde(default)]
    pub fallback: bool,
}

impl RoutedCircuit {
    pub fn metrics(&self) -> CircuitMetrics {
        circuit_metrics(self)
    }
}

/// Swap count (merged events included), CNOTs at 3/2/3 per swap,
/// interaction and merged event, and the depth of an as-soon-as-possible
/// layering of edge-disjoint events.
pub fn circuit_metrics(c: &RoutedCircuit) -> CircuitMetrics {
    let mut busy = vec![0usize; c.initial.num_physical()];
    let mut depth = 0;
    let mut swaps = 0;
    let mut cnots = 0;
    for e in &c.events {
        let (a, b) = e.edge();
        let layer = busy[a].max(busy[b]) + 1;
        busy[a] = layer;
        busy[b] = layer;
        depth = depth.max(layer);
        swaps += e.swaps() as usize;
        cnots += e.cnots();
    }
    CircuitMetrics { swaps, cnots, depth }
}

/// Checks that every event acts on a hardware edge, that each interaction
/// sits on the term's endpoints at that moment, that every problem edge is
/// implemented exactly once, and that replaying the swaps reproduces the
/// recorded final mapping.
pub fn validate_circuit(c: &RoutedCircuit, g: &WeightedGraph, h: &HardwareGraph) -> Result<()> {
    if c.initial.num_logical() != g.n() || c.initial.num_physical() != h.num_qubits() {
        return Err(Error::param("mapping does not match the problem and hardware sizes"));
    }
    let mut map = c.initial.clone();
    let mut inv = map.inverse();
    let mut seen = vec![false; g.num_edges()];
    for (k, e) in c.events.iter().enumerate() {
        let (a, b) = e.edge();
        if a >= b || !h.is_edge(a, b) {
            return Err(Error::param(format!("event {k} on non-edge ({a}, {b})")));
        }
        if let Some(t) = e.term() {
            let &(u, v, _) = g
                .edges()
                .get(t)
                .ok_or_else(|| Error::param(format!("event {k} names unknown term {t}")))?;
            let here = (inv[a], inv[b]);
            if here != (Some(u), Some(v)) && here != (Some(v), Some(u)) {
                return Err(Error::param(format!("event {k}: term {t} not on edge ({a}, {b})")));
            }
            if std::mem::replace(&mut seen[t], true) {
                return Err(Error::param(format!("term {t} implemented twice")));
            }
        }
        if e.swaps() {
            map.apply_swap(a, b);
            inv.swap(a, b);
        }
    }
    if let Some(t) = seen.iter().position(|&s| !s) {
        return Err(Error::param(format!("term {t} never implemented")));
    }
    if map != c.final_mapping {
        return Err(Error::param("replayed swaps disagree with the final mapping"));
    }
    Ok(())
}

/// Merges interactions with swaps on the same edge when no event touching
/// either qubit separates them. Diagonal interactions commute with
/// everything acting on other qubits, so the pair can be brought together
/// and executed as one three-CNOT block.
pub fn merge_swap_zz(c: &RoutedCircuit) -> RoutedCircuit {
    let mut events: Vec<Option<Event>> = c.events.iter().copied().map(Some).collect();
    for s in 0..events.len() {
        let Some(Event::Swap { edge }) = events[s] else { continue };
        let (a, b) = edge;
        let touching = |e: &Option<Event>| e.map_or(false, |e| e.touches(a) || e.touches(b));
        // Nearest earlier event on either qubit.
        if let Some(k) = (0..s).rev().find(|&k| touching(&events[k])) {
            if let Some(Event::Interaction { edge: e2, term }) = events[k] {
                if e2 == edge {
                    events[k] = Some(Event::MergedSwapInteraction { edge, term });
                    events[s] = None;
                    continue;
                }
            }
        }
        if let Some(k) = (s + 1..events.len()).find(|&k| touching(&events[k])) {
            if let Some(Event::Interaction { edge: e2, term }) = events[k] {
                if e2 == edge {
                    events[s] = Some(Event::MergedSwapInteraction { edge, term });
                    events[k] = None;
                }
            }
        }
    }
    RoutedCircuit {
        events: events.into_iter().flatten().collect(),
        initial: c.initial.clone(),
        final_mapping: c.final_mapping.clone(),
        fallback: c.fallback,
    }
}

/// Which router [`iterate_mapping`] calls.
#[derive(Debug, Clone)]
pub enum Router {
    Greedy { q: f64 },
    Astar(AstarConfig),
}

impl Router {
    pub fn route(&self, g: &WeightedGraph, h: &HardwareGraph, m0: &QubitMapping) -> Result<RoutedCircuit> {
        match self {
            Router::Greedy { q } => greedy_route(g, h, m0, *q),
            Router::Astar(cfg) => astar_route(g, h, m0, cfg),
        }
    }
}

/// Routes repeatedly, feeding each final mapping back as the next initial
/// mapping, and keeps the circuit with the fewest CNOTs after swap/ZZ
/// merging (earliest on ties). Returns that circuit's initial mapping and
/// the merged circuit.
pub fn iterate_mapping(
    g: &WeightedGraph,
    h: &HardwareGraph,
    m0: &QubitMapping,
    router: &Router,
    iterations: usize,
) -> Result<(QubitMapping, RoutedCircuit)> {
    if iterations == 0 {
        return Err(Error::param("iterations must be at least 1"));
    }
    let mut start = m0.clone();
    let mut best: Option<RoutedCircuit> = None;
    for _ in 0..iterations {
        let c = merge_swap_zz(&router.route(g, h, &start)?);
        start = c.final_mapping.clone();
        if best.as_ref().map_or(true, |b| c.metrics().cnots < b.metrics().cnots) {
            best = Some(c);
        }
    }
    let best = best.expect("at least one iteration");
    Ok((best.initial.clone(), best))
}

/// Executes `params.p()` QAOA layers of the routed circuit on a gate-level
/// register: odd layers replay the events forwards, even layers backwards,
/// so after an even number of layers every qubit is home again. Linear
/// terms are applied as single-qubit phases at the start of each layer.
///
/// `q` supplies the cost coefficients (minimisation form is expected, the
/// same diagonal the emulator phases with); term `t` uses the pair
/// coefficient of problem edge `t`. The result is reported in logical
/// qubit order, so it can be compared directly with
/// [`crate::emulator::qaoa_state`].
pub fn execute_qaoa(
    c: &RoutedCircuit,
    g: &WeightedGraph,
    q: &QuboInstance,
    params: &QaoaParams,
) -> Result<Statevector> {
    if q.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: q.n(),
        });
    }
    let n = g.n();
    // Compress the touched physical qubits to register indices.
    let mut local = vec![usize::MAX; c.initial.num_physical()];
    let mut next = 0;
    let mut touch = |p: usize, local: &mut Vec<usize>| {
        if local[p] == usize::MAX {
            local[p] = next;
            next += 1;
        }
    };
    for &p in c.initial.as_slice() {
        touch(p, &mut local);
    }
    for e in &c.events {
        let (a, b) = e.edge();
        touch(a, &mut local);
        touch(b, &mut local);
    }
    let mut reg = Register::zeros(next)?;
    let mut pos: Vec<usize> = c.initial.as_slice().iter().map(|&p| local[p]).collect();
    for &r in &pos {
        reg.hadamard(r);
    }
    let coeff: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(i, j, _)| {
            q.quadratic()
                .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
                .map(|k| q.quadratic()[k].2)
                .unwrap_or(0.0)
        })
        .collect();
    for (layer, (&gamma, &beta)) in params.gammas().iter().zip(params.betas()).enumerate() {
        for v in 0..n {
            reg.phase(pos[v], gamma * q.linear()[v]);
        }
        let forward = layer % 2 == 0;
        let order: Box<dyn Iterator<Item = &Event>> = if forward {
            Box::new(c.events.iter())
        } else {
            Box::new(c.events.iter().rev())
        };
        for e in order {
            let (a, b) = e.edge();
            let (la, lb) = (local[a], local[b]);
            if let Some(t) = e.term() {
                reg.pair_phase(la, lb, gamma * coeff[t]);
            }
            if e.swaps() {
                reg.swap(la, lb);
                for p in pos.iter_mut() {
                    if *p == la {
                        *p = lb;
                    } else if *p == lb {
                        *p = la;
                    }
                }
            }
        }
        for &r in &pos {
            reg.x_rotation(r, beta);
        }
    }
    // Read the amplitudes back in logical order; untouched register qubits
    // are still |0>.
    let amps = reg.amplitudes();
    let mut out = Vec::with_capacity(1 << n);
    for k in 0..1usize << n {
        let mut idx = 0usize;
        for (v, &r) in pos.iter().enumerate() {
            if (k >> v) & 1 == 1 {
                idx |= 1 << r;
            }
        }
        out.push(amps[idx]);
    }
    Statevector::from_amplitudes(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping(v: Vec<usize>, q: usize) -> QubitMapping {
        QubitMapping::new(v, q).unwrap()
    }

    #[test]
    fn mapping_rejects_collisions() {
        assert!(QubitMapping::new(vec![0, 0], 3).is_err());
        assert!(QubitMapping::new(vec![0, 3], 3).is_err());
        let mut m = mapping(vec![2, 0], 3);
        m.apply_swap(0, 1);
        assert_eq!(m.as_slice(), &[2, 1]);
        assert_eq!(m.inverse(), vec![None, Some(1), Some(0)]);
    }

    #[test]
    fn metrics_examples() {
        let m = mapping(vec![0, 1, 2, 3], 4);
        let empty = RoutedCircuit {
            events: vec![],
            initial: m.clone(),
            final_mapping: m.clone(),
            fallback: false,
        };
        assert_eq!(empty.metrics(), CircuitMetrics { swaps: 0, cnots: 0, depth: 0 });
        let one = RoutedCircuit {
            events: vec![Event::Interaction { edge: (0, 1), term: 0 }],
            ..empty.clone()
        };
        assert_eq!(one.metrics(), CircuitMetrics { swaps: 0, cnots: 2, depth: 1 });
        let disjoint = RoutedCircuit {
            events: vec![
                Event::Interaction { edge: (0, 1), term: 0 },
                Event::Interaction { edge: (2, 3), term: 1 },
            ],
            ..empty.clone()
        };
        assert_eq!(disjoint.metrics().depth, 1);
        let overlapping = RoutedCircuit {
            events: vec![
                Event::Interaction { edge: (0, 1), term: 0 },
                Event::Interaction { edge: (1, 2), term: 1 },
            ],
            ..empty
        };
        assert_eq!(overlapping.metrics().depth, 2);
    }

    #[test]
    fn merge_examples() {
        let m = mapping(vec![0, 1, 2], 3);
        let mut swapped = m.clone();
        swapped.apply_swap(0, 1);
        let c = RoutedCircuit {
            events: vec![
                Event::Interaction { edge: (0, 1), term: 0 },
                Event::Swap { edge: (0, 1) },
            ],
            initial: m.clone(),
            final_mapping: swapped.clone(),
            fallback: false,
        };
        assert_eq!(c.metrics().cnots, 5);
        let merged = merge_swap_zz(&c);
        assert_eq!(merged.events, vec![Event::MergedSwapInteraction { edge: (0, 1), term: 0 }]);
        assert_eq!(merged.metrics().cnots, 3);
        // An interaction on another pair of the same qubit blocks the merge.
        let blocked = RoutedCircuit {
            events: vec![
                Event::Interaction { edge: (0, 1), term: 0 },
                Event::Interaction { edge: (1, 2), term: 1 },
                Event::Swap { edge: (0, 1) },
            ],
            ..c.clone()
        };
        assert_eq!(merge_swap_zz(&blocked), blocked);
        let apart = RoutedCircuit {
            events: vec![Event::Swap { edge: (1, 2) }, Event::Interaction { edge: (0, 1), term: 0 }],
            ..c
        };
        assert_eq!(merge_swap_zz(&apart).events, apart.events);
    }

    #[test]
    fn validation_catches_errors() {
        let g = WeightedGraph::unweighted(3, [(0, 1), (0, 2)]).unwrap();
        let h = HardwareGraph::line(3).unwrap();
        let m = mapping(vec![0, 1, 2], 3);
        let mut fin = m.clone();
        fin.apply_swap(0, 1);
        let good = RoutedCircuit {
            events: vec![
                Event::Interaction { edge: (0, 1), term: 0 },
                Event::Swap { edge: (0, 1) },
                Event::Interaction { edge: (1, 2), term: 1 },
            ],
            initial: m.clone(),
            final_mapping: fin.clone(),
            fallback: false,
        };
        validate_circuit(&good, &g, &h).unwrap();
        let mut missing = good.clone();
        missing.events.pop();
        assert!(validate_circuit(&missing, &g, &h).is_err());
        let mut wrong_final = good.clone();
        wrong_final.final_mapping = m.clone();
        assert!(validate_circuit(&wrong_final, &g, &h).is_err());
        let mut off_edge = good;
        off_edge.events[2] = Event::Interaction { edge: (0, 2), term: 1 };
        assert!(validate_circuit(&off_edge, &g, &h).is_err());
    }
}
