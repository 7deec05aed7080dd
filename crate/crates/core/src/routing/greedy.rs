//! Greedy router minimising the total distance `D = sum_T d(T)^q`.

use super::{edge_key, Event, HardwareGraph, QubitMapping, RoutedCircuit};
use crate::problem::WeightedGraph;
use crate::{Error, Result};

pub(crate) const EMPTY: usize = usize::MAX;

/// Problem terms plus the per-vertex incidence lists both routers need.
pub(crate) struct Terms {
    pub ends: Vec<(usize, usize)>,
    pub incident: Vec<Vec<usize>>,
    /// `d^q` for every distance up to the diameter.
    pub pow: Vec<f64>,
}

impl Terms {
    pub fn new(g: &WeightedGraph, h: &HardwareGraph, q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::param("distance exponent q must be positive"));
        }
        let ends: Vec<_> = g.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        let mut incident = vec![Vec::new(); g.n()];
        for (t, &(i, j)) in ends.iter().enumerate() {
            incident[i].push(t);
            incident[j].push(t);
        }
        let pow = (0..=h.diameter()).map(|d| (d as f64).powf(q)).collect();
        Ok(Terms { ends, incident, pow })
    }
}

pub(crate) fn check_mapping(g: &WeightedGraph, h: &HardwareGraph, m0: &QubitMapping) -> Result<()> {
    if m0.num_logical() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: m0.num_logical(),
        });
    }
    if m0.num_physical() != h.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.num_qubits(),
            got: m0.num_physical(),
        });
    }
    Ok(())
}

/// Change in `D` when the contents of physical qubits `a` and `b` swap.
pub(crate) fn swap_delta(
    terms: &Terms,
    h: &HardwareGraph,
    pos: &[usize],
    inv: &[usize],
    done: &dyn Fn(usize) -> bool,
    a: usize,
    b: usize,
) -> f64 {
    let mut delta = 0.0;
    let (la, lb) = (inv[a], inv[b]);
    for (l, from, to, other) in [(la, a, b, lb), (lb, b, a, la)] {
        if l == EMPTY {
            continue;
        }
        for &t in &terms.incident[l] {
            if done(t) {
                continue;
            }
            let (i, j) = terms.ends[t];
            let w = if i == l { j } else { i };
            if w == other {
                continue;
            }
            let pw = pos[w];
            delta += terms.pow[h.distance(to, pw) as usize] - terms.pow[h.distance(from, pw) as usize];
        }
    }
    delta
}

/// Routes one cost layer greedily. Each round implements every term at
/// distance 1, then applies the swap with the smallest resulting `D`
/// (lexicographically smallest edge on ties) if it strictly lowers `D`;
/// otherwise it moves one endpoint of the closest remaining term a step
/// along a shortest path. After `10 |E| diam(h)` rounds only the second
/// kind of step is used, which always terminates.
pub fn greedy_route(g: &WeightedGraph, h: &HardwareGraph, m0: &QubitMapping, q: f64) -> Result<RoutedCircuit> {
    check_mapping(g, h, m0)?;
    let terms = Terms::new(g, h, q)?;
    let mut pos = m0.as_slice().to_vec();
    let mut inv = vec![EMPTY; h.num_qubits()];
    for (v, &p) in pos.iter().enumerate() {
        inv[p] = v;
    }
    let mut done = vec![false; terms.ends.len()];
    let mut left = terms.ends.len();
    let mut events = Vec::new();
    let guard = 10 * h.edges().len().max(1) * h.diameter().max(1) as usize;
    let mut rounds = 0usize;
    loop {
        for (t, &(i, j)) in terms.ends.iter().enumerate() {
            if !done[t] && h.is_edge(pos[i], pos[j]) {
                done[t] = true;
                left -= 1;
                events.push(Event::Interaction {
                    edge: edge_key(pos[i], pos[j]),
                    term: t,
                });
            }
        }
        if left == 0 {
            break;
        }
        rounds += 1;
        let d_now: f64 = (0..terms.ends.len())
            .filter(|&t| !done[t])
            .map(|t| {
                let (i, j) = terms.ends[t];
                terms.pow[h.distance(pos[i], pos[j]) as usize]
            })
            .sum();
        let mut chosen = None;
        if rounds <= guard {
            let is_done = |t: usize| done[t];
            let active = |p: usize| inv[p] != EMPTY && terms.incident[inv[p]].iter().any(|&t| !done[t]);
            let mut best: Option<(f64, (usize, usize))> = None;
            for &(a, b) in h.edges() {
                if !active(a) && !active(b) {
                    continue;
                }
                let nd = d_now + swap_delta(&terms, h, &pos, &inv, &is_done, a, b);
                if best.map_or(true, |(bd, _)| nd < bd) {
                    best = Some((nd, (a, b)));
                }
            }
            if let Some((nd, e)) = best {
                if nd < d_now - 1e-12 * d_now.max(1.0) {
                    chosen = Some(e);
                }
            }
        }
        let (a, b) = chosen.unwrap_or_else(|| fallback_swap(&terms, h, &pos, &done));
        apply(&mut pos, &mut inv, a, b);
        events.push(Event::Swap { edge: edge_key(a, b) });
    }
    Ok(RoutedCircuit {
        events,
        initial: m0.clone(),
        final_mapping: QubitMapping::new(pos, h.num_qubits())?,
        fallback: false,
    })
}

/// First edge on a shortest path from the first endpoint of the closest
/// remaining term (smallest id on ties) towards the second.
fn fallback_swap(terms: &Terms, h: &HardwareGraph, pos: &[usize], done: &[bool]) -> (usize, usize) {
    let t = (0..terms.ends.len())
        .filter(|&t| !done[t])
        .min_by_key(|&t| (h.distance(pos[terms.ends[t].0], pos[terms.ends[t].1]), t))
        .expect("a term remains");
    let (i, j) = terms.ends[t];
    let (pu, pv) = (pos[i], pos[j]);
    let d = h.distance(pu, pv);
    let x = *h
        .neighbors(pu)
        .iter()
        .find(|&&x| h.distance(x, pv) + 1 == d)
        .expect("connected hardware has a shortest path");
    (pu, x)
}

pub(crate) fn apply(pos: &mut [usize], inv: &mut [usize], a: usize, b: usize) {
    let (la, lb) = (inv[a], inv[b]);
    if la != EMPTY {
        pos[la] = b;
    }
    if lb != EMPTY {
        pos[lb] = a;
    }
    inv.swap(a, b);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_instance, InstanceKind, Weights};
    use crate::routing::validate_circuit;

    #[test]
    fn adjacent_terms_need_no_swaps() {
        let g = WeightedGraph::unweighted(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let h = HardwareGraph::line(4).unwrap();
        let m = QubitMapping::identity(4, 4).unwrap();
        let c = greedy_route(&g, &h, &m, 1.0).unwrap();
        assert_eq!(c.metrics().swaps, 0);
        assert_eq!(c.events.len(), 3);
    }

    #[test]
    fn path_with_distant_term_needs_one_swap() {
        let g = WeightedGraph::unweighted(3, [(0, 2)]).unwrap();
        let h = HardwareGraph::line(3).unwrap();
        let m = QubitMapping::identity(3, 3).unwrap();
        let c = greedy_route(&g, &h, &m, 1.0).unwrap();
        assert_eq!(c.metrics().swaps, 1);
        assert!(matches!(c.events.last(), Some(Event::Interaction { term: 0, .. })));
        validate_circuit(&c, &g, &h).unwrap();
    }

    #[test]
    fn exponents_give_valid_circuits() {
        let h = HardwareGraph::grid(5, 5).unwrap();
        for seed in 0..4 {
            let g = generate_instance(&InstanceKind::RandomRegular { n: 20, degree: 3 }, Weights::Unit, seed).unwrap();
            let m = QubitMapping::identity(20, 25).unwrap();
            for q in [0.5, 1.0, 2.0] {
                let c = greedy_route(&g, &h, &m, q).unwrap();
                validate_circuit(&c, &g, &h).unwrap();
            }
        }
    }

    #[test]
    fn rejects_bad_exponent_and_sizes() {
        let g = WeightedGraph::unweighted(2, [(0, 1)]).unwrap();
        let h = HardwareGraph::line(3).unwrap();
        let m = QubitMapping::identity(2, 3).unwrap();
        assert!(greedy_route(&g, &h, &m, 0.0).is_err());
        assert!(greedy_route(&g, &h, &QubitMapping::identity(2, 2).unwrap(), 1.0).is_err());
    }
}
