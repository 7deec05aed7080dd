use std::collections::HashSet;

use qeopt::problem::WeightedGraph;
use qeopt::routing::{HardwareGraph, QubitMapping};

/// Fewest swaps that let every term act on an adjacent pair at some point,
/// by breadth-first search over swap sequences up to `limit`.
pub fn brute_force_swaps(g: &WeightedGraph, h: &HardwareGraph, m0: &QubitMapping, limit: usize) -> Option<usize> {
    let terms: Vec<(usize, usize)> = g.edges().iter().map(|&(i, j, _)| (i, j)).collect();
    let mark = |pos: &[usize], done: &mut Vec<bool>| {
        for (t, &(i, j)) in terms.iter().enumerate() {
            if h.is_edge(pos[i], pos[j]) {
                done[t] = true;
            }
        }
    };
    let mut done0 = vec![false; terms.len()];
    mark(m0.as_slice(), &mut done0);
    let mut frontier = vec![(m0.as_slice().to_vec(), done0)];
    for k in 0..=limit {
        if frontier.iter().any(|(_, d)| d.iter().all(|&x| x)) {
            return Some(k);
        }
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for (pos, done) in &frontier {
            for &(a, b) in h.edges() {
                let mut p = pos.clone();
                for v in p.iter_mut() {
                    if *v == a {
                        *v = b;
                    } else if *v == b {
                        *v = a;
                    }
                }
                let mut d = done.clone();
                mark(&p, &mut d);
                if seen.insert((p.clone(), d.clone())) {
                    next.push((p, d));
                }
            }
        }
        frontier = next;
    }
    None
}
