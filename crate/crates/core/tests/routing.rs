mod common;

use proptest::prelude::*;
use qeopt::emulator::{qaoa_state, QaoaParams};
use qeopt::problem::{generate_instance, maxcut_to_qubo, CostDiagonal, InstanceKind, WeightedGraph, Weights};
use qeopt::routing::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_amp_diff(a: &qeopt::emulator::Statevector, b: &qeopt::emulator::Statevector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn check_execution(c: &RoutedCircuit, g: &WeightedGraph, params: &QaoaParams) -> f64 {
    let q = maxcut_to_qubo(g).to_minimization();
    let d = CostDiagonal::for_qaoa(&maxcut_to_qubo(g), 26).unwrap();
    let want = qaoa_state(&d, params);
    let got = execute_qaoa(c, g, &q, params).unwrap();
    max_amp_diff(&want, &got)
}

fn random_params(p: usize, rng: &mut ChaCha8Rng) -> QaoaParams {
    QaoaParams::new(
        (0..p).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn routed_circuits_reproduce_the_qaoa_state() {
    let h = HardwareGraph::grid(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..6 {
        let g = generate_instance(&InstanceKind::RandomRegular { n: 8, degree: 3 }, Weights::Uniform { lo: -1.0, hi: 1.0 }, seed)
            .unwrap();
        let m0 = random_layout(&g, &h, seed).unwrap();
        let greedy = greedy_route(&g, &h, &m0, 1.0).unwrap();
        let astar = astar_route(&g, &h, &m0, &AstarConfig::default()).unwrap();
        for c in [&greedy, &astar, &merge_swap_zz(&greedy), &merge_swap_zz(&astar)] {
            validate_circuit(c, &g, &h).unwrap();
            for p in 1..=3 {
                let params = random_params(p, &mut rng);
                assert!(check_execution(c, &g, &params) < 1e-9);
            }
        }
    }
}

#[test]
fn merging_saves_two_cnots_per_pair() {
    let h = HardwareGraph::grid(4, 4).unwrap();
    for seed in 0..5 {
        let g = generate_instance(&InstanceKind::RandomRegular { n: 12, degree: 3 }, Weights::Unit, seed).unwrap();
        let m0 = qap_layout(&g, &h, seed).unwrap();
        let c = greedy_route(&g, &h, &m0, 1.0).unwrap();
        let merged = merge_swap_zz(&c);
        validate_circuit(&merged, &g, &h).unwrap();
        let pairs = merged
            .events
            .iter()
            .filter(|e| matches!(e, Event::MergedSwapInteraction { .. }))
            .count();
        assert_eq!(merged.metrics().cnots + 2 * pairs, c.metrics().cnots);
        assert_eq!(merged.metrics().swaps, c.metrics().swaps);
    }
}

#[test]
fn swap_enhanced_plan_matches_direct_qaoa() {
    let hw = HardwareGraph::heavy_hex_156();
    let patch = hw.bfs_patch(0, 8);
    let base = hw.graph().induced_subgraph(&patch);
    let swaps: Vec<(usize, usize)> = base.edges().iter().take(1).map(|&(i, j, _)| (i, j)).collect();
    let built = build_swap_enhanced(&base, &swaps).unwrap();
    assert!(built.graph.num_edges() > base.num_edges());
    validate_circuit(&built.plan, &built.graph, &built.hardware).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in 1..=3 {
        let params = random_params(p, &mut rng);
        assert!(check_execution(&built.plan, &built.graph, &params) < 1e-9);
    }
}

#[test]
fn iterated_mapping_never_gets_worse() {
    let h = HardwareGraph::grid(10, 10).unwrap();
    let g = generate_instance(&InstanceKind::RandomRegular { n: 20, degree: 3 }, Weights::Unit, 1).unwrap();
    let m0 = qap_layout(&g, &h, 1).unwrap();
    let router = Router::Greedy { q: 1.0 };
    let (_, first) = iterate_mapping(&g, &h, &m0, &router, 1).unwrap();
    assert_eq!(first, merge_swap_zz(&greedy_route(&g, &h, &m0, 1.0).unwrap()));
    let mut last = usize::MAX;
    for k in [1, 2, 5, 10] {
        let (start, best) = iterate_mapping(&g, &h, &m0, &router, k).unwrap();
        assert_eq!(start, best.initial);
        validate_circuit(&best, &g, &h).unwrap();
        assert!(best.metrics().cnots <= last);
        last = best.metrics().cnots;
    }
    assert!(last <= first.metrics().cnots);
}

/// Fewest swaps over all swap sequences of length up to `limit`, where a
/// term counts as implemented once its endpoints are adjacent at any point.
#[test]
fn astar_matches_brute_force_on_small_instances() {
    let h = HardwareGraph::grid(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 20 {
        let n = rng.gen_range(4..=7);
        let g = generate_instance(&InstanceKind::ErdosRenyi { n, p_edge: 0.4 }, Weights::Unit, rng.gen()).unwrap();
        let m0 = random_layout(&g, &h, rng.gen()).unwrap();
        let Some(opt) = common::brute_force_swaps(&g, &h, &m0, 3) else { continue };
        let cfg = AstarConfig {
            prove_optimal: true,
            beam_limit: 1_000_000,
            ..Default::default()
        };
        let c = astar_route(&g, &h, &m0, &cfg).unwrap();
        validate_circuit(&c, &g, &h).unwrap();
        assert_eq!(c.metrics().swaps, opt);
        checked += 1;
    }
}

#[test]
fn qap_finds_perfect_embeddings_of_hardware_subgraphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..10 {
        let h = HardwareGraph::grid(2, 4).unwrap();
        // Relabel the hardware graph itself; overlap must reach |E|.
        let mut perm: Vec<usize> = (0..8).collect();
        perm.shuffle(&mut rng);
        let g = WeightedGraph::unweighted(8, h.edges().iter().map(|&(a, b)| (perm[a], perm[b]))).unwrap();
        let m = qap_layout(&g, &h, trial).unwrap();
        assert_eq!(LayoutScore::of(&g, &h, &m).overlap, g.num_edges());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn routers_always_produce_valid_circuits(seed in 0u64..1000, n in 4usize..12, q in 0.5f64..2.0) {
        let h = HardwareGraph::grid(3, 4).unwrap();
        let g = generate_instance(&InstanceKind::ErdosRenyi { n, p_edge: 0.5 }, Weights::Unit, seed).unwrap();
        let m0 = random_layout(&g, &h, seed).unwrap();
        let c = greedy_route(&g, &h, &m0, q).unwrap();
        validate_circuit(&c, &g, &h).unwrap();
        validate_circuit(&merge_swap_zz(&c), &g, &h).unwrap();
        let cfg = AstarConfig { q, beam_limit: 2_000, ..Default::default() };
        let a = astar_route(&g, &h, &m0, &cfg).unwrap();
        validate_circuit(&a, &g, &h).unwrap();
        let d = AstarConfig { mode: CostMode::Depth, ..cfg };
        validate_circuit(&astar_route(&g, &h, &m0, &d).unwrap(), &g, &h).unwrap();
    }
}
