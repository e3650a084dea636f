//! Randomized invariant checks over small generated graphs.

use proptest::prelude::*;

use drw_core::dc::Simulation;
use drw_core::graph::{OneSinkSystem, WeightedGraph};
use drw_core::oracle;
use drw_core::rng::SimRng;
use drw_core::rst;
use drw_core::solver;

/// Connected weighted graph: a random tree plus a random subset of extra
/// edges, weights in [0.5, 2].
fn arb_graph() -> impl Strategy<Value = WeightedGraph> {
    (2usize..9)
        .prop_flat_map(|n| {
            let parents: Vec<BoxedStrategy<usize>> =
                (1..n).map(|i| (0..i).boxed()).collect();
            let extras = proptest::collection::vec((0usize..n, 0usize..n, 0.5f64..2.0), 0..6);
            let tree_w = proptest::collection::vec(0.5f64..2.0, n - 1);
            (Just(n), parents, extras, tree_w)
        })
        .prop_map(|(n, parents, extras, tree_w)| {
            let mut edges: Vec<(usize, usize, f64)> = parents
                .iter()
                .enumerate()
                .map(|(i, &p)| (p, i + 1, tree_w[i]))
                .collect();
            for (u, v, w) in extras {
                let (a, b) = (u.min(v), u.max(v));
                if a != b && !edges.iter().any(|&(x, y, _)| (x.min(y), x.max(y)) == (a, b)) {
                    edges.push((a, b, w));
                }
            }
            WeightedGraph::from_edges(n, edges).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_list_round_trip(g in arb_graph()) {
        let text = g.to_edge_list();
        let back = WeightedGraph::from_edge_list(&text).unwrap();
        prop_assert_eq!(g.n(), back.n());
        prop_assert_eq!(g.edges(), back.edges());
    }

    #[test]
    fn one_sink_normalization(g in arb_graph(), sink in 0usize..8, mass in 0.5f64..4.0) {
        let n = g.n();
        let sink = sink % n;
        let mut b = vec![0.0; n];
        for (i, bv) in b.iter_mut().enumerate() {
            if i != sink {
                *bv = mass * (1.0 + i as f64 * 0.1);
            }
        }
        let pos: f64 = b.iter().sum();
        b[sink] = -pos;
        let sys = OneSinkSystem::new(b.clone()).unwrap();
        prop_assert_eq!(sys.sink(), sink);
        prop_assert!((sys.j()[sink] + 1.0).abs() < 1e-12);
        for u in 0..n {
            if u != sink {
                prop_assert!((sys.j()[u] - b[u] / pos).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_is_mean_free(x in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
        let y = solver::canonicalize(&x);
        let sum: f64 = y.iter().sum();
        prop_assert!(sum.abs() < 1e-9);
        // offsets cancel in differences
        for i in 1..x.len() {
            prop_assert!(((y[i] - y[0]) - (x[i] - x[0])).abs() < 1e-9);
        }
    }

    #[test]
    fn split_sums_back(g in arb_graph(), neg in 1usize..4) {
        let n = g.n();
        let neg = neg.min(n - 1);
        let mut b = vec![1.0; n];
        for bv in b.iter_mut().take(neg) {
            *bv = -((n - neg) as f64) / neg as f64;
        }
        let total: f64 = b.iter().sum();
        b[0] -= total;
        if b[0] >= 0.0 { return Ok(()); }
        let systems = solver::split_general_b(&b).unwrap();
        prop_assert_eq!(systems.len(), b.iter().filter(|&&v| v < 0.0).count());
        for u in 0..n {
            let sum: f64 = systems.iter().map(|s| s.b()[u]).sum();
            prop_assert!((sum - b[u]).abs() < 1e-9);
        }
    }

    #[test]
    fn occupancy_linear_in_beta(g in arb_graph()) {
        let n = g.n();
        let mut j = vec![0.0; n];
        j[0] = 1.0;
        j[n - 1] = -1.0;
        if n < 2 { return Ok(()); }
        let a = oracle::exact_occupancy(&g, n - 1, &j, 0.01).unwrap();
        let b = oracle::exact_occupancy(&g, n - 1, &j, 0.03).unwrap();
        for (x, y) in a.eta.iter().zip(&b.eta) {
            prop_assert!((3.0 * x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_bound_below_critical_rate(g in arb_graph()) {
        let n = g.n();
        let mut j = vec![0.0; n];
        j[0] = 1.0;
        j[n - 1] = -1.0;
        let bound = oracle::rate_lower_bound(&g, n - 1, &j);
        let bs = oracle::exact_beta_star(&g, n - 1, &j).unwrap();
        prop_assert!(bs >= bound - 1e-9, "bound {} beta* {}", bound, bs);
    }

    #[test]
    fn enumeration_matches_determinant(g in arb_graph()) {
        if g.m() > 16 { return Ok(()); }
        let trees = oracle::enumerate_spanning_trees(&g).unwrap();
        // determinant counting is weighted; compare on unit-weight copies
        let unit = WeightedGraph::from_edges(
            g.n(),
            g.edges().iter().map(|&(u, v, _)| (u, v, 1.0)).collect(),
        ).unwrap();
        prop_assert_eq!(trees.len() as u64, oracle::spanning_tree_count(&unit));
    }

    #[test]
    fn conservation_on_random_graphs(g in arb_graph(), seed in 0u64..1000) {
        let n = g.n();
        let mut b = vec![1.0; n];
        b[n - 1] = -((n - 1) as f64);
        let sys = OneSinkSystem::new(b).unwrap();
        let mut sim = Simulation::new(&g, &[n - 1], seed);
        sim.reset_color(0, sys.j(), 0.2, 0).unwrap();
        for _ in 0..300 {
            sim.step();
        }
        prop_assert!(sim.conservation_holds(0));
    }

    #[test]
    fn decomposition_invariants(g in arb_graph(), seed in 0u64..1000, phi in 0.1f64..0.9) {
        let dec = rst::decompose(&g, phi, seed).unwrap();
        let total: usize = dec.members.iter().map(Vec::len).sum();
        prop_assert_eq!(total, g.n());
        for &(u, v, _) in &dec.cut_edges {
            prop_assert!(dec.partition[u] != dec.partition[v]);
        }
        let cross = g.edges().iter()
            .filter(|&&(u, v, _)| dec.partition[u] != dec.partition[v])
            .count();
        prop_assert_eq!(cross, dec.cut_edges.len());
        for (i, &l) in dec.leaders.iter().enumerate() {
            prop_assert_eq!(dec.partition[l], i);
        }
    }

    #[test]
    fn aldous_broder_trees_validate(g in arb_graph(), seed in 0u64..1000) {
        let mut rng = SimRng::new(seed);
        let tree = rst::aldous_broder(&g, &mut rng).unwrap();
        prop_assert_eq!(tree.edges.len(), g.n() - 1);
    }

    #[test]
    fn resistance_is_symmetric(g in arb_graph()) {
        let n = g.n();
        let a = oracle::effective_resistance_exact(&g, 0, n - 1).unwrap();
        let b = oracle::effective_resistance_exact(&g, n - 1, 0).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a > 0.0);
    }

    #[test]
    fn hitting_times_positive_off_target(g in arb_graph(), t in 0usize..8) {
        let t = t % g.n();
        let h = oracle::hitting_times(&g, t).unwrap();
        prop_assert!(h[t] == 0.0);
        for (u, &hu) in h.iter().enumerate() {
            if u != t {
                prop_assert!(hu >= 1.0 - 1e-12);
            }
        }
    }
}
