//! Property tests for the graph layer: the strong-connectivity check
//! against a transitive-closure oracle, and the structural guarantees of
//! the sequence operations.

use proptest::prelude::*;
use pushsum::graphs::{DirectedGraph, GraphSequence};

/// Floyd-Warshall transitive closure: strongly connected iff every pair
/// is mutually reachable.
fn strongly_connected_oracle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
    }
    for &(j, i) in edges {
        reach[j][i] = true;
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if reach[a][k] && reach[k][b] {
                    reach[a][b] = true;
                }
            }
        }
    }
    (0..n).all(|a| (0..n).all(|b| reach[a][b]))
}

#[test]
fn connectivity_matches_oracle_exhaustively_on_three_nodes() {
    // all 2^6 digraphs over the non-loop edges of 3 nodes
    let pairs: Vec<(usize, usize)> = (0..3)
        .flat_map(|j| (0..3).filter(move |&i| i != j).map(move |i| (j, i)))
        .collect();
    for mask in 0..(1u32 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &e)| e)
            .collect();
        let g = DirectedGraph::new(3, edges.iter().copied()).unwrap();
        let mut with_loops = edges.clone();
        with_loops.extend((0..3).map(|i| (i, i)));
        assert_eq!(
            g.is_strongly_connected(),
            strongly_connected_oracle(3, &with_loops),
            "mask {mask:#b}"
        );
    }
}

proptest! {
    #[test]
    fn connectivity_matches_oracle_on_random_digraphs(
        n in 1usize..=5,
        edge_bits in prop::collection::vec(any::<bool>(), 25),
    ) {
        let mut edges = Vec::new();
        let mut k = 0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    if edge_bits[k] {
                        edges.push((j, i));
                    }
                    k += 1;
                }
            }
        }
        let g = DirectedGraph::new(n, edges.iter().copied()).unwrap();
        let mut with_loops = edges.clone();
        with_loops.extend((0..n).map(|i| (i, i)));
        prop_assert_eq!(
            g.is_strongly_connected(),
            strongly_connected_oracle(n, &with_loops)
        );
    }

    #[test]
    fn union_window_one_equals_graph_at(seed in any::<u64>(), t in 0u64..64) {
        let seq = pushsum::graphs::paper_example_sequence(seed);
        prop_assert_eq!(&seq.union_graph(t, 1).unwrap(), seq.graph_at(t));
    }

    #[test]
    fn s_strong_connectivity_is_monotone_in_s(
        masks in prop::collection::vec(0u32..64, 1..4),
        s in 1u64..4,
    ) {
        // random periodic sequence over 3-node digraphs
        let pairs: Vec<(usize, usize)> = (0..3)
            .flat_map(|j| (0..3).filter(move |&i| i != j).map(move |i| (j, i)))
            .collect();
        let graphs: Vec<DirectedGraph> = masks
            .iter()
            .map(|mask| {
                let edges = pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, &e)| e);
                DirectedGraph::new(3, edges).unwrap()
            })
            .collect();
        let seq = GraphSequence::Periodic(graphs);
        let horizon = masks.len() as u64 + 8;
        if seq.check_s_strong_connectivity(s, horizon).unwrap() {
            for s2 in s..=(s + 3) {
                prop_assert!(
                    seq.check_s_strong_connectivity(s2, horizon).unwrap(),
                    "S = {} passed but S' = {} failed",
                    s,
                    s2
                );
            }
        }
    }

    #[test]
    fn min_s_result_is_certified(masks in prop::collection::vec(0u32..64, 1..4)) {
        let pairs: Vec<(usize, usize)> = (0..3)
            .flat_map(|j| (0..3).filter(move |&i| i != j).map(move |i| (j, i)))
            .collect();
        let graphs: Vec<DirectedGraph> = masks
            .iter()
            .map(|mask| {
                let edges = pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, &e)| e);
                DirectedGraph::new(3, edges).unwrap()
            })
            .collect();
        let seq = GraphSequence::Periodic(graphs);
        let horizon = masks.len() as u64 + 8;
        match seq.min_s(horizon) {
            Some(s) => {
                prop_assert!(seq.check_s_strong_connectivity(s, horizon).unwrap());
                if s > 1 {
                    prop_assert!(!seq.check_s_strong_connectivity(s - 1, horizon).unwrap());
                }
            }
            None => {
                for s in 1..=horizon {
                    prop_assert!(!seq.check_s_strong_connectivity(s, horizon).unwrap());
                }
            }
        }
    }
}
