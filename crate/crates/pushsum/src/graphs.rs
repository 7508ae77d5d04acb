//! Time-varying directed communication topologies.
//!
//! A [`DirectedGraph`] stores who sends to whom; an edge `(j, i)` means
//! node `j` pushes to node `i`. Every node always sends to itself, which
//! keeps out-degrees positive and the mixing step column-stochastic.
//! A [`GraphSequence`] assigns a graph to every round `t ≥ 0` and can be
//! certified S-strongly connected over a finite horizon: the edge union of
//! every window of `S` consecutive rounds must be strongly connected.

use std::collections::BTreeSet;

use rand_core::RngCore;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("node {node} out of range for a graph on {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("node {node} is missing its self-loop")]
    MissingSelfLoop { node: usize },
    #[error("periodic sequence needs at least one graph")]
    EmptyPeriod,
    #[error("graphs in a sequence must share a node count (found {a} and {b})")]
    MixedNodeCounts { a: usize, b: usize },
    #[error("horizon {horizon} is shorter than the window length {s}")]
    HorizonTooShort { horizon: u64, s: u64 },
    #[error("window length must be at least 1")]
    ZeroWindow,
}

/// Directed communication graph with mandatory self-loops.
///
/// Adjacency is keyed by the sending node so the out-degree lookups that
/// drive the mixing step are cheap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    out: Vec<BTreeSet<usize>>,
}

impl DirectedGraph {
    /// Builds a graph from `(sender, receiver)` pairs. Self-loops are
    /// inserted for every node whether or not they are listed.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut out: Vec<BTreeSet<usize>> = (0..n).map(|j| BTreeSet::from([j])).collect();
        for (j, i) in edges {
            let bad = if j >= n { j } else { i };
            if j >= n || i >= n {
                return Err(GraphError::NodeOutOfRange { node: bad, n });
            }
            out[j].insert(i);
        }
        Ok(Self { n, out })
    }

    /// Builds a graph without completing self-loops: input lacking one is
    /// rejected instead.
    pub fn new_strict(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (j, i) in edges {
            let bad = if j >= n { j } else { i };
            if j >= n || i >= n {
                return Err(GraphError::NodeOutOfRange { node: bad, n });
            }
            out[j].insert(i);
        }
        for (j, receivers) in out.iter().enumerate() {
            if !receivers.contains(&j) {
                return Err(GraphError::MissingSelfLoop { node: j });
            }
        }
        Ok(Self { n, out })
    }

    /// The complete graph: every node sends to every node.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).flat_map(|j| (0..n).map(move |i| (j, i))))
    }

    /// Nodes talk only to themselves.
    pub fn self_loops_only(n: usize) -> Result<Self, GraphError> {
        Self::new(n, std::iter::empty())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of receivers of `j`, self-loop included; always ≥ 1.
    pub fn out_degree(&self, j: usize) -> Result<usize, GraphError> {
        self.out
            .get(j)
            .map(BTreeSet::len)
            .ok_or(GraphError::NodeOutOfRange { node: j, n: self.n })
    }

    /// Receivers of `j` in ascending order. Panics if `j` is out of range.
    pub fn out_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[j].iter().copied()
    }

    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        self.out.get(j).is_some_and(|r| r.contains(&i))
    }

    /// All `(sender, receiver)` pairs, self-loops included.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(j, recv)| recv.iter().map(move |&i| (j, i)))
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(BTreeSet::len).sum()
    }

    /// Edge-union with another graph on the same node set.
    pub fn union(&self, other: &Self) -> Result<Self, GraphError> {
        if self.n != other.n {
            return Err(GraphError::MixedNodeCounts {
                a: self.n,
                b: other.n,
            });
        }
        let mut out = self.out.clone();
        for (j, recv) in other.out.iter().enumerate() {
            out[j].extend(recv.iter().copied());
        }
        Ok(Self { n: self.n, out })
    }

    /// True iff every node reaches every node along directed paths.
    ///
    /// Forward and backward breadth-first searches from node 0 must each
    /// cover the graph.
    pub fn is_strongly_connected(&self) -> bool {
        let forward = |j: usize| self.out[j].iter().copied().collect::<Vec<_>>();
        let mut incoming = vec![Vec::new(); self.n];
        for (j, i) in self.edges() {
            incoming[i].push(j);
        }
        let backward = |i: usize| incoming[i].clone();
        bfs_covers(self.n, 0, forward) && bfs_covers(self.n, 0, backward)
    }
}

fn bfs_covers(n: usize, start: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> bool {
    let mut seen = vec![false; n];
    let mut queue = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = queue.pop() {
        for u in neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                queue.push(u);
            }
        }
    }
    count == n
}

/// How an [`GraphSequence::Alternating`] sequence orders each two-round
/// block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlternationOrder {
    /// Uniform per-block choice, driven by a dedicated substream of the
    /// seed so topology and gradient noise stay independent.
    Seeded { seed: u64 },
    /// Even blocks play first-then-second, odd blocks the reverse.
    Deterministic,
}

/// Time-indexed topology: `graph_at(t)` is defined for every round.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSequence {
    /// The same graph every round.
    Constant(DirectedGraph),
    /// Cycles through the list; the period is the list length.
    Periodic(Vec<DirectedGraph>),
    /// Two graphs presented once each per two-round block, in a per-block
    /// order. This is the shape of the built-in three-node example.
    Alternating {
        first: DirectedGraph,
        second: DirectedGraph,
        order: AlternationOrder,
    },
}

/// First combination graph of the built-in example: 1↔2, 2↔3 plus
/// self-loops (nodes numbered from 1).
pub fn paper_combo_a() -> DirectedGraph {
    DirectedGraph::new(3, [(0, 1), (1, 0), (1, 2), (2, 1)]).expect("static edge list")
}

/// Second combination graph of the built-in example: 1↔2, 1↔3 plus
/// self-loops.
pub fn paper_combo_b() -> DirectedGraph {
    DirectedGraph::new(3, [(0, 1), (1, 0), (0, 2), (2, 0)]).expect("static edge list")
}

/// The built-in three-node sequence with seeded per-block order.
pub fn paper_example_sequence(seed: u64) -> GraphSequence {
    GraphSequence::Alternating {
        first: paper_combo_a(),
        second: paper_combo_b(),
        order: AlternationOrder::Seeded { seed },
    }
}

/// The built-in three-node sequence with deterministic block alternation.
pub fn paper_example_deterministic() -> GraphSequence {
    GraphSequence::Alternating {
        first: paper_combo_a(),
        second: paper_combo_b(),
        order: AlternationOrder::Deterministic,
    }
}

impl GraphSequence {
    /// Validates shared node counts across the sequence.
    pub fn validate(&self) -> Result<(), GraphError> {
        match self {
            GraphSequence::Constant(_) => Ok(()),
            GraphSequence::Periodic(graphs) => {
                let first = graphs.first().ok_or(GraphError::EmptyPeriod)?;
                for g in graphs {
                    if g.node_count() != first.node_count() {
                        return Err(GraphError::MixedNodeCounts {
                            a: first.node_count(),
                            b: g.node_count(),
                        });
                    }
                }
                Ok(())
            }
            GraphSequence::Alternating { first, second, .. } => {
                if first.node_count() != second.node_count() {
                    return Err(GraphError::MixedNodeCounts {
                        a: first.node_count(),
                        b: second.node_count(),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            GraphSequence::Constant(g) => g.node_count(),
            GraphSequence::Periodic(graphs) => {
                graphs.first().map(DirectedGraph::node_count).unwrap_or(0)
            }
            GraphSequence::Alternating { first, .. } => first.node_count(),
        }
    }

    /// The topology used at round `t`; deterministic given the sequence
    /// (including its seed) and `t`.
    pub fn graph_at(&self, t: u64) -> &DirectedGraph {
        match self {
            GraphSequence::Constant(g) => g,
            GraphSequence::Periodic(graphs) => {
                let p = graphs.len() as u64;
                &graphs[(t % p) as usize]
            }
            GraphSequence::Alternating {
                first,
                second,
                order,
            } => {
                let block = t / 2;
                let swapped = match order {
                    AlternationOrder::Seeded { seed } => {
                        rng::stream(*seed, rng::TAG_GRAPH, block, 0).next_u64() & 1 == 1
                    }
                    AlternationOrder::Deterministic => block % 2 == 1,
                };
                if (t % 2 == 0) ^ swapped {
                    first
                } else {
                    second
                }
            }
        }
    }

    /// Edge union over rounds `t .. t+s-1`.
    pub fn union_graph(&self, t: u64, s: u64) -> Result<DirectedGraph, GraphError> {
        if s == 0 {
            return Err(GraphError::ZeroWindow);
        }
        let mut acc = self.graph_at(t).clone();
        for k in 1..s {
            acc = acc.union(self.graph_at(t + k))?;
        }
        Ok(acc)
    }

    /// True iff every window of `s` rounds starting in `[0, horizon − s]`
    /// has a strongly connected union.
    ///
    /// A finite horizon can only certify itself; for periodic sequences a
    /// horizon of `period + s` covers every distinct window.
    pub fn check_s_strong_connectivity(&self, s: u64, horizon: u64) -> Result<bool, GraphError> {
        if s == 0 {
            return Err(GraphError::ZeroWindow);
        }
        if horizon < s {
            return Err(GraphError::HorizonTooShort { horizon, s });
        }
        for t in 0..=(horizon - s) {
            if !self.union_graph(t, s)?.is_strongly_connected() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Smallest `S ≤ horizon` passing [`Self::check_s_strong_connectivity`],
    /// or `None` if no window length up to the horizon works.
    pub fn min_s(&self, horizon: u64) -> Option<u64> {
        (1..=horizon).find(|&s| self.check_s_strong_connectivity(s, horizon) == Ok(true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loops_are_completed() {
        let g = DirectedGraph::new(3, [(0, 1)]).unwrap();
        for j in 0..3 {
            assert!(g.has_edge(j, j));
            assert!(g.out_degree(j).unwrap() >= 1);
        }
        assert_eq!(g.out_degree(0).unwrap(), 2);
    }

    #[test]
    fn strict_constructor_rejects_missing_self_loop() {
        let err = DirectedGraph::new_strict(2, [(0, 0), (0, 1)]).unwrap_err();
        assert_eq!(err, GraphError::MissingSelfLoop { node: 1 });
        assert!(DirectedGraph::new_strict(2, [(0, 0), (1, 1), (0, 1)]).is_ok());
    }

    #[test]
    fn out_degree_examples() {
        let lonely = DirectedGraph::self_loops_only(1).unwrap();
        assert_eq!(lonely.out_degree(0).unwrap(), 1);

        let complete = DirectedGraph::complete(3).unwrap();
        for j in 0..3 {
            assert_eq!(complete.out_degree(j).unwrap(), 3);
        }

        // example combo 1↔2, 2↔3: middle node reaches itself and both ends
        let a = paper_combo_a();
        assert_eq!(a.out_degree(0).unwrap(), 2);
        assert_eq!(a.out_degree(1).unwrap(), 3);
        assert_eq!(a.out_degree(2).unwrap(), 2);
        assert!(a.out_degree(3).is_err());
    }

    #[test]
    fn strong_connectivity_examples() {
        assert!(DirectedGraph::complete(3).unwrap().is_strongly_connected());
        assert!(!DirectedGraph::self_loops_only(3)
            .unwrap()
            .is_strongly_connected());
        assert!(paper_combo_a().is_strongly_connected());
        assert!(paper_combo_b().is_strongly_connected());
        // a one-way chain is not strongly connected
        let chain = DirectedGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(!chain.is_strongly_connected());
    }

    #[test]
    fn graph_at_constant_and_periodic() {
        let g = DirectedGraph::complete(3).unwrap();
        let constant = GraphSequence::Constant(g.clone());
        assert_eq!(constant.graph_at(7), &g);

        let g0 = DirectedGraph::self_loops_only(2).unwrap();
        let g1 = DirectedGraph::complete(2).unwrap();
        let periodic = GraphSequence::Periodic(vec![g0.clone(), g1.clone()]);
        assert_eq!(periodic.graph_at(5), &g1);
        assert_eq!(periodic.graph_at(4), &g0);
    }

    #[test]
    fn alternating_blocks_contain_both_combos() {
        let seq = paper_example_sequence(99);
        for block in 0..64 {
            let g0 = seq.graph_at(2 * block).clone();
            let g1 = seq.graph_at(2 * block + 1).clone();
            assert_ne!(g0, g1);
            assert!(g0 == paper_combo_a() || g0 == paper_combo_b());
            assert!(g1 == paper_combo_a() || g1 == paper_combo_b());
            // repeat lookups are stable
            assert_eq!(&g0, seq.graph_at(2 * block));
        }
        // both orders occur over enough blocks
        let starts: Vec<bool> = (0..64)
            .map(|b| seq.graph_at(2 * b) == &paper_combo_a())
            .collect();
        assert!(starts.iter().any(|&x| x));
        assert!(starts.iter().any(|&x| !x));
    }

    #[test]
    fn union_window_of_one_is_graph_at() {
        let seq = paper_example_sequence(3);
        for t in 0..10 {
            assert_eq!(&seq.union_graph(t, 1).unwrap(), seq.graph_at(t));
        }
    }

    #[test]
    fn union_of_disjoint_halves_is_complete() {
        // split the complete graph on 2 nodes into two one-way graphs
        let fwd = DirectedGraph::new(2, [(0, 1)]).unwrap();
        let bwd = DirectedGraph::new(2, [(1, 0)]).unwrap();
        let union = fwd.union(&bwd).unwrap();
        assert_eq!(union, DirectedGraph::complete(2).unwrap());
    }

    #[test]
    fn s_strong_connectivity_checks() {
        let complete = GraphSequence::Constant(DirectedGraph::complete(3).unwrap());
        assert!(complete.check_s_strong_connectivity(1, 16).unwrap());

        let seq = paper_example_sequence(5);
        assert!(seq.check_s_strong_connectivity(4, 64).unwrap());

        let isolated = GraphSequence::Constant(DirectedGraph::self_loops_only(3).unwrap());
        for s in 1..6 {
            assert!(!isolated.check_s_strong_connectivity(s, 8).unwrap());
        }

        assert_eq!(
            seq.check_s_strong_connectivity(4, 3),
            Err(GraphError::HorizonTooShort { horizon: 3, s: 4 })
        );
    }

    #[test]
    fn min_s_examples() {
        let complete = GraphSequence::Constant(DirectedGraph::complete(3).unwrap());
        assert_eq!(complete.min_s(8), Some(1));

        let isolated = GraphSequence::Constant(DirectedGraph::self_loops_only(2).unwrap());
        assert_eq!(isolated.min_s(8), None);

        // each combo graph is strongly connected on its own, so the
        // deterministic alternation is already 1-strongly connected
        let det = paper_example_deterministic();
        let s = det.min_s(16).unwrap();
        assert_eq!(s, 1);
        assert!(s <= 4);
    }

    #[test]
    fn node_never_receiving_breaks_connectivity() {
        // node 2 never has in-edges from others
        let g = DirectedGraph::new(3, [(0, 1), (1, 0), (2, 0), (2, 1)]).unwrap();
        let seq = GraphSequence::Constant(g);
        for s in 1..5 {
            assert!(!seq.check_s_strong_connectivity(s, 8).unwrap());
        }
    }
}
