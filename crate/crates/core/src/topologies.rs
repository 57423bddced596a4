//! Named graphs used throughout the examples, tests and CLI.

use crate::graph::{NetworkGraph, NodeId};

/// Chain 1–2–…–n.
pub fn path(n: NodeId) -> NetworkGraph {
    if n == 1 {
        return NetworkGraph::new([1], []).expect("single node");
    }
    let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
    NetworkGraph::from_edges(&edges).expect("path is simple")
}

/// Ring 1–2–…–n–1.
pub fn cycle(n: NodeId) -> NetworkGraph {
    let edges: Vec<_> = (1..=n).map(|i| (i, i % n + 1)).collect();
    NetworkGraph::from_edges(&edges).expect("cycle is simple")
}

pub fn complete(n: NodeId) -> NetworkGraph {
    let mut edges = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            edges.push((a, b));
        }
    }
    NetworkGraph::from_edges(&edges).expect("complete graph is simple")
}

/// Seven-site pigment network: chain 1–2–3–4 joined to the loop 4–5–6–7.
pub fn fmo() -> NetworkGraph {
    NetworkGraph::from_edges(&[(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (4, 7)])
        .expect("fmo graph is simple")
}

/// Tree with one junction at 3 and branch ends 1, 5 and 8.
pub fn junction_tree() -> NetworkGraph {
    NetworkGraph::from_edges(&[(1, 2), (2, 3), (3, 4), (4, 5), (3, 6), (6, 7), (7, 8)])
        .expect("tree is simple")
}

/// Loop 2–3–4–5 with branches ending at 1, 6 and 8; site 3 is the only
/// loop site without a branch.
pub fn branched_loop() -> NetworkGraph {
    NetworkGraph::from_edges(&[(1, 2), (2, 3), (3, 4), (4, 5), (2, 5), (4, 6), (5, 7), (7, 8)])
        .expect("graph is simple")
}

/// Two triangles sharing site 3: 5 sites, 6 edges.
pub fn bowtie() -> NetworkGraph {
    NetworkGraph::from_edges(&[(1, 2), (2, 3), (1, 3), (3, 4), (4, 5), (3, 5)])
        .expect("bowtie is simple")
}

/// Four sites with five edges (a square with one diagonal).
pub fn diamond() -> NetworkGraph {
    NetworkGraph::from_edges(&[(1, 2), (2, 3), (3, 4), (1, 4), (1, 3)]).expect("diamond is simple")
}

/// Triangle 3–4–5 with the tail 1–2–3.
pub fn triangle_with_tail() -> NetworkGraph {
    NetworkGraph::from_edges(&[(1, 2), (2, 3), (3, 4), (4, 5), (3, 5)]).expect("graph is simple")
}
