//! Network graphs, infection closures, topology classes and access planning.
//!
//! A [`NetworkGraph`] is a simple undirected graph on integer-labelled sites
//! whose edges carry the known sign of their coupling. Node labels are opaque;
//! wherever an ordering is needed the labels are sorted numerically.

mod infection;
mod plan;
mod topology;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use infection::{infection_closure, is_infecting, minimum_infecting_sets, DEFAULT_MAX_NODES};
pub use plan::{
    compute_access_plan, compute_aggressive_plan, AccessPlan, BranchPeel, CyclePlan, LinkSegment,
    PlanMode,
};
pub use topology::{classify_topology, is_estimable, Estimability, TopologyClass};

pub type NodeId = u32;

/// Unordered site pair, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    u: NodeId,
    v: NodeId,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    pub fn u(&self) -> NodeId {
        self.u
    }

    pub fn v(&self) -> NodeId {
        self.v
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.u == n || self.v == n
    }

    /// The endpoint opposite `n`, if `n` is an endpoint.
    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if n == self.u {
            Some(self.v)
        } else if n == self.v {
            Some(self.u)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.u, self.v)
    }
}

impl FromStr for Edge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::input(format!("edge key {s:?} is not of the form \"u-v\"")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<NodeId>()
                .map_err(|_| Error::input(format!("edge key {s:?} has a non-integer endpoint")))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if a >= b {
            return Err(Error::input(format!(
                "edge key {s:?} must list the smaller label first"
            )));
        }
        Ok(Edge::new(a, b))
    }
}

/// Known sign of a coupling constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

impl TryFrom<i64> for Sign {
    type Error = Error;

    fn try_from(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            other => Err(Error::input(format!("edge sign must be 1 or -1, got {other}"))),
        }
    }
}

/// Simple undirected graph with signed edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct NetworkGraph {
    nodes: Vec<NodeId>,
    edges: BTreeMap<Edge, Sign>,
    adjacency: BTreeMap<NodeId, Vec<NodeId>>,
}

impl NetworkGraph {
    /// Builds a graph, rejecting self-loops, duplicate edges and edges whose
    /// endpoints are not declared nodes.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId, Sign)>,
    ) -> Result<Self> {
        let mut node_list: Vec<NodeId> = Vec::new();
        let mut seen = BTreeSet::new();
        for n in nodes {
            if !seen.insert(n) {
                return Err(Error::input(format!("node {n} declared twice")));
            }
            node_list.push(n);
        }
        node_list.sort_unstable();

        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> =
            node_list.iter().map(|&n| (n, Vec::new())).collect();
        let mut edge_map = BTreeMap::new();
        for (a, b, sign) in edges {
            if a == b {
                return Err(Error::input(format!("self-loop at node {a}")));
            }
            for x in [a, b] {
                if !seen.contains(&x) {
                    return Err(Error::input(format!(
                        "edge {a}-{b} refers to undeclared node {x}"
                    )));
                }
            }
            let e = Edge::new(a, b);
            if edge_map.insert(e, sign).is_some() {
                return Err(Error::input(format!("duplicate edge {e}")));
            }
            adjacency.get_mut(&a).expect("declared").push(b);
            adjacency.get_mut(&b).expect("declared").push(a);
        }
        for nbrs in adjacency.values_mut() {
            nbrs.sort_unstable();
        }
        Ok(NetworkGraph {
            nodes: node_list,
            edges: edge_map,
            adjacency,
        })
    }

    /// Graph with all couplings positive; the node set is the set of edge
    /// endpoints.
    pub fn from_edges(edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let nodes: BTreeSet<NodeId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        Self::new(nodes, edges.iter().map(|&(a, b)| (a, b, Sign::Positive)))
    }

    /// Nodes in ascending label order. Matrix row `i` corresponds to `nodes()[i]`.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, n: NodeId) -> bool {
        self.adjacency.contains_key(&n)
    }

    pub fn index_of(&self, n: NodeId) -> Option<usize> {
        self.nodes.binary_search(&n).ok()
    }

    /// Edges in ascending order with their signs.
    pub fn edges(&self) -> impl Iterator<Item = (Edge, Sign)> + '_ {
        self.edges.iter().map(|(&e, &s)| (e, s))
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains_key(&Edge::new(a, b))
    }

    pub fn edge_sign(&self, e: Edge) -> Option<Sign> {
        self.edges.get(&e).copied()
    }

    /// Neighbours of `n` in ascending order; empty for unknown nodes.
    pub fn neighbors(&self, n: NodeId) -> &[NodeId] {
        self.adjacency.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.neighbors(n).len()
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .copied()
            .filter(|&n| self.degree(n) == 1)
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.nodes.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for &m in self.neighbors(n) {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    /// Copy of the graph with the declared sign of `e` reversed.
    pub fn with_flipped_sign(&self, e: Edge) -> Result<Self> {
        let mut g = self.clone();
        let sign = g
            .edges
            .get_mut(&e)
            .ok_or_else(|| Error::input(format!("no edge {e}")))?;
        *sign = sign.flipped();
        Ok(g)
    }

    pub(crate) fn check_nodes<'a>(&self, nodes: impl IntoIterator<Item = &'a NodeId>) -> Result<()> {
        for &n in nodes {
            if !self.contains_node(n) {
                return Err(Error::input(format!("unknown node {n}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("graph JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    nodes: Vec<NodeId>,
    edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    u: NodeId,
    v: NodeId,
    sign: i64,
}

impl TryFrom<GraphFile> for NetworkGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        let edges = file
            .edges
            .into_iter()
            .map(|r| Ok((r.u, r.v, Sign::try_from(r.sign)?)))
            .collect::<Result<Vec<_>>>()?;
        NetworkGraph::new(file.nodes, edges)
    }
}

impl From<NetworkGraph> for GraphFile {
    fn from(g: NetworkGraph) -> Self {
        GraphFile {
            nodes: g.nodes.clone(),
            edges: g
                .edges()
                .map(|(e, s)| EdgeRecord {
                    u: e.u(),
                    v: e.v(),
                    sign: if s == Sign::Positive { 1 } else { -1 },
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(NetworkGraph::from_edges(&[(1, 1)]).is_err());
        assert!(NetworkGraph::from_edges(&[(1, 2), (2, 1)]).is_err());
        let undeclared = NetworkGraph::new([1, 2], [(1, 3, Sign::Positive)]);
        assert!(matches!(undeclared, Err(Error::Input(_))));
    }

    #[test]
    fn json_schema() {
        let text = r#"{"nodes":[3,1,2],"edges":[{"u":1,"v":2,"sign":1},{"u":3,"v":2,"sign":-1}]}"#;
        let g = NetworkGraph::from_json(text).unwrap();
        assert_eq!(g.nodes(), &[1, 2, 3]);
        assert_eq!(g.edge_sign(Edge::new(2, 3)), Some(Sign::Negative));
        let back = NetworkGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn json_rejects_unknown_fields_and_bad_signs() {
        let extra = r#"{"nodes":[1,2],"edges":[],"weights":[]}"#;
        assert!(NetworkGraph::from_json(extra).is_err());
        let extra_edge = r#"{"nodes":[1,2],"edges":[{"u":1,"v":2,"sign":1,"w":3}]}"#;
        assert!(NetworkGraph::from_json(extra_edge).is_err());
        let bad_sign = r#"{"nodes":[1,2],"edges":[{"u":1,"v":2,"sign":2}]}"#;
        assert!(NetworkGraph::from_json(bad_sign).is_err());
    }

    #[test]
    fn edge_keys() {
        assert_eq!("4-7".parse::<Edge>().unwrap(), Edge::new(7, 4));
        assert!("7-4".parse::<Edge>().is_err());
        assert!("4_7".parse::<Edge>().is_err());
        assert_eq!(Edge::new(7, 4).to_string(), "4-7");
    }

    #[test]
    fn connectivity() {
        let g = NetworkGraph::from_edges(&[(1, 2), (3, 4)]).unwrap();
        assert!(!g.is_connected());
        let g = NetworkGraph::from_edges(&[(1, 2), (2, 3)]).unwrap();
        assert!(g.is_connected());
        assert_eq!(g.leaves(), vec![1, 3]);
    }
}
