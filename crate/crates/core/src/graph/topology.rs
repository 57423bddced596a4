use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{NetworkGraph, NodeId};

/// Coarse topology of a graph, as far as the tomography scheme cares.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyClass {
    Path,
    Tree,
    /// Exactly one cycle, listed as a closed walk starting at its smallest
    /// label and heading to the smaller of that node's two cycle neighbours.
    Unicyclic { cycle: Vec<NodeId> },
    /// Connected with `excess` = |E| - |V| + 1 independent cycles (≥ 2).
    MultiCycle { excess: usize },
    Disconnected,
}

impl TopologyClass {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyClass::Path => "path",
            TopologyClass::Tree => "tree",
            TopologyClass::Unicyclic { .. } => "unicyclic",
            TopologyClass::MultiCycle { .. } => "multicycle",
            TopologyClass::Disconnected => "disconnected",
        }
    }
}

pub fn classify_topology(g: &NetworkGraph) -> TopologyClass {
    if !g.is_connected() {
        return TopologyClass::Disconnected;
    }
    let (n, e) = (g.node_count(), g.edge_count());
    if e + 1 == n {
        if g.nodes().iter().all(|&v| g.degree(v) <= 2) {
            TopologyClass::Path
        } else {
            TopologyClass::Tree
        }
    } else if e == n {
        TopologyClass::Unicyclic {
            cycle: unique_cycle(g),
        }
    } else {
        TopologyClass::MultiCycle { excess: e + 1 - n }
    }
}

/// Core left after repeatedly deleting degree-1 nodes.
pub(crate) fn two_core(g: &NetworkGraph) -> BTreeSet<NodeId> {
    let mut alive: BTreeSet<NodeId> = g.nodes().iter().copied().collect();
    let mut degree: std::collections::BTreeMap<NodeId, usize> =
        g.nodes().iter().map(|&n| (n, g.degree(n))).collect();
    let mut stack: Vec<NodeId> = g.nodes().iter().copied().filter(|&n| degree[&n] <= 1).collect();
    while let Some(n) = stack.pop() {
        if !alive.remove(&n) {
            continue;
        }
        for &m in g.neighbors(n) {
            if alive.contains(&m) {
                let d = degree.get_mut(&m).expect("node");
                *d -= 1;
                if *d == 1 {
                    stack.push(m);
                }
            }
        }
    }
    alive
}

fn unique_cycle(g: &NetworkGraph) -> Vec<NodeId> {
    let core = two_core(g);
    let start = *core.iter().next().expect("unicyclic graph has a cycle");
    let on_cycle = |n: &NodeId| core.contains(n);
    let mut cycle = vec![start];
    let mut prev = start;
    let mut cur = *g
        .neighbors(start)
        .iter()
        .find(|m| on_cycle(m))
        .expect("cycle node has cycle neighbours");
    while cur != start {
        cycle.push(cur);
        let next = *g
            .neighbors(cur)
            .iter()
            .find(|&&m| on_cycle(&m) && m != prev)
            .expect("cycle continues");
        prev = cur;
        cur = next;
    }
    cycle
}

/// Verdict of the estimability rule: connected and no more edges than sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimability {
    pub estimable: bool,
    pub reason: String,
}

pub fn is_estimable(g: &NetworkGraph) -> Estimability {
    let (n, e) = (g.node_count(), g.edge_count());
    let (estimable, reason) = if n == 0 {
        (false, "empty graph".to_string())
    } else if !g.is_connected() {
        (false, "disconnected".to_string())
    } else if e > n {
        (false, format!("more edges than sites ({e} edges, {n} sites)"))
    } else {
        (true, format!("connected with {e} edges on {n} sites"))
    };
    Estimability { estimable, reason }
}
