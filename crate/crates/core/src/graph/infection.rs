use std::collections::{BTreeMap, BTreeSet, VecDeque};

use itertools::Itertools;

use super::{NetworkGraph, NodeId};
use crate::error::{Error, Result};

/// Default node cap for the exhaustive search in [`minimum_infecting_sets`].
pub const DEFAULT_MAX_NODES: usize = 16;

/// Fixed point of the infection rule: an infected node infects its neighbour
/// `u` iff `u` is its only healthy neighbour.
///
/// The closure is unique: infection never shrinks a healthy set, so a node
/// that can force stays able to force until it does.
pub fn infection_closure(g: &NetworkGraph, seed: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>> {
    g.check_nodes(seed)?;
    let mut infected = seed.clone();
    let mut healthy_count: BTreeMap<NodeId, usize> = g
        .nodes()
        .iter()
        .map(|&n| {
            let h = g.neighbors(n).iter().filter(|m| !infected.contains(m)).count();
            (n, h)
        })
        .collect();

    let mut queue: VecDeque<NodeId> = infected.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        if healthy_count[&n] != 1 {
            continue;
        }
        let target = g
            .neighbors(n)
            .iter()
            .copied()
            .find(|m| !infected.contains(m))
            .expect("count says one healthy neighbour");
        infected.insert(target);
        queue.push_back(target);
        for &m in g.neighbors(target) {
            let c = healthy_count.get_mut(&m).expect("node");
            *c -= 1;
            if *c == 1 && infected.contains(&m) {
                queue.push_back(m);
            }
        }
    }
    Ok(infected)
}

pub fn is_infecting(g: &NetworkGraph, seed: &BTreeSet<NodeId>) -> Result<bool> {
    Ok(infection_closure(g, seed)?.len() == g.node_count())
}

/// All infecting seed sets of minimum size, in lexicographic order of their
/// sorted members. Exhaustive; refuses graphs with more than `max_nodes` nodes.
pub fn minimum_infecting_sets(g: &NetworkGraph, max_nodes: usize) -> Result<Vec<BTreeSet<NodeId>>> {
    let n = g.node_count();
    if n > max_nodes {
        return Err(Error::Capability(format!(
            "exhaustive infecting-set search is capped at {max_nodes} nodes, graph has {n}"
        )));
    }
    for size in 0..=n {
        let found: Vec<BTreeSet<NodeId>> = g
            .nodes()
            .iter()
            .copied()
            .combinations(size)
            .map(|c| c.into_iter().collect::<BTreeSet<_>>())
            .filter(|s| is_infecting(g, s).expect("seed drawn from graph"))
            .collect();
        if !found.is_empty() {
            return Ok(found);
        }
    }
    Ok(Vec::new())
}
