//! Test-side oracles, written independently of the library internals.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use gateway_tomo::graph::{Edge, NetworkGraph, NodeId, Sign};
use gateway_tomo::spectral::HamiltonianParams;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labelled tree on 1..=n: attach each node to an earlier one, then
/// shuffle labels.
pub fn random_tree_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let mut labels: Vec<NodeId> = (1..=n as NodeId).collect();
    labels.shuffle(rng);
    (1..n)
        .map(|i| {
            let parent = rng.random_range(0..i);
            (labels[parent], labels[i])
        })
        .collect()
}

pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> NetworkGraph {
    if n == 1 {
        return NetworkGraph::new([1], []).unwrap();
    }
    NetworkGraph::from_edges(&random_tree_edges(n, rng)).unwrap()
}

/// Random tree plus one extra edge between non-adjacent nodes.
pub fn random_unicyclic(n: usize, rng: &mut ChaCha8Rng) -> NetworkGraph {
    assert!(n >= 3);
    let mut edges = random_tree_edges(n, rng);
    let present: BTreeSet<(NodeId, NodeId)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut candidates = Vec::new();
    for a in 1..=n as NodeId {
        for b in a + 1..=n as NodeId {
            if !present.contains(&(a, b)) {
                candidates.push((a, b));
            }
        }
    }
    edges.push(*candidates.choose(rng).unwrap());
    NetworkGraph::from_edges(&edges).unwrap()
}

pub fn random_path_order(n: usize, rng: &mut ChaCha8Rng) -> NetworkGraph {
    let _ = rng;
    gateway_tomo::topologies::path(n as NodeId)
}

/// Copy of `base` with random edge signs, and parameters with fields in
/// [-1, 1] (pairwise separated by at least `min_field_gap`) and coupling
/// magnitudes in [0.2, 1.5].
pub fn planted(base: &NetworkGraph, rng: &mut ChaCha8Rng) -> (NetworkGraph, HamiltonianParams) {
    planted_with(base, rng, 0.0, true)
}

pub fn planted_with(
    base: &NetworkGraph,
    rng: &mut ChaCha8Rng,
    min_field_gap: f64,
    random_signs: bool,
) -> (NetworkGraph, HamiltonianParams) {
    let mut edges = Vec::new();
    let mut couplings = BTreeMap::new();
    for (e, _) in base.edges() {
        let mag: f64 = rng.random_range(0.2..1.5);
        let sign = if random_signs && rng.random_bool(0.5) {
            Sign::Negative
        } else {
            Sign::Positive
        };
        edges.push((e.u(), e.v(), sign));
        couplings.insert(e, sign.value() * mag);
    }
    let mut fields: BTreeMap<NodeId, f64> = BTreeMap::new();
    for &n in base.nodes() {
        loop {
            let b: f64 = rng.random_range(-1.0..1.0);
            if fields.values().all(|x| (x - b).abs() >= min_field_gap) {
                fields.insert(n, b);
                break;
            }
        }
    }
    let g = NetworkGraph::new(base.nodes().iter().copied(), edges).unwrap();
    (g, HamiltonianParams::new(fields, couplings))
}

/// `|est - true| / max(|true|, 1e-3 * max |true|)`, maximised over all
/// parameters; a missing estimate counts as infinite.
pub fn relative_error(est: &HamiltonianParams, truth: &HamiltonianParams) -> f64 {
    let scale = truth
        .fields
        .values()
        .chain(truth.couplings.values())
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    let floor = 1e-3 * scale;
    let mut worst: f64 = 0.0;
    for (n, b) in &truth.fields {
        let e = est.fields.get(n).copied().unwrap_or(f64::INFINITY);
        worst = worst.max((e - b).abs() / b.abs().max(floor));
    }
    for (k, c) in &truth.couplings {
        let e = est.couplings.get(k).copied().unwrap_or(f64::INFINITY);
        worst = worst.max((e - c).abs() / c.abs().max(floor));
    }
    worst
}

/// Brute-force infection: sweep all infected nodes until nothing changes.
pub fn brute_force_closure(nodes: &[NodeId], edges: &[Edge], seed: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    let mut infected = seed.clone();
    loop {
        let mut changed = false;
        for &v in nodes {
            if !infected.contains(&v) {
                continue;
            }
            let healthy: Vec<NodeId> = edges
                .iter()
                .filter_map(|e| e.other(v))
                .filter(|u| !infected.contains(u))
                .collect();
            if healthy.len() == 1 {
                infected.insert(healthy[0]);
                changed = true;
            }
        }
        if !changed {
            return infected;
        }
    }
}

pub fn connected(nodes: &[NodeId], edges: &[Edge]) -> bool {
    let Some(&start) = nodes.first() else { return true };
    let mut seen = BTreeSet::from([start]);
    let mut frontier = vec![start];
    while let Some(v) = frontier.pop() {
        for e in edges {
            if let Some(u) = e.other(v) {
                if seen.insert(u) {
                    frontier.push(u);
                }
            }
        }
    }
    seen.len() == nodes.len()
}

/// Every connected labelled graph on 1..=n.
pub fn connected_graphs(n: usize) -> Vec<NetworkGraph> {
    let nodes: Vec<NodeId> = (1..=n as NodeId).collect();
    let pairs: Vec<Edge> = (1..=n as NodeId)
        .flat_map(|a| (a + 1..=n as NodeId).map(move |b| Edge::new(a, b)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<Edge> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, e)| *e)
            .collect();
        if connected(&nodes, &edges) {
            let g = NetworkGraph::new(
                nodes.iter().copied(),
                edges.iter().map(|e| (e.u(), e.v(), Sign::Positive)),
            )
            .unwrap();
            out.push(g);
        }
    }
    out
}

/// Cyclic Jacobi eigenvalues of a dense symmetric matrix, ascending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense matrix written directly from the parameter maps.
pub fn dense_hamiltonian(g: &NetworkGraph, p: &HamiltonianParams) -> Vec<Vec<f64>> {
    let idx: BTreeMap<NodeId, usize> = g.nodes().iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let n = g.node_count();
    let mut h = vec![vec![0.0; n]; n];
    for (node, b) in &p.fields {
        h[idx[node]][idx[node]] = *b;
    }
    for (e, c) in &p.couplings {
        h[idx[&e.u()]][idx[&e.v()]] = *c;
        h[idx[&e.v()]][idx[&e.u()]] = *c;
    }
    h
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
