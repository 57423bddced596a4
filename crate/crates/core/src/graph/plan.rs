//! Which sites to excite, and in which order the reconstruction visits them.
//!
//! The conservative plan accesses every branch end and every loop site that
//! has no branch attached. Reconstruction then runs
//!
//! 1. the gauge-true recursion along `reference_path`,
//! 2. one peel per accessed leaf, toward its first junction,
//! 3. link segments that carry merged families from an inner junction to
//!    the next junction (only trees with several junctions have them),
//! 4. the cycle moment system, when the graph has a loop.
//!
//! The aggressive plan (trees only, experimental) replaces the subtree of one
//! child per junction by a forward continuation of the gauge-true family,
//! which saves one access site.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::topology::{classify_topology, is_estimable, TopologyClass};
use super::{NetworkGraph, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    Conservative,
    /// Drops leaves by sign-resolving peeled families at junctions.
    /// Not part of the published access rule.
    Aggressive,
}

/// Peel from an accessed leaf; `path` runs from the leaf inward and stops one
/// node before `terminal` (the first junction or cycle attachment).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchPeel {
    pub leaf: NodeId,
    pub path: Vec<NodeId>,
    pub terminal: NodeId,
}

/// Continuation from a junction through the degree-2 nodes in `path`
/// (junction excluded) to `terminal`. A forward segment that runs out at a
/// leaf has no terminal; its last path node is that leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSegment {
    pub junction: NodeId,
    pub path: Vec<NodeId>,
    pub terminal: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclePlan {
    pub cycle: Vec<NodeId>,
    pub attachments: BTreeSet<NodeId>,
    pub measured: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessPlan {
    pub mode: PlanMode,
    pub reference: NodeId,
    pub access_set: BTreeSet<NodeId>,
    pub reference_path: Vec<NodeId>,
    pub peel_schedule: Vec<BranchPeel>,
    pub link_schedule: Vec<LinkSegment>,
    pub forward_schedule: Vec<LinkSegment>,
    pub cycle_plan: Option<CyclePlan>,
}

impl AccessPlan {
    fn single(reference: NodeId, mode: PlanMode) -> Self {
        AccessPlan {
            mode,
            reference,
            access_set: BTreeSet::from([reference]),
            reference_path: vec![reference],
            peel_schedule: Vec::new(),
            link_schedule: Vec::new(),
            forward_schedule: Vec::new(),
            cycle_plan: None,
        }
    }

    /// Checks the structural invariants against `g`.
    pub fn validate(&self, g: &NetworkGraph) -> Result<()> {
        let fail = |m: String| Err(Error::InconsistentData(format!("access plan: {m}")));
        if !self.access_set.contains(&self.reference) {
            return fail("reference not accessed".into());
        }
        for p in &self.peel_schedule {
            if !self.access_set.contains(&p.leaf) {
                return fail(format!("peel leaf {} not accessed", p.leaf));
            }
        }
        if let Some(cp) = &self.cycle_plan {
            for &n in &cp.cycle {
                if g.degree(n) == 2 && !self.access_set.contains(&n) {
                    return fail(format!("degree-2 cycle node {n} not accessed"));
                }
            }
        }

        let mut on_paths = BTreeSet::new();
        let segment_paths = self
            .peel_schedule
            .iter()
            .map(|p| &p.path)
            .chain(self.link_schedule.iter().map(|l| &l.path))
            .chain(self.forward_schedule.iter().map(|l| &l.path));
        for path in std::iter::once(&self.reference_path).chain(segment_paths) {
            for &n in path {
                if !on_paths.insert(n) {
                    return fail(format!("node {n} lies on two paths"));
                }
            }
        }
        let mut covered = on_paths;
        covered.extend(self.peel_schedule.iter().map(|p| p.terminal));
        covered.extend(
            self.link_schedule
                .iter()
                .chain(&self.forward_schedule)
                .flat_map(|l| std::iter::once(l.junction).chain(l.terminal)),
        );
        if let Some(cp) = &self.cycle_plan {
            covered.extend(cp.cycle.iter().copied());
        }
        let all: BTreeSet<NodeId> = g.nodes().iter().copied().collect();
        if covered != all {
            return fail(format!(
                "nodes not covered: {:?}",
                all.difference(&covered).collect::<Vec<_>>()
            ));
        }
        Ok(())
    }
}

/// The published access rule: every branch end, plus every loop site
/// without a branch.
pub fn compute_access_plan(g: &NetworkGraph, reference: Option<NodeId>) -> Result<AccessPlan> {
    plan(g, reference, PlanMode::Conservative)
}

/// Experimental plan that accesses one leaf fewer on trees with a junction.
pub fn compute_aggressive_plan(g: &NetworkGraph, reference: Option<NodeId>) -> Result<AccessPlan> {
    plan(g, reference, PlanMode::Aggressive)
}

pub(crate) fn plan(g: &NetworkGraph, reference: Option<NodeId>, mode: PlanMode) -> Result<AccessPlan> {
    let verdict = is_estimable(g);
    if !verdict.estimable {
        return Err(Error::Capability(format!("graph is not estimable: {}", verdict.reason)));
    }
    if let Some(r) = reference {
        g.check_nodes([&r])?;
    }
    if g.node_count() == 1 {
        return Ok(AccessPlan::single(g.nodes()[0], mode));
    }
    let plan = match classify_topology(g) {
        TopologyClass::Path | TopologyClass::Tree => tree_plan(g, reference, mode)?,
        TopologyClass::Unicyclic { cycle } => unicyclic_plan(g, reference, cycle)?,
        TopologyClass::MultiCycle { .. } | TopologyClass::Disconnected => {
            unreachable!("estimable graphs are trees or unicyclic")
        }
    };
    debug_assert!(plan.validate(g).is_ok(), "{:?}", plan.validate(g));
    Ok(plan)
}

fn leaf_reference(g: &NetworkGraph, reference: Option<NodeId>) -> Result<NodeId> {
    match reference {
        Some(r) if g.degree(r) == 1 => Ok(r),
        Some(r) => Err(Error::input(format!(
            "reference {r} is not a leaf (degree {})",
            g.degree(r)
        ))),
        None => Ok(g.leaves()[0]),
    }
}

/// Nodes from `cur` onward, stepping away from `prev` while the current node
/// has degree 2. The last element is the first node of degree ≠ 2.
fn walk(g: &NetworkGraph, mut prev: NodeId, mut cur: NodeId) -> Vec<NodeId> {
    let mut out = vec![cur];
    while g.degree(cur) == 2 {
        let next = g
            .neighbors(cur)
            .iter()
            .copied()
            .find(|&m| m != prev)
            .expect("degree-2 node has a second neighbour");
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

fn reference_path(g: &NetworkGraph, reference: NodeId) -> Vec<NodeId> {
    let mut path = vec![reference];
    path.extend(walk(g, reference, g.neighbors(reference)[0]));
    path
}

#[derive(Default)]
struct Segments {
    peels: Vec<BranchPeel>,
    links: Vec<LinkSegment>,
}

/// Segments of the subtree entered from key node `key` through neighbour
/// `first`, in dependency order (children before the link that leaves them).
fn descend(g: &NetworkGraph, key: NodeId, first: NodeId, out: &mut Segments) {
    let seg = walk(g, key, first);
    let last = *seg.last().expect("walk is nonempty");
    if g.degree(last) == 1 {
        out.peels.push(BranchPeel {
            leaf: last,
            path: seg.iter().rev().copied().collect(),
            terminal: key,
        });
        return;
    }
    let came_from = if seg.len() >= 2 { seg[seg.len() - 2] } else { key };
    for &w in g.neighbors(last) {
        if w != came_from {
            descend(g, last, w, out);
        }
    }
    out.links.push(LinkSegment {
        junction: last,
        path: seg[..seg.len() - 1].iter().rev().copied().collect(),
        terminal: Some(key),
    });
}

fn tree_plan(g: &NetworkGraph, reference: Option<NodeId>, mode: PlanMode) -> Result<AccessPlan> {
    let reference = leaf_reference(g, reference)?;
    let ref_path = reference_path(g, reference);
    let mut plan = AccessPlan::single(reference, mode);
    plan.reference_path = ref_path.clone();
    let root = *ref_path.last().expect("nonempty");
    if g.degree(root) == 1 {
        return Ok(plan);
    }

    let mut segs = Segments::default();
    let mut junction = root;
    let mut incoming = ref_path[ref_path.len() - 2];
    loop {
        let children: Vec<NodeId> =
            g.neighbors(junction).iter().copied().filter(|&w| w != incoming).collect();
        let forward = match mode {
            PlanMode::Conservative => None,
            PlanMode::Aggressive => children.iter().copied().max(),
        };
        for &w in &children {
            if Some(w) != forward {
                descend(g, junction, w, &mut segs);
            }
        }
        let Some(f) = forward else { break };
        let seg = walk(g, junction, f);
        let last = *seg.last().expect("nonempty");
        if g.degree(last) == 1 {
            plan.forward_schedule.push(LinkSegment {
                junction,
                path: seg,
                terminal: None,
            });
            break;
        }
        incoming = if seg.len() >= 2 { seg[seg.len() - 2] } else { junction };
        plan.forward_schedule.push(LinkSegment {
            junction,
            path: seg[..seg.len() - 1].to_vec(),
            terminal: Some(last),
        });
        junction = last;
    }

    finish(plan, segs, None)
}

fn unicyclic_plan(g: &NetworkGraph, reference: Option<NodeId>, cycle: Vec<NodeId>) -> Result<AccessPlan> {
    let on_cycle: BTreeSet<NodeId> = cycle.iter().copied().collect();
    let attachments: BTreeSet<NodeId> =
        cycle.iter().copied().filter(|&n| g.degree(n) >= 3).collect();
    let measured: BTreeSet<NodeId> = cycle.iter().copied().filter(|&n| g.degree(n) == 2).collect();
    let cycle_plan = CyclePlan {
        cycle,
        attachments: attachments.clone(),
        measured: measured.clone(),
    };

    if g.leaves().is_empty() {
        let reference = reference.unwrap_or(g.nodes()[0]);
        let mut plan = AccessPlan::single(reference, PlanMode::Conservative);
        plan.access_set = measured;
        plan.cycle_plan = Some(cycle_plan);
        return Ok(plan);
    }

    let reference = leaf_reference(g, reference)?;
    let mut segs = Segments::default();
    for &a in &attachments {
        for &w in g.neighbors(a) {
            if !on_cycle.contains(&w) {
                descend(g, a, w, &mut segs);
            }
        }
    }
    let pos = segs
        .peels
        .iter()
        .position(|p| p.leaf == reference)
        .expect("every leaf heads a peel");
    let ref_peel = segs.peels.remove(pos);
    let mut plan = AccessPlan::single(reference, PlanMode::Conservative);
    plan.reference_path = ref_peel.path;
    plan.reference_path.push(ref_peel.terminal);
    finish(plan, segs, Some(cycle_plan))
}

fn finish(mut plan: AccessPlan, mut segs: Segments, cycle_plan: Option<CyclePlan>) -> Result<AccessPlan> {
    segs.peels.sort_by_key(|p| p.leaf);
    plan.access_set.extend(segs.peels.iter().map(|p| p.leaf));
    if let Some(cp) = &cycle_plan {
        plan.access_set.extend(cp.measured.iter().copied());
    }
    plan.peel_schedule = segs.peels;
    plan.link_schedule = segs.links;
    plan.cycle_plan = cycle_plan;
    Ok(plan)
}
