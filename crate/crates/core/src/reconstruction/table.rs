use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// How far a stored coefficient vector can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CoefficientStatus {
    /// Consistent with the reference gauge.
    SignedTrue,
    /// Equal to the gauge-true vector up to one unknown sign per `j`, shared
    /// by every vector of the same family (named after its seed leaf).
    PseudoSigned { family: NodeId },
    ModulusOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub values: Vec<f64>,
    #[serde(flatten)]
    pub status: CoefficientStatus,
}

impl Coefficients {
    pub fn new(values: Vec<f64>, status: CoefficientStatus) -> Self {
        Coefficients { values, status }
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.abs()).collect()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }
}

/// A vector for `node` computed from the far side of the edge `from`-`node`,
/// before it has been reconciled with the node's own entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub from: NodeId,
    pub coefficients: Coefficients,
}

/// Per-node `<E_j|n>` vectors produced during reconstruction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    entries: BTreeMap<NodeId, Coefficients>,
    arrivals: BTreeMap<NodeId, Vec<Arrival>>,
}

impl CoefficientTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: NodeId) -> Option<&Coefficients> {
        self.entries.get(&n)
    }

    pub fn insert(&mut self, n: NodeId, c: Coefficients) {
        self.entries.insert(n, c);
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, &Coefficients)> {
        self.entries.iter().map(|(&n, c)| (n, c))
    }

    pub fn arrivals(&self, n: NodeId) -> &[Arrival] {
        self.arrivals.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn add_arrival(&mut self, n: NodeId, a: Arrival) {
        self.arrivals.entry(n).or_default().push(a);
    }

    /// Nodes that have unmerged arrivals.
    pub fn arrival_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.arrivals
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&n, _)| n)
    }

    /// The node's entry, or failing that its first arrival.
    pub fn any_vector(&self, n: NodeId) -> Option<&Coefficients> {
        self.get(n)
            .or_else(|| self.arrivals(n).first().map(|a| &a.coefficients))
    }

    /// Moves `other`'s entries and arrivals into `self`.
    pub fn absorb(&mut self, other: CoefficientTable) {
        self.entries.extend(other.entries);
        for (n, list) in other.arrivals {
            self.arrivals.entry(n).or_default().extend(list);
        }
    }

    /// Largest `|sum_j v_j^2 - 1|` over stored entries.
    pub fn normalization_error(&self) -> f64 {
        self.entries
            .values()
            .map(|c| (c.norm_squared() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Promotes the first arrival at `n` to the node's entry, if it has none.
    pub(crate) fn promote_arrival(&mut self, n: NodeId) -> Result<()> {
        if self.entries.contains_key(&n) {
            return Ok(());
        }
        let list = self.arrivals.get_mut(&n).filter(|v| !v.is_empty()).ok_or_else(|| {
            Error::InconsistentData(format!("no coefficients reach node {n}"))
        })?;
        list.sort_by_key(|a| (a.coefficients.status, a.from));
        let first = list.remove(0);
        self.entries.insert(n, first.coefficients);
        Ok(())
    }

    fn rewrite_family(&mut self, family: NodeId, signs: &[f64], status: CoefficientStatus) {
        let target = CoefficientStatus::PseudoSigned { family };
        let all = self
            .entries
            .values_mut()
            .chain(self.arrivals.values_mut().flatten().map(|a| &mut a.coefficients));
        for c in all.filter(|c| c.status == target) {
            for (v, s) in c.values.iter_mut().zip(signs) {
                *v *= s;
            }
            c.status = status;
        }
    }
}

/// Outcome of merging one pseudo-signed family into a junction's entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SignResolution {
    /// `s_j` applied to every vector of the family.
    pub signs: Vec<f64>,
    /// RMS of `|entry| - |arrival|` at the junction.
    pub modulus_mismatch: f64,
}

/// Aligns family `family` with the entry stored at `junction`.
///
/// The family must reach the junction as an arrival. Per `j`, the sign
/// `s_j = sign(entry_j * arrival_j)` is applied to every vector of the family,
/// which then takes on the entry's status; the arrival is consumed.
pub fn resolve_family_signs(
    table: &CoefficientTable,
    junction: NodeId,
    family: NodeId,
    overlap_tol: f64,
) -> Result<(CoefficientTable, SignResolution)> {
    let fam = CoefficientStatus::PseudoSigned { family };
    let primary = table
        .get(junction)
        .ok_or_else(|| Error::input(format!("junction {junction} has no coefficients")))?;
    if primary.status == fam || primary.status == CoefficientStatus::ModulusOnly {
        return Err(Error::input(format!(
            "junction {junction} has no signed coefficients independent of family {family}"
        )));
    }
    let pos = table
        .arrivals(junction)
        .iter()
        .position(|a| a.coefficients.status == fam)
        .ok_or_else(|| Error::input(format!("family {family} does not reach junction {junction}")))?;
    let arrival = &table.arrivals(junction)[pos].coefficients;
    if arrival.values.len() != primary.values.len() {
        return Err(Error::input("coefficient vectors differ in length"));
    }

    let ambiguous: Vec<usize> = primary
        .values
        .iter()
        .zip(&arrival.values)
        .enumerate()
        .filter(|(_, (p, a))| p.abs() < overlap_tol || a.abs() < overlap_tol)
        .map(|(j, _)| j)
        .collect();
    if !ambiguous.is_empty() {
        return Err(Error::SignAmbiguity {
            junction,
            indices: ambiguous,
        });
    }
    let signs: Vec<f64> = primary
        .values
        .iter()
        .zip(&arrival.values)
        .map(|(p, a)| if p * a < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let mismatch = (primary
        .values
        .iter()
        .zip(&arrival.values)
        .map(|(p, a)| (p.abs() - a.abs()).powi(2))
        .sum::<f64>()
        / signs.len() as f64)
        .sqrt();

    let status = primary.status;
    let mut out = table.clone();
    out.arrivals.get_mut(&junction).expect("arrival exists").remove(pos);
    out.rewrite_family(family, &signs, status);
    Ok((
        out,
        SignResolution {
            signs,
            modulus_mismatch: mismatch,
        },
    ))
}
