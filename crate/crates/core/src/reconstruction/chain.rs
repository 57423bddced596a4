//! Three-term recursion along a path of sites.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::graph::{Edge, NetworkGraph, NodeId};

use super::table::{Arrival, CoefficientStatus, CoefficientTable, Coefficients};

/// `sum_j E_j m_j^2`, the diagonal element `<n|H|n>`.
pub fn field_from_moduli(eigenvalues: &[f64], moduli: &[f64]) -> Result<f64> {
    check_vector(eigenvalues, moduli, Tolerances::default().norm)
        .map_err(|e| Error::input(e.to_string()))?;
    Ok(weighted_mean(eigenvalues, moduli))
}

pub(crate) fn weighted_mean(eigenvalues: &[f64], v: &[f64]) -> f64 {
    eigenvalues.iter().zip(v).map(|(e, x)| e * x * x).sum()
}

pub(crate) fn check_vector(eigenvalues: &[f64], v: &[f64], norm_tol: f64) -> Result<()> {
    if v.len() != eigenvalues.len() {
        return Err(Error::input(format!(
            "{} coefficients for {} eigenvalues",
            v.len(),
            eigenvalues.len()
        )));
    }
    let norm: f64 = v.iter().map(|x| x * x).sum();
    if (norm - 1.0).abs() > norm_tol {
        return Err(Error::InconsistentData(format!(
            "coefficient vector has squared norm {norm}, expected 1"
        )));
    }
    Ok(())
}

/// Result of walking the recursion from a seeded vector.
pub(crate) struct Walk {
    /// Vector of every visited node, start first.
    pub vectors: Vec<(NodeId, Vec<f64>)>,
    /// Field of every node the walk stepped out of.
    pub fields: Vec<(NodeId, f64)>,
    pub couplings: Vec<(Edge, f64)>,
}

/// Forces through `rest`, starting at `start` with vector `u` and the
/// already-known neighbour terms `(c, v)` of `start`.
///
/// Each step uses `(E - b_n) u_n = sum_k c_nk u_k`: the single unknown
/// neighbour's coupling is the norm of the residual, its sign comes from
/// the graph, and the neighbour's vector is the residual over the coupling.
pub(crate) fn propagate(
    eigenvalues: &[f64],
    g: &NetworkGraph,
    tol: &Tolerances,
    start: NodeId,
    u: Vec<f64>,
    mut known: Vec<(f64, Vec<f64>)>,
    rest: &[NodeId],
) -> Result<Walk> {
    let mut walk = Walk {
        vectors: vec![(start, u)],
        fields: Vec::new(),
        couplings: Vec::new(),
    };
    let mut cur = start;
    for &next in rest {
        let e = Edge::new(cur, next);
        let sign = g
            .edge_sign(e)
            .ok_or_else(|| Error::input(format!("path step {cur}-{next} is not an edge")))?;
        let u = &walk.vectors.last().expect("nonempty").1;
        let b = weighted_mean(eigenvalues, u);
        let r = residual(eigenvalues, b, u, &known);
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < tol.coupling {
            return Err(Error::NearZeroDivision {
                node: cur,
                magnitude: norm,
            });
        }
        let c = sign.value() * norm;
        let v: Vec<f64> = r.iter().map(|x| x / c).collect();
        known = vec![(c, u.clone())];
        walk.fields.push((cur, b));
        walk.couplings.push((e, c));
        walk.vectors.push((next, v));
        cur = next;
    }
    Ok(walk)
}

/// `(E_j - b) u_j - sum_k c_k v_k[j]`.
pub(crate) fn residual(eigenvalues: &[f64], b: f64, u: &[f64], known: &[(f64, Vec<f64>)]) -> Vec<f64> {
    eigenvalues
        .iter()
        .zip(u)
        .enumerate()
        .map(|(j, (e, x))| (e - b) * x - known.iter().map(|(c, v)| c * v[j]).sum::<f64>())
        .collect()
}

pub(crate) fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub fields: Vec<(NodeId, f64)>,
    pub couplings: Vec<(Edge, f64)>,
    pub table: CoefficientTable,
    /// RMS of the last node's equation, when the path ends at a leaf.
    pub terminal_residual: Option<f64>,
}

/// Gauge-true recursion from the reference along `path`, seeded with the
/// reference moduli taken as positive.
pub fn reconstruct_chain(
    eigenvalues: &[f64],
    reference_moduli: &[f64],
    path: &[NodeId],
    g: &NetworkGraph,
    tol: &Tolerances,
) -> Result<ChainOutput> {
    let (&first, rest) = path
        .split_first()
        .ok_or_else(|| Error::input("chain path is empty"))?;
    check_vector(eigenvalues, reference_moduli, tol.norm)?;
    let walk = propagate(eigenvalues, g, tol, first, reference_moduli.to_vec(), Vec::new(), rest)?;
    let mut fields = walk.fields;
    let (last, u_last) = walk.vectors.last().expect("nonempty").clone();
    let b_last = weighted_mean(eigenvalues, &u_last);
    fields.push((last, b_last));

    let terminal_residual = match walk.couplings.last() {
        Some(&(_, c)) if g.degree(last) == 1 => {
            let prev = &walk.vectors[walk.vectors.len() - 2].1;
            Some(rms(&residual(eigenvalues, b_last, &u_last, &[(c, prev.clone())])))
        }
        _ => None,
    };

    let mut table = CoefficientTable::new();
    for (n, v) in walk.vectors {
        table.insert(n, Coefficients::new(v, CoefficientStatus::SignedTrue));
    }
    Ok(ChainOutput {
        fields,
        couplings: walk.couplings,
        table,
        terminal_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeelOutput {
    pub fields: Vec<(NodeId, f64)>,
    pub couplings: Vec<(Edge, f64)>,
    /// Family vectors on `path`, plus the terminal's vector as an arrival.
    pub table: CoefficientTable,
}

/// Recursion from leaf `path[0]` toward `terminal`, seeded with the leaf's
/// moduli. All vectors belong to the family named after the leaf; every
/// quantity the recursion extracts is a sum of squares, so couplings and
/// fields come out exact.
pub fn peel_branch(
    eigenvalues: &[f64],
    leaf_moduli: &[f64],
    path: &[NodeId],
    terminal: NodeId,
    g: &NetworkGraph,
    tol: &Tolerances,
) -> Result<PeelOutput> {
    let (&leaf, inner) = path
        .split_first()
        .ok_or_else(|| Error::input("peel path is empty"))?;
    check_vector(eigenvalues, leaf_moduli, tol.norm)?;
    let mut rest = inner.to_vec();
    rest.push(terminal);
    let walk = propagate(eigenvalues, g, tol, leaf, leaf_moduli.to_vec(), Vec::new(), &rest)?;
    Ok(PeelOutput {
        fields: walk.fields,
        couplings: walk.couplings,
        table: family_table(walk.vectors, CoefficientStatus::PseudoSigned { family: leaf }),
    })
}

/// Entries for all but the last vector; the last becomes an arrival.
pub(crate) fn family_table(mut vectors: Vec<(NodeId, Vec<f64>)>, status: CoefficientStatus) -> CoefficientTable {
    let mut table = CoefficientTable::new();
    let (end, v_end) = vectors.pop().expect("walk reaches its terminal");
    let from = vectors.last().map(|(n, _)| *n).unwrap_or(end);
    for (n, v) in vectors {
        table.insert(n, Coefficients::new(v, status));
    }
    table.add_arrival(
        end,
        Arrival {
            from,
            coefficients: Coefficients::new(v_end, status),
        },
    );
    table
}
