//! Loop couplings from spectral moments.
//!
//! For every loop site `n`, the second central moment of its eigenbasis
//! weights equals the sum of its squared couplings:
//! `sum_j (E_j - b_n)^2 m_nj^2 = sum_k c_nk^2`. Subtracting the known branch
//! couplings leaves one linear equation per site in the unknowns
//! `x_e = c_e^2` of the loop edges. On an even loop these equations are
//! dependent (their alternating sum vanishes), so the third central moment
//! `sum_j (E_j - b_n)^3 m_nj^2 = sum_k c_nk^2 (b_k - b_n)`, which holds when
//! no triangle passes through `n`, supplies the missing rank.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{spectral_range, Tolerances};
use crate::error::{Error, Result};
use crate::graph::{CyclePlan, Edge, NetworkGraph, NodeId};
use crate::measurement::SpectralMeasurement;

use super::chain::weighted_mean;
use super::table::CoefficientTable;
use super::PartialParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    /// Ratio of extreme singular values of the (scaled) moment system.
    pub condition: f64,
    /// Moment orders that contributed rows.
    pub moments: Vec<u32>,
    pub rows: usize,
    /// Smallest solved `c_e^2` before clamping; negative means slack was used.
    pub min_squared_coupling: f64,
    pub clamped: Vec<String>,
    pub residual_rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleSolution {
    /// `c_e^2` for each loop edge.
    pub squared: BTreeMap<Edge, f64>,
    /// Fields of loop sites computed along the way.
    pub fields: BTreeMap<NodeId, f64>,
    pub augmented: bool,
    pub diagnostics: CycleDiagnostics,
}

/// Solves the moment system for the squared loop couplings.
///
/// Every loop site needs moduli (measured or reconstructed), and every
/// branch coupling at a loop site, with the field at its far end, must be
/// in `known`.
pub fn solve_cycle_moments(
    plan: &CyclePlan,
    table: &CoefficientTable,
    meas: &SpectralMeasurement,
    g: &NetworkGraph,
    known: &PartialParams,
    tol: &Tolerances,
) -> Result<CycleSolution> {
    let cycle = &plan.cycle;
    let len = cycle.len();
    if len < 3 {
        return Err(Error::input("a loop needs at least three sites"));
    }
    let on_cycle: BTreeSet<NodeId> = cycle.iter().copied().collect();
    let eig = &meas.eigenvalues;
    let range = spectral_range(eig);

    let mut fields = BTreeMap::new();
    let mut moduli = Vec::with_capacity(len);
    for &n in cycle {
        let m = match meas.moduli.get(&n) {
            Some(m) => m.clone(),
            None => table
                .any_vector(n)
                .map(|c| c.moduli())
                .ok_or_else(|| Error::input(format!("loop site {n} is neither measured nor reconstructed")))?,
        };
        let b = known
            .fields
            .get(&n)
            .copied()
            .unwrap_or_else(|| weighted_mean(eig, &m));
        fields.insert(n, b);
        moduli.push(m);
    }

    let edges: Vec<Edge> = (0..len).map(|i| Edge::new(cycle[i], cycle[(i + 1) % len])).collect();
    let augmented = len.is_multiple_of(2);
    let rows = if augmented { 2 * len } else { len };
    let mut a = DMatrix::zeros(rows, len);
    let mut rhs = DVector::zeros(rows);
    let scale3 = if range > 0.0 { 1.0 / range } else { 1.0 };

    for (i, &n) in cycle.iter().enumerate() {
        let b_n = fields[&n];
        let (mut s2, mut s3) = (0.0, 0.0);
        for (e, m) in eig.iter().zip(&moduli[i]) {
            let d = e - b_n;
            s2 += d * d * m * m;
            s3 += d * d * d * m * m;
        }
        let (mut t2, mut t3) = (0.0, 0.0);
        for &k in g.neighbors(n).iter().filter(|k| !on_cycle.contains(k)) {
            let c = known.couplings.get(&Edge::new(n, k)).copied().ok_or_else(|| {
                Error::InconsistentData(format!("branch coupling {n}-{k} unknown when solving the loop"))
            })?;
            let b_k = known.fields.get(&k).copied().ok_or_else(|| {
                Error::InconsistentData(format!("field of {k} unknown when solving the loop"))
            })?;
            t2 += c * c;
            t3 += c * c * (b_k - b_n);
        }
        let (prev, next) = ((i + len - 1) % len, i);
        a[(i, prev)] = 1.0;
        a[(i, next)] = 1.0;
        rhs[i] = s2 - t2;
        if augmented {
            let r = len + i;
            let b_prev = fields[&cycle[(i + len - 1) % len]];
            let b_next = fields[&cycle[(i + 1) % len]];
            a[(r, prev)] = (b_prev - b_n) * scale3;
            a[(r, next)] = (b_next - b_n) * scale3;
            rhs[r] = (s3 - t3) * scale3;
        }
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition.is_nan() || condition > tol.max_condition {
        return Err(if augmented {
            Error::RankDeficientUnresolvable { condition }
        } else {
            Error::IllConditioned { condition }
        });
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Numeric(format!("loop least squares: {e}")))?;
    let residual_rms = ((&a * &x - &rhs).norm_squared() / rows as f64).sqrt();

    let slack = tol.slack(eig);
    let min_squared = x.min();
    let mut squared = BTreeMap::new();
    let mut clamped = Vec::new();
    for (e, &v) in edges.iter().zip(x.iter()) {
        if v < -slack {
            return Err(Error::InconsistentData(format!(
                "loop coupling {e} solves to c^2 = {v:e}"
            )));
        }
        if v < 0.0 {
            clamped.push(e.to_string());
        }
        squared.insert(*e, v.max(0.0));
    }

    Ok(CycleSolution {
        squared,
        fields,
        augmented,
        diagnostics: CycleDiagnostics {
            condition,
            moments: if augmented { vec![2, 3] } else { vec![2] },
            rows,
            min_squared_coupling: min_squared,
            clamped,
            residual_rms,
        },
    })
}
