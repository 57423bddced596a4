//! Single-excitation Hamiltonian, its eigensystem and the reference gauge.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{spectral_range, Tolerances};
use crate::error::{Error, Result};
use crate::graph::{Edge, NetworkGraph, NodeId, Sign};

/// Local fields `b_n` and couplings `c_mn` of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsFile", into = "ParamsFile")]
pub struct HamiltonianParams {
    pub fields: BTreeMap<NodeId, f64>,
    pub couplings: BTreeMap<Edge, f64>,
}

impl HamiltonianParams {
    pub fn new(fields: BTreeMap<NodeId, f64>, couplings: BTreeMap<Edge, f64>) -> Self {
        HamiltonianParams { fields, couplings }
    }

    /// Every field set to `b`, every coupling to `|c|` with the edge's sign.
    pub fn uniform(g: &NetworkGraph, b: f64, c: f64) -> Result<Self> {
        let p = HamiltonianParams {
            fields: g.nodes().iter().map(|&n| (n, b)).collect(),
            couplings: g.edges().map(|(e, s)| (e, s.value() * c.abs())).collect(),
        };
        p.validate(g)?;
        Ok(p)
    }

    pub fn field(&self, n: NodeId) -> Option<f64> {
        self.fields.get(&n).copied()
    }

    pub fn coupling(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.couplings.get(&Edge::new(a, b)).copied()
    }

    /// Largest absolute parameter value; sets the scale for relative errors.
    pub fn max_abs(&self) -> f64 {
        self.fields
            .values()
            .chain(self.couplings.values())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Same parameters with `delta` added to every field.
    pub fn shifted(&self, delta: f64) -> Self {
        HamiltonianParams {
            fields: self.fields.iter().map(|(&n, &b)| (n, b + delta)).collect(),
            couplings: self.couplings.clone(),
        }
    }

    /// Checks that the parameters cover exactly `g`'s nodes and edges with
    /// finite values, nonzero couplings and the declared signs.
    pub fn validate(&self, g: &NetworkGraph) -> Result<()> {
        for &n in g.nodes() {
            match self.fields.get(&n) {
                None => return Err(Error::input(format!("missing field for node {n}"))),
                Some(b) if !b.is_finite() => {
                    return Err(Error::input(format!("field of node {n} is not finite")))
                }
                _ => {}
            }
        }
        if let Some(n) = self.fields.keys().find(|&&n| !g.contains_node(n)) {
            return Err(Error::input(format!("field given for unknown node {n}")));
        }
        for (e, sign) in g.edges() {
            let Some(&c) = self.couplings.get(&e) else {
                return Err(Error::input(format!("missing coupling for edge {e}")));
            };
            if !c.is_finite() {
                return Err(Error::input(format!("coupling {e} is not finite")));
            }
            if c == 0.0 {
                return Err(Error::input(format!("coupling {e} is zero")));
            }
            if Sign::of(c) != sign {
                return Err(Error::input(format!(
                    "coupling {e} = {c} contradicts the declared sign"
                )));
            }
        }
        if let Some(e) = self.couplings.keys().find(|e| g.edge_sign(**e).is_none()) {
            return Err(Error::input(format!("coupling given for non-edge {e}")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("parameter JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    b: BTreeMap<NodeId, f64>,
    c: BTreeMap<String, f64>,
}

impl TryFrom<ParamsFile> for HamiltonianParams {
    type Error = Error;

    fn try_from(f: ParamsFile) -> Result<Self> {
        let mut couplings = BTreeMap::new();
        for (key, c) in f.c {
            let e: Edge = key.parse()?;
            if couplings.insert(e, c).is_some() {
                return Err(Error::input(format!("coupling {e} given twice")));
            }
        }
        Ok(HamiltonianParams {
            fields: f.b,
            couplings,
        })
    }
}

impl From<HamiltonianParams> for ParamsFile {
    fn from(p: HamiltonianParams) -> Self {
        ParamsFile {
            b: p.fields,
            c: p.couplings.into_iter().map(|(e, c)| (e.to_string(), c)).collect(),
        }
    }
}

/// Dense symmetric matrix whose rows and columns are labelled by sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    nodes: Vec<NodeId>,
    data: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Wraps `data`, which must be square, match `nodes` and be symmetric to 1e-12.
    pub fn new(nodes: Vec<NodeId>, data: DMatrix<f64>) -> Result<Self> {
        let n = nodes.len();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::input(format!(
                "matrix is {}x{} but {n} sites are labelled",
                data.nrows(),
                data.ncols()
            )));
        }
        let scale = data.amax().max(1.0);
        for r in 0..n {
            for s in r + 1..n {
                if (data[(r, s)] - data[(s, r)]).abs() > 1e-12 * scale {
                    return Err(Error::input(format!("matrix is not symmetric at ({r}, {s})")));
                }
            }
        }
        Ok(SymmetricMatrix { nodes, data })
    }

    pub fn dimension(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.data[(r, s)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Builds `H` with `H[n][n] = b_n` and `H[m][n] = c_mn` on edges.
pub fn assemble_single_excitation(g: &NetworkGraph, p: &HamiltonianParams) -> Result<SymmetricMatrix> {
    p.validate(g)?;
    let n = g.node_count();
    let mut h = DMatrix::zeros(n, n);
    for (i, node) in g.nodes().iter().enumerate() {
        h[(i, i)] = p.fields[node];
    }
    for (e, _) in g.edges() {
        let (a, b) = (g.index_of(e.u()).expect("node"), g.index_of(e.v()).expect("node"));
        h[(a, b)] = p.couplings[&e];
        h[(b, a)] = p.couplings[&e];
    }
    Ok(SymmetricMatrix {
        nodes: g.nodes().to_vec(),
        data: h,
    })
}

/// Eigenvalues in ascending order with eigenvectors as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    nodes: Vec<NodeId>,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    gauge_reference: Option<NodeId>,
}

impl EigenSystem {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are eigenvectors; row `i` belongs to `nodes()[i]`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn gauge_reference(&self) -> Option<NodeId> {
        self.gauge_reference
    }

    pub fn dimension(&self) -> usize {
        self.nodes.len()
    }

    pub fn row_of(&self, n: NodeId) -> Result<usize> {
        self.nodes
            .binary_search(&n)
            .map_err(|_| Error::input(format!("node {n} is not part of the eigensystem")))
    }

    /// `<E_j|n>` for all `j`.
    pub fn components(&self, n: NodeId) -> Result<Vec<f64>> {
        let r = self.row_of(n)?;
        Ok(self.vectors.row(r).iter().copied().collect())
    }

    /// Copy with column `j` negated, for gauge tests.
    pub fn with_flipped_column(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.vectors.column_mut(j).neg_mut();
        out.gauge_reference = None;
        out
    }

    /// `sum_j E_j v_j v_j^T`.
    pub fn reconstruct_matrix(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        &self.vectors * d * self.vectors.transpose()
    }
}

/// Dense symmetric eigendecomposition, eigenvalues sorted ascending.
pub fn eigendecompose(m: &SymmetricMatrix) -> Result<EigenSystem> {
    let n = m.dimension();
    let eig = m
        .data
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    if eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("eigenvalues are not finite".into()));
    }
    Ok(EigenSystem {
        nodes: m.nodes.clone(),
        eigenvalues,
        vectors,
        gauge_reference: None,
    })
}

/// Smallest gap between consecutive eigenvalues must exceed the gap tolerance.
pub(crate) fn check_nondegenerate(eigenvalues: &[f64], tol: &Tolerances) -> Result<()> {
    let gap_tol = tol.gap(eigenvalues);
    for w in eigenvalues.windows(2) {
        if (w[1] - w[0]).is_nan() || w[1] - w[0] <= gap_tol {
            return Err(Error::GaugeDegeneracy {
                lower: w[0],
                upper: w[1],
                tol: gap_tol,
            });
        }
    }
    Ok(())
}

/// Flips eigenvector signs so every `<E_j|reference>` is positive.
pub fn gauge_fix(e: &EigenSystem, reference: NodeId, tol: &Tolerances) -> Result<EigenSystem> {
    let r = e.row_of(reference)?;
    check_nondegenerate(&e.eigenvalues, tol)?;
    let mut out = e.clone();
    for j in 0..e.dimension() {
        let x = e.vectors[(r, j)];
        if x.abs() <= tol.overlap {
            return Err(Error::DarkState {
                node: reference,
                index: j,
                overlap: x.abs(),
            });
        }
        if x < 0.0 {
            out.vectors.column_mut(j).neg_mut();
        }
    }
    out.gauge_reference = Some(reference);
    Ok(out)
}

/// Largest deviation of `V^T V` from the identity.
pub fn orthonormality_error(e: &EigenSystem) -> f64 {
    let n = e.dimension();
    let gram = e.vectors.transpose() * &e.vectors;
    (gram - DMatrix::<f64>::identity(n, n)).amax()
}

/// Spectral range `E_max - E_min`.
pub fn range(e: &EigenSystem) -> f64 {
    spectral_range(&e.eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topologies;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn dimer() -> (NetworkGraph, HamiltonianParams) {
        let g = topologies::path(2);
        let p = HamiltonianParams::uniform(&g, 0.0, 1.0).unwrap();
        (g, p)
    }

    #[test]
    fn dimer_matrix() {
        let (g, p) = dimer();
        let h = assemble_single_excitation(&g, &p).unwrap();
        assert_eq!(h.as_matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn path3_is_banded() {
        let g = topologies::path(3);
        let p = HamiltonianParams::new(
            BTreeMap::from([(1, 0.1), (2, 0.2), (3, 0.3)]),
            BTreeMap::from([(Edge::new(1, 2), 0.5), (Edge::new(2, 3), 0.7)]),
        );
        let h = assemble_single_excitation(&g, &p).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[0.1, 0.5, 0.0, 0.5, 0.2, 0.7, 0.0, 0.7, 0.3]);
        assert_eq!(h.as_matrix(), &want);
    }

    #[test]
    fn fmo_sparsity_follows_edges() {
        let g = topologies::fmo();
        let p = HamiltonianParams::uniform(&g, 1.0, 0.4).unwrap();
        let h = assemble_single_excitation(&g, &p).unwrap();
        for r in 0..7 {
            for s in 0..7 {
                let (a, b) = (g.nodes()[r], g.nodes()[s]);
                let nonzero = h.get(r, s) != 0.0;
                assert_eq!(nonzero, r == s || g.has_edge(a, b), "({a},{b})");
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let g = topologies::path(3);
        let mut p = HamiltonianParams::uniform(&g, 0.0, 1.0).unwrap();
        p.couplings.insert(Edge::new(1, 2), -1.0);
        assert!(matches!(assemble_single_excitation(&g, &p), Err(Error::Input(_))));
        p.couplings.insert(Edge::new(1, 2), 0.0);
        assert!(matches!(assemble_single_excitation(&g, &p), Err(Error::Input(_))));
        p.couplings.remove(&Edge::new(1, 2));
        assert!(matches!(assemble_single_excitation(&g, &p), Err(Error::Input(_))));
        let mut p = HamiltonianParams::uniform(&g, 0.0, 1.0).unwrap();
        p.fields.remove(&3);
        assert!(matches!(assemble_single_excitation(&g, &p), Err(Error::Input(_))));
    }

    #[test]
    fn parameter_json() {
        let text = r#"{"b":{"1":0.0,"2":0.5},"c":{"1-2":-0.9}}"#;
        let p = HamiltonianParams::from_json(text).unwrap();
        assert_eq!(p.coupling(2, 1), Some(-0.9));
        assert_eq!(p.field(2), Some(0.5));
        assert_eq!(HamiltonianParams::from_json(&p.to_json()).unwrap(), p);
        assert!(HamiltonianParams::from_json(r#"{"b":{},"c":{"2-1":1.0}}"#).is_err());
        assert!(HamiltonianParams::from_json(r#"{"b":{},"c":{},"x":1}"#).is_err());
    }

    #[test]
    fn dimer_spectrum() {
        let (g, p) = dimer();
        let e = eigendecompose(&assemble_single_excitation(&g, &p).unwrap()).unwrap();
        assert!((e.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues()[1] - 1.0).abs() < 1e-14);
        for x in e.components(1).unwrap() {
            assert!((x * x - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn path3_spectrum() {
        let g = topologies::path(3);
        let p = HamiltonianParams::uniform(&g, 0.0, 1.0).unwrap();
        let e = eigendecompose(&assemble_single_excitation(&g, &p).unwrap()).unwrap();
        for (got, want) in e.eigenvalues().iter().zip([-SQRT2, 0.0, SQRT2]) {
            assert!((got - want).abs() < 1e-14);
        }
        for (x, want) in e.components(1).unwrap().iter().zip([0.25, 0.5, 0.25]) {
            assert!((x * x - want).abs() < 1e-14);
        }
        assert!(orthonormality_error(&e) < 1e-12 * 3.0);
    }

    #[test]
    fn cycle4_is_degenerate() {
        let g = topologies::cycle(4);
        let p = HamiltonianParams::uniform(&g, 0.0, 1.0).unwrap();
        let e = eigendecompose(&assemble_single_excitation(&g, &p).unwrap()).unwrap();
        for (got, want) in e.eigenvalues().iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(matches!(
            gauge_fix(&e, 1, &Tolerances::default()),
            Err(Error::GaugeDegeneracy { .. })
        ));
    }

    #[test]
    fn gauge_fix_makes_reference_positive() {
        let (g, p) = dimer();
        let e = eigendecompose(&assemble_single_excitation(&g, &p).unwrap()).unwrap();
        let flipped = e.with_flipped_column(0).with_flipped_column(1);
        for sys in [e, flipped] {
            let fixed = gauge_fix(&sys, 1, &Tolerances::default()).unwrap();
            assert_eq!(fixed.gauge_reference(), Some(1));
            assert!(fixed.components(1).unwrap().iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn path3_middle_is_dark() {
        let g = topologies::path(3);
        let p = HamiltonianParams::uniform(&g, 0.0, 1.0).unwrap();
        let e = eigendecompose(&assemble_single_excitation(&g, &p).unwrap()).unwrap();
        let err = gauge_fix(&e, 2, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::DarkState { node: 2, index: 1, .. }), "{err:?}");
    }

    #[test]
    fn reconstruction_and_moment_identities() {
        let g = topologies::fmo();
        let fields = BTreeMap::from([(1, 0.3), (2, -0.2), (3, 0.9), (4, 0.1), (5, -0.7), (6, 0.4), (7, 0.0)]);
        let couplings = g
            .edges()
            .enumerate()
            .map(|(i, (e, _))| (e, 0.2 + 0.17 * i as f64))
            .collect();
        let p = HamiltonianParams::new(fields, couplings);
        let h = assemble_single_excitation(&g, &p).unwrap();
        let e = eigendecompose(&h).unwrap();
        let norm = h.as_matrix().norm();
        assert!((e.reconstruct_matrix() - h.as_matrix()).amax() < 1e-10 * norm);
        let trace: f64 = p.fields.values().sum();
        assert!((e.eigenvalues().iter().sum::<f64>() - trace).abs() < 1e-10 * 7.0);
        let second: f64 = p.fields.values().map(|b| b * b).sum::<f64>()
            + 2.0 * p.couplings.values().map(|c| c * c).sum::<f64>();
        assert!((e.eigenvalues().iter().map(|x| x * x).sum::<f64>() - second).abs() < 1e-10);
    }
}
