//! Recovery of all fields and couplings from eigenvalues and the moduli
//! measured on an access set.

mod chain;
mod cycle;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::config::{spectral_range, Tolerances};
use crate::error::{Error, Result};
use crate::graph::{AccessPlan, Edge, NetworkGraph, NodeId};
use crate::measurement::SpectralMeasurement;
use crate::spectral::{check_nondegenerate, HamiltonianParams};

pub use chain::{field_from_moduli, peel_branch, reconstruct_chain, ChainOutput, PeelOutput};
pub use cycle::{solve_cycle_moments, CycleDiagnostics, CycleSolution};
pub use table::{resolve_family_signs, Arrival, CoefficientStatus, CoefficientTable, Coefficients, SignResolution};

use chain::{check_vector, family_table, propagate, residual, rms, weighted_mean};

/// Parameters found so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialParams {
    pub fields: BTreeMap<NodeId, f64>,
    pub couplings: BTreeMap<Edge, f64>,
}

impl PartialParams {
    fn add_fields(&mut self, fields: impl IntoIterator<Item = (NodeId, f64)>) {
        for (n, b) in fields {
            self.fields.entry(n).or_insert(b);
        }
    }

    fn add_couplings(&mut self, couplings: impl IntoIterator<Item = (Edge, f64)>) {
        self.couplings.extend(couplings);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Flag {
    GaugeDegeneracy,
    DarkState,
    NearZeroDivision(NodeId),
    RankAugmented,
    InconsistentData,
}

impl Flag {
    /// The flag matching a reconstruction error, if there is one.
    pub fn from_error(e: &Error) -> Option<Flag> {
        match e {
            Error::GaugeDegeneracy { .. } => Some(Flag::GaugeDegeneracy),
            Error::DarkState { .. } => Some(Flag::DarkState),
            Error::NearZeroDivision { node, .. } => Some(Flag::NearZeroDivision(*node)),
            Error::InconsistentData(_) => Some(Flag::InconsistentData),
            _ => None,
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::NearZeroDivision(n) => write!(f, "NearZeroDivision({n})"),
            other => write!(f, "{other:?}"),
        }
    }
}

impl Serialize for Flag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReconstructOptions {
    pub tolerances: Tolerances,
    /// Independently known fields; their disagreement with the estimates is
    /// reported as a residual.
    pub known_fields: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub params: HamiltonianParams,
    /// Per-equation RMS of every relation the reconstruction did not consume.
    pub residuals: BTreeMap<String, f64>,
    pub flags: Vec<Flag>,
    pub cycle_diagnostics: Option<CycleDiagnostics>,
    pub table: CoefficientTable,
}

#[derive(Serialize)]
struct ResultFile<'a> {
    b: BTreeMap<NodeId, f64>,
    c: BTreeMap<String, f64>,
    residuals: &'a BTreeMap<String, f64>,
    flags: &'a [Flag],
    cycle_diagnostics: &'a Option<CycleDiagnostics>,
}

impl ReconstructionResult {
    pub fn to_json_value(&self) -> serde_json::Value {
        let file = ResultFile {
            b: self.params.fields.clone(),
            c: self
                .params
                .couplings
                .iter()
                .map(|(e, c)| (e.to_string(), *c))
                .collect(),
            residuals: &self.residuals,
            flags: &self.flags,
            cycle_diagnostics: &self.cycle_diagnostics,
        };
        serde_json::to_value(file).expect("result serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("result serializes")
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().fold(0.0, |m, &x| m.max(x))
    }
}

/// Runs the whole reconstruction for `plan` on measurement `meas`.
pub fn reconstruct(
    g: &NetworkGraph,
    plan: &AccessPlan,
    meas: &SpectralMeasurement,
    options: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    let tol = &options.tolerances;
    let eig = &meas.eigenvalues;
    check_inputs(g, plan, meas, tol)?;
    let range = spectral_range(eig);

    let mut known = PartialParams::default();
    let mut table = CoefficientTable::new();
    let mut residuals = BTreeMap::new();
    let mut flags = BTreeSet::new();

    let chain = reconstruct_chain(eig, &meas.moduli[&plan.reference], &plan.reference_path, g, tol)?;
    known.add_fields(chain.fields);
    known.add_couplings(chain.couplings);
    table.absorb(chain.table);
    if let Some(r) = chain.terminal_residual {
        residuals.insert(format!("terminal_{}", plan.reference_path.last().expect("nonempty")), r);
    }

    for peel in &plan.peel_schedule {
        let out = peel_branch(eig, &meas.moduli[&peel.leaf], &peel.path, peel.terminal, g, tol)?;
        known.add_fields(out.fields);
        known.add_couplings(out.couplings);
        table.absorb(out.table);
    }

    for link in &plan.link_schedule {
        merge_at(&mut table, link.junction, tol, &mut residuals)?;
        let mut rest = link.path.clone();
        rest.extend(link.terminal);
        let walk = continue_from(eig, g, tol, &table, &known, link.junction, &rest)?;
        let status = table.get(link.junction).expect("merged").status;
        known.add_fields(walk.fields);
        known.add_couplings(walk.couplings);
        table.absorb(family_table(walk.vectors, status));
    }

    for fwd in &plan.forward_schedule {
        merge_at(&mut table, fwd.junction, tol, &mut residuals)?;
        let mut rest = fwd.path.clone();
        rest.extend(fwd.terminal);
        let walk = continue_from(eig, g, tol, &table, &known, fwd.junction, &rest)?;
        let status = table.get(fwd.junction).expect("merged").status;
        known.add_fields(walk.fields);
        known.add_couplings(walk.couplings.iter().copied());
        let (last, u_last) = walk.vectors.last().expect("nonempty").clone();
        let b_last = weighted_mean(eig, &u_last);
        known.add_fields([(last, b_last)]);
        if fwd.terminal.is_none() {
            let prev = &walk.vectors[walk.vectors.len() - 2].1;
            let c = walk.couplings.last().expect("stepped at least once").1;
            let r = residual(eig, b_last, &u_last, &[(c, prev.clone())]);
            residuals.insert(format!("terminal_{last}"), rms(&r));
        }
        for (n, v) in walk.vectors.into_iter().skip(1) {
            table.insert(n, Coefficients::new(v, status));
        }
    }

    let mut cycle_diagnostics = None;
    if let Some(cp) = &plan.cycle_plan {
        let sol = solve_cycle_moments(cp, &table, meas, g, &known, tol)?;
        if sol.augmented {
            flags.insert(Flag::RankAugmented);
        }
        if !sol.diagnostics.clamped.is_empty() {
            flags.insert(Flag::InconsistentData);
        }
        known.add_fields(sol.fields);
        for (e, x) in sol.squared {
            let sign = g.edge_sign(e).expect("loop edge");
            known.couplings.insert(e, sign.value() * x.sqrt());
        }
        residuals.insert("cycle_moments".into(), sol.diagnostics.residual_rms);
        cycle_diagnostics = Some(sol.diagnostics);
    }

    for &n in &plan.access_set {
        known.add_fields([(n, weighted_mean(eig, &meas.moduli[&n]))]);
    }
    let pending: Vec<NodeId> = g
        .nodes()
        .iter()
        .copied()
        .filter(|n| !known.fields.contains_key(n))
        .collect();
    for n in pending {
        if let Some(c) = table.any_vector(n) {
            let b = weighted_mean(eig, &c.values);
            known.fields.insert(n, b);
        }
    }

    consistency_residuals(g, plan, meas, &table, &known, options, &mut residuals);
    if residuals.values().any(|&r| r > tol.consistency * range.max(1.0)) {
        flags.insert(Flag::InconsistentData);
    }
    if table.normalization_error() > tol.norm {
        flags.insert(Flag::InconsistentData);
    }

    let params = assemble(g, known)?;
    Ok(ReconstructionResult {
        params,
        residuals,
        flags: flags.into_iter().collect(),
        cycle_diagnostics,
        table,
    })
}

fn check_inputs(g: &NetworkGraph, plan: &AccessPlan, meas: &SpectralMeasurement, tol: &Tolerances) -> Result<()> {
    let n = g.node_count();
    if meas.eigenvalues.len() != n {
        return Err(Error::input(format!(
            "{} eigenvalues for {n} sites",
            meas.eigenvalues.len()
        )));
    }
    if meas.eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::input("eigenvalues must be sorted ascending"));
    }
    check_nondegenerate(&meas.eigenvalues, tol)?;
    for &a in &plan.access_set {
        let m = meas
            .moduli
            .get(&a)
            .ok_or_else(|| Error::input(format!("no measurement for accessed site {a}")))?;
        check_vector(&meas.eigenvalues, m, tol.norm)?;
    }
    if !g.contains_node(plan.reference) {
        return Err(Error::input(format!("reference {} is not a site", plan.reference)));
    }
    for (j, &x) in meas.moduli[&plan.reference].iter().enumerate() {
        if x <= tol.overlap {
            return Err(Error::DarkState {
                node: plan.reference,
                index: j,
                overlap: x,
            });
        }
    }
    Ok(())
}

/// Gives `n` an entry and folds every family arriving there into it.
fn merge_at(
    table: &mut CoefficientTable,
    n: NodeId,
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, f64>,
) -> Result<()> {
    table.promote_arrival(n)?;
    let primary = table.get(n).expect("promoted").status;
    let pending: Vec<(NodeId, CoefficientStatus)> = table
        .arrivals(n)
        .iter()
        .map(|a| (a.from, a.coefficients.status))
        .collect();
    for (from, status) in pending {
        match status {
            CoefficientStatus::PseudoSigned { family } if status != primary => {
                let (merged, res) = resolve_family_signs(table, n, family, tol.overlap)?;
                *table = merged;
                residuals.insert(format!("merge_{n}_via_{from}"), res.modulus_mismatch);
            }
            _ => {}
        }
    }
    Ok(())
}

/// Propagates from junction `n` into `rest[0]`, using every other neighbour
/// of `n` as a known term.
fn continue_from(
    eig: &[f64],
    g: &NetworkGraph,
    tol: &Tolerances,
    table: &CoefficientTable,
    known: &PartialParams,
    n: NodeId,
    rest: &[NodeId],
) -> Result<chain::Walk> {
    let entry = table.get(n).expect("merged");
    let next = rest[0];
    let mut terms = Vec::new();
    for &w in g.neighbors(n).iter().filter(|&&w| w != next) {
        let v = table
            .get(w)
            .filter(|c| c.status == entry.status)
            .ok_or_else(|| {
                Error::InconsistentData(format!("neighbour {w} of {n} is not aligned with it"))
            })?;
        let c = known.couplings[&Edge::new(n, w)];
        terms.push((c, v.values.clone()));
    }
    propagate(eig, g, tol, n, entry.values.clone(), terms, rest)
}

fn consistency_residuals(
    g: &NetworkGraph,
    plan: &AccessPlan,
    meas: &SpectralMeasurement,
    table: &CoefficientTable,
    known: &PartialParams,
    options: &ReconstructOptions,
    residuals: &mut BTreeMap<String, f64>,
) {
    let eig = &meas.eigenvalues;
    let on_cycle: BTreeSet<NodeId> = plan
        .cycle_plan
        .iter()
        .flat_map(|cp| cp.cycle.iter().copied())
        .collect();

    for n in table.arrival_nodes().collect::<Vec<_>>() {
        let Some(b) = known.fields.get(&n) else { continue };
        let reference = table.get(n).map(|c| c.moduli()).or_else(|| meas.moduli.get(&n).cloned());
        for a in table.arrivals(n) {
            let b_a = weighted_mean(eig, &a.coefficients.values);
            residuals.insert(format!("field_{n}_via_{}", a.from), (b_a - b).abs());
            if let Some(p) = &reference {
                let d: Vec<f64> = p
                    .iter()
                    .zip(&a.coefficients.values)
                    .map(|(x, y)| x - y.abs())
                    .collect();
                residuals.insert(format!("modulus_{n}_via_{}", a.from), rms(&d));
            }
        }
    }

    for &n in g.nodes() {
        if g.degree(n) < 3 || on_cycle.contains(&n) {
            continue;
        }
        let Some(v) = table.any_vector(n) else { continue };
        let Some(&b) = known.fields.get(&n) else { continue };
        let s2: f64 = eig
            .iter()
            .zip(&v.values)
            .map(|(e, x)| (e - b).powi(2) * x * x)
            .sum();
        let t2: Option<f64> = g
            .neighbors(n)
            .iter()
            .map(|&k| known.couplings.get(&Edge::new(n, k)).map(|c| c * c))
            .sum();
        if let Some(t2) = t2 {
            residuals.insert(format!("second_moment_{n}"), (s2 - t2).abs());
        }
    }

    for (&n, &b) in &options.known_fields {
        if let Some(est) = known.fields.get(&n) {
            residuals.insert(format!("known_field_{n}"), (est - b).abs());
        }
    }
}

fn assemble(g: &NetworkGraph, known: PartialParams) -> Result<HamiltonianParams> {
    let mut fields = BTreeMap::new();
    for &n in g.nodes() {
        let b = known
            .fields
            .get(&n)
            .ok_or_else(|| Error::Numeric(format!("field of site {n} was not determined")))?;
        fields.insert(n, *b);
    }
    let mut couplings = BTreeMap::new();
    for (e, _) in g.edges() {
        let c = known
            .couplings
            .get(&e)
            .ok_or_else(|| Error::Numeric(format!("coupling {e} was not determined")))?;
        couplings.insert(e, *c);
    }
    Ok(HamiltonianParams::new(fields, couplings))
}
