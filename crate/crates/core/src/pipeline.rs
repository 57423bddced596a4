//! End-to-end simulation and reconstruction of planted parameters.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{extrapolate_t0, ExtrapolationFit};
use crate::graph::{compute_access_plan, compute_aggressive_plan, is_estimable, AccessPlan, NetworkGraph, NodeId};
use crate::measurement::{measure_decaying, measure_exact, measure_shots, DecayModel, SpectralMeasurement};
use crate::reconstruction::{reconstruct, ReconstructOptions, ReconstructionResult};
use crate::spectral::{assemble_single_excitation, eigendecompose, gauge_fix, HamiltonianParams};

#[derive(Debug, Clone, PartialEq, Default)]
pub enum MeasurementMode {
    #[default]
    Exact,
    Shots { count: u64, seed: u64 },
    /// Amplitudes sampled at `times`, then extrapolated back to `t = 0`.
    Decaying { gamma: Vec<f64>, times: Vec<f64> },
}

#[derive(Debug, Clone, Default)]
pub struct RoundtripOptions {
    pub reference: Option<NodeId>,
    pub mode: MeasurementMode,
    pub aggressive: bool,
    pub reconstruct: ReconstructOptions,
}

#[derive(Debug, Clone)]
pub struct RoundtripReport {
    pub plan: AccessPlan,
    pub measurement: SpectralMeasurement,
    pub extrapolation: Option<ExtrapolationFit>,
    pub result: ReconstructionResult,
    pub errors: Vec<ParameterError>,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterError {
    pub name: String,
    pub planted: f64,
    pub estimated: f64,
    pub relative: f64,
}

/// Default gauge reference: the smallest leaf, or the smallest site if the
/// graph has no leaves.
pub fn default_reference(g: &NetworkGraph) -> NodeId {
    g.leaves().first().copied().unwrap_or(g.nodes()[0])
}

/// Planted-versus-estimated table. The relative error divides by
/// `max(|planted|, 1e-3 * max |planted parameter|)` so near-zero fields do
/// not dominate.
pub fn compare_params(estimated: &HamiltonianParams, planted: &HamiltonianParams) -> Vec<ParameterError> {
    let floor = 1e-3 * planted.max_abs();
    let row = |name: String, t: f64, e: Option<f64>| {
        let e = e.unwrap_or(f64::NAN);
        ParameterError {
            name,
            planted: t,
            estimated: e,
            relative: (e - t).abs() / t.abs().max(floor),
        }
    };
    let fields = planted
        .fields
        .iter()
        .map(|(&n, &b)| row(format!("b{n}"), b, estimated.field(n)));
    let couplings = planted
        .couplings
        .iter()
        .map(|(e, &c)| row(format!("c{e}"), c, estimated.couplings.get(e).copied()));
    fields.chain(couplings).collect()
}

/// Largest relative error in a comparison table; NaN entries count as infinite.
pub fn max_relative_error(rows: &[ParameterError]) -> f64 {
    rows.iter()
        .map(|r| if r.relative.is_nan() { f64::INFINITY } else { r.relative })
        .fold(0.0, f64::max)
}

/// Checks estimability, then assembles, diagonalizes, gauge-fixes at the
/// reference, plans, measures and reconstructs, then compares against the
/// planted parameters.
pub fn roundtrip(g: &NetworkGraph, planted: &HamiltonianParams, opts: &RoundtripOptions) -> Result<RoundtripReport> {
    let verdict = is_estimable(g);
    if !verdict.estimable {
        return Err(Error::Capability(format!("graph is not estimable: {}", verdict.reason)));
    }
    let reference = opts.reference.unwrap_or_else(|| default_reference(g));
    let h = assemble_single_excitation(g, planted)?;
    let eig = gauge_fix(&eigendecompose(&h)?, reference, &opts.reconstruct.tolerances)?;
    let plan = if opts.aggressive {
        compute_aggressive_plan(g, Some(reference))?
    } else {
        compute_access_plan(g, Some(reference))?
    };
    let (measurement, extrapolation) = measure(&eig, &plan.access_set, &opts.mode)?;
    let result = reconstruct(g, &plan, &measurement, &opts.reconstruct)?;
    let errors = compare_params(&result.params, planted);
    let max_relative_error = max_relative_error(&errors);
    Ok(RoundtripReport {
        plan,
        measurement,
        extrapolation,
        result,
        errors,
        max_relative_error,
    })
}

fn measure(
    eig: &crate::spectral::EigenSystem,
    access: &BTreeSet<NodeId>,
    mode: &MeasurementMode,
) -> Result<(SpectralMeasurement, Option<ExtrapolationFit>)> {
    Ok(match mode {
        MeasurementMode::Exact => (measure_exact(eig, access)?, None),
        MeasurementMode::Shots { count, seed } => (measure_shots(eig, access, *count, *seed)?, None),
        MeasurementMode::Decaying { gamma, times } => {
            let series = measure_decaying(eig, access, &DecayModel::new(gamma.clone())?, times)?;
            let fit = extrapolate_t0(&series)?;
            (fit.to_measurement(), Some(fit))
        }
    })
}
