use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit reports.
///
/// Variants split into three groups: malformed input (`Input`), requests the
/// method cannot serve (`Capability`), and method-level failures that carry a
/// named flag (`flag()` returns it). The CLI maps these groups to exit codes
/// 2, 1 and 1 respectively.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("degenerate spectrum: eigenvalues {lower} and {upper} are closer than {tol:e}")]
    GaugeDegeneracy { lower: f64, upper: f64, tol: f64 },

    #[error("dark state: eigenvector {index} has |<E_j|{node}>| = {overlap:e} at the reference")]
    DarkState {
        node: NodeId,
        index: usize,
        overlap: f64,
    },

    #[error("near-zero coupling while forcing from site {node}: |c| = {magnitude:e}")]
    NearZeroDivision { node: NodeId, magnitude: f64 },

    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    #[error("sign ambiguity at site {junction} for eigenvectors {indices:?}")]
    SignAmbiguity {
        junction: NodeId,
        indices: Vec<usize>,
    },

    #[error("cycle moment system is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("even cycle cannot be resolved: third-moment rows carry no information (condition number {condition:e})")]
    RankDeficientUnresolvable { condition: f64 },

    #[error("found only {} of {requested} spectral peaks", found.len())]
    FewerPeaks {
        requested: usize,
        found: Vec<(f64, f64)>,
    },

    #[error("underdetermined: {0}")]
    Underdetermined(String),
}

impl Error {
    /// Machine-readable flag name for method-level failures.
    pub fn flag(&self) -> &'static str {
        match self {
            Error::Input(_) => "InputError",
            Error::Capability(_) => "NotSupported",
            Error::Numeric(_) => "NumericFailure",
            Error::GaugeDegeneracy { .. } => "GaugeDegeneracy",
            Error::DarkState { .. } => "DarkState",
            Error::NearZeroDivision { .. } => "NearZeroDivision",
            Error::InconsistentData(_) => "InconsistentData",
            Error::SignAmbiguity { .. } => "SignAmbiguity",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::RankDeficientUnresolvable { .. } => "RankDeficientUnresolvable",
            Error::FewerPeaks { .. } => "FewerPeaks",
            Error::Underdetermined(_) => "Underdetermined",
        }
    }

    pub fn is_input(&self) -> bool {
        matches!(self, Error::Input(_) | Error::Underdetermined(_))
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
