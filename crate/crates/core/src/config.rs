/// Numerical thresholds shared by gauge fixing and reconstruction.
///
/// Relative tolerances are scaled by the spectral range `E_max - E_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Minimum eigenvalue gap, relative to the spectral range.
    pub gap_rel: f64,
    /// Minimum `|<E_j|ref>|` at the gauge reference and at merge junctions.
    pub overlap: f64,
    /// Smallest coupling magnitude the recursion will divide by.
    pub coupling: f64,
    /// Allowed drift of `sum_j m_j^2` from 1 on input moduli.
    pub norm: f64,
    /// Allowed negative squared coupling from the cycle solve, relative to range².
    pub slack_rel: f64,
    /// Largest acceptable condition number of the cycle moment system.
    pub max_condition: f64,
    /// Consistency residuals above this raise the `InconsistentData` flag.
    pub consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gap_rel: 1e-9,
            overlap: 1e-9,
            coupling: 1e-9,
            norm: 1e-8,
            slack_rel: 1e-10,
            max_condition: 1e10,
            consistency: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn gap(&self, eigenvalues: &[f64]) -> f64 {
        self.gap_rel * spectral_range(eigenvalues)
    }

    pub fn slack(&self, eigenvalues: &[f64]) -> f64 {
        self.slack_rel * spectral_range(eigenvalues).powi(2)
    }
}

pub(crate) fn spectral_range(eigenvalues: &[f64]) -> f64 {
    let lo = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if eigenvalues.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
