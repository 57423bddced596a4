//! Simulated measurement records: overlap moduli (exact, shot-sampled or
//! decaying) and the return amplitude `f(t) = <r|exp(-iHt)|r>`.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::spectral::EigenSystem;

/// How a set of moduli was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Shots { count: u64, seed: u64 },
    Extrapolated { times: Vec<f64> },
}

/// Eigenvalues plus `m_nj = |<E_j|n>|` on the accessed sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralMeasurement {
    pub eigenvalues: Vec<f64>,
    pub moduli: BTreeMap<NodeId, Vec<f64>>,
    pub provenance: Provenance,
}

impl SpectralMeasurement {
    /// Normalization slack appropriate to the provenance.
    pub fn normalization_tolerance(&self) -> f64 {
        match self.provenance {
            Provenance::Shots { count, .. } => 3.0 / (count as f64).sqrt(),
            Provenance::Exact | Provenance::Extrapolated { .. } => 1e-10,
        }
    }

    pub fn accessed(&self) -> BTreeSet<NodeId> {
        self.moduli.keys().copied().collect()
    }

    /// Checks ordering, lengths, signs and normalization.
    pub fn validate(&self) -> Result<()> {
        let n = self.eigenvalues.len();
        if n == 0 {
            return Err(Error::input("measurement has no eigenvalues"));
        }
        if self.eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::input("eigenvalues must be finite"));
        }
        if self.eigenvalues.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("eigenvalues must be strictly increasing"));
        }
        let tol = self.normalization_tolerance();
        for (node, m) in &self.moduli {
            if m.len() != n {
                return Err(Error::input(format!(
                    "node {node} has {} moduli for {n} eigenvalues",
                    m.len()
                )));
            }
            if m.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::input(format!("moduli of node {node} must be finite and nonnegative")));
            }
            let norm: f64 = m.iter().map(|x| x * x).sum();
            if (norm - 1.0).abs() > tol {
                return Err(Error::input(format!(
                    "moduli of node {node} have squared norm {norm}, expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self =
            serde_json::from_str(text).map_err(|e| Error::input(format!("measurement JSON: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measurement serializes")
    }
}

fn check_access(e: &EigenSystem, access: &BTreeSet<NodeId>) -> Result<()> {
    if access.is_empty() {
        return Err(Error::input("access set is empty"));
    }
    for &n in access {
        e.row_of(n)?;
    }
    Ok(())
}

/// Moduli read straight off the eigenvectors.
pub fn measure_exact(e: &EigenSystem, access: &BTreeSet<NodeId>) -> Result<SpectralMeasurement> {
    check_access(e, access)?;
    let moduli = access
        .iter()
        .map(|&n| Ok((n, e.components(n)?.iter().map(|x| x.abs()).collect())))
        .collect::<Result<_>>()?;
    Ok(SpectralMeasurement {
        eigenvalues: e.eigenvalues().to_vec(),
        moduli,
        provenance: Provenance::Exact,
    })
}

/// Projective sampling in the eigenbasis: `shots` multinomial draws per
/// accessed site with probabilities `m_nj^2`, reported as `sqrt(count/shots)`.
/// Sites are sampled in ascending order from one seeded stream.
pub fn measure_shots(
    e: &EigenSystem,
    access: &BTreeSet<NodeId>,
    shots: u64,
    seed: u64,
) -> Result<SpectralMeasurement> {
    check_access(e, access)?;
    if shots == 0 {
        return Err(Error::input("shots must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moduli = BTreeMap::new();
    for &n in access {
        let probs: Vec<f64> = e.components(n)?.iter().map(|x| x * x).collect();
        let counts = multinomial(&mut rng, shots, &probs)?;
        let m = counts
            .iter()
            .map(|&c| (c as f64 / shots as f64).sqrt())
            .collect();
        moduli.insert(n, m);
    }
    Ok(SpectralMeasurement {
        eigenvalues: e.eigenvalues().to_vec(),
        moduli,
        provenance: Provenance::Shots { count: shots, seed },
    })
}

/// Multinomial draw via successive conditional binomials.
fn multinomial(rng: &mut ChaCha8Rng, trials: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let mut left = trials;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(left);
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if left == 0 {
            0
        } else {
            Binomial::new(left, q)
                .map_err(|err| Error::Numeric(format!("binomial sampler: {err}")))?
                .sample(rng)
        };
        out.push(k);
        left -= k;
        mass -= p;
    }
    Ok(out)
}

/// Per-eigenstate decay rates `Gamma_j >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    pub gamma: Vec<f64>,
}

impl DecayModel {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::input(format!("decay rates must be nonnegative, got {g}")));
        }
        Ok(DecayModel { gamma })
    }
}

/// Amplitudes `a_nj(t_k)` on a common time grid; `moduli[n][k][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySeries {
    pub eigenvalues: Vec<f64>,
    pub times: Vec<f64>,
    pub moduli: BTreeMap<NodeId, Vec<Vec<f64>>>,
}

impl DecaySeries {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("decay series JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("series serializes")
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::input("no sample times"));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::input("sample times must be finite and nonnegative"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::input("sample times must be distinct"));
    }
    Ok(())
}

/// `a_nj(t) = m_nj exp(-Gamma_j t / 2)` at each requested time.
pub fn measure_decaying(
    e: &EigenSystem,
    access: &BTreeSet<NodeId>,
    d: &DecayModel,
    times: &[f64],
) -> Result<DecaySeries> {
    check_access(e, access)?;
    check_times(times)?;
    if d.gamma.len() != e.dimension() {
        return Err(Error::input(format!(
            "{} decay rates for {} eigenstates",
            d.gamma.len(),
            e.dimension()
        )));
    }
    DecayModel::new(d.gamma.clone())?;
    let exact = measure_exact(e, access)?;
    let moduli = exact
        .moduli
        .into_iter()
        .map(|(n, m)| {
            let rows = times
                .iter()
                .map(|&t| {
                    m.iter()
                        .zip(&d.gamma)
                        .map(|(&x, &g)| x * (-g * t / 2.0).exp())
                        .collect()
                })
                .collect();
            (n, rows)
        })
        .collect();
    Ok(DecaySeries {
        eigenvalues: exact.eigenvalues,
        times: times.to_vec(),
        moduli,
    })
}

/// Complex samples of a signal on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalFile {
    times: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TimeSignal {
    /// `times[k] = k dt` for `k < count`.
    pub fn uniform_times(dt: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| k as f64 * dt).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SignalFile =
            serde_json::from_str(text).map_err(|e| Error::input(format!("signal JSON: {e}")))?;
        if f.re.len() != f.times.len() || f.im.len() != f.times.len() {
            return Err(Error::input("signal arrays differ in length"));
        }
        let values = f.re.iter().zip(&f.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        Ok(TimeSignal {
            times: f.times,
            values,
        })
    }

    pub fn to_json(&self) -> String {
        let f = SignalFile {
            times: self.times.clone(),
            re: self.values.iter().map(|z| z.re).collect(),
            im: self.values.iter().map(|z| z.im).collect(),
        };
        serde_json::to_string_pretty(&f).expect("signal serializes")
    }
}

/// `f(t) = sum_j exp(-i E_j t) |<E_j|reference>|^2`.
pub fn signal_f11(e: &EigenSystem, reference: NodeId, times: &[f64]) -> Result<TimeSignal> {
    let weights: Vec<f64> = e.components(reference)?.iter().map(|x| x * x).collect();
    let values = times
        .iter()
        .map(|&t| {
            e.eigenvalues()
                .iter()
                .zip(&weights)
                .map(|(&en, &w)| Complex64::from_polar(w, -en * t))
                .sum()
        })
        .collect();
    Ok(TimeSignal {
        times: times.to_vec(),
        values,
    })
}
