//! Spectral inputs from raw records: peaks of the return amplitude's Fourier
//! transform, and `t = 0` moduli from decaying amplitude series.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::measurement::{DecaySeries, Provenance, SpectralMeasurement, TimeSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rect,
    Hann,
}

impl Window {
    fn coefficients(self, m: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; m],
            Window::Hann if m < 2 => vec![1.0; m],
            Window::Hann => (0..m)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (m - 1) as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "w")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Sorted by energy.
    pub peaks: Vec<Peak>,
    /// Bin spacing `2 pi / T`.
    pub resolution: f64,
}

impl SpectrumEstimate {
    pub fn energies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.energy).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.weight).collect()
    }

    /// True when a peak sits within one bin of the Nyquist edge `pi / dt`,
    /// which suggests the spectrum is wider than the sampled band.
    pub fn near_band_edge(&self, dt: f64) -> bool {
        let edge = PI / dt;
        self.peaks
            .iter()
            .any(|p| edge - p.energy.abs() < self.resolution)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serializes")
    }
}

const PAD: usize = 4;

/// Uniform step of `times`, or an input error.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::input("need at least two samples"));
    }
    let dt = times[1] - times[0];
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::input("sample times must increase"));
    }
    let scale = times.iter().fold(dt, |m, t| m.max(t.abs()));
    for (k, &t) in times.iter().enumerate() {
        if (t - times[0] - k as f64 * dt).abs() > 1e-9 * scale {
            return Err(Error::input(format!("sample {k} is off the uniform grid")));
        }
    }
    Ok(dt)
}

/// Finds the `n_peaks` strongest lines of `sig`.
///
/// Energies come from the largest local maxima of the windowed spectrum,
/// refined by a parabola through the log magnitudes of three bins of the
/// zero-padded transform. Weights
/// are the windowed transform evaluated at the refined energy, divided by the
/// window sum, so an isolated line reports its own weight.
pub fn estimate_spectrum_fft(sig: &TimeSignal, n_peaks: usize, window: Window) -> Result<SpectrumEstimate> {
    if n_peaks == 0 {
        return Err(Error::input("n_peaks must be positive"));
    }
    if sig.values.len() != sig.times.len() {
        return Err(Error::input("signal times and values differ in length"));
    }
    let m = sig.values.len();
    if m < 4 * n_peaks {
        return Err(Error::input(format!(
            "{m} samples cannot resolve {n_peaks} peaks (need at least {})",
            4 * n_peaks
        )));
    }
    let dt = uniform_step(&sig.times)?;
    let w = window.coefficients(m);
    let w_sum: f64 = w.iter().sum();
    let windowed: Vec<Complex64> = sig.values.iter().zip(&w).map(|(x, &c)| x * c).collect();

    // Zero padding interpolates the spectrum between bins, which keeps the
    // three-point refinement from being biased by the window shape.
    let padded = PAD * m;
    let mut buf = windowed.clone();
    buf.resize(padded, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_inverse(padded).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let top = mag.iter().copied().fold(0.0, f64::max);

    let mut maxima: Vec<usize> = (0..padded)
        .filter(|&k| {
            // A line must dominate one original bin on either side; this
            // drops the sidelobe ripple that padding makes visible.
            let l = mag[(k + padded - 1) % padded];
            let dominates = (1..=PAD).all(|d| mag[k] >= mag[(k + d) % padded] && mag[k] >= mag[(k + padded - d) % padded]);
            mag[k] > l && dominates && mag[k] > 1e-9 * top
        })
        .collect();
    maxima.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));

    let resolution = 2.0 * PI / (m as f64 * dt);
    let mut peaks: Vec<Peak> = maxima
        .iter()
        .take(n_peaks)
        .map(|&k| {
            let (l, c, r) = (mag[(k + padded - 1) % padded], mag[k], mag[(k + 1) % padded]);
            let delta = if l > 0.0 && r > 0.0 {
                let (a, b, g) = (l.ln(), c.ln(), r.ln());
                let den = a - 2.0 * b + g;
                if den < 0.0 {
                    (0.5 * (a - g) / den).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            } else {
                0.0
            };
            let signed = if k > padded / 2 { k as f64 - padded as f64 } else { k as f64 };
            let energy = (signed + delta) * resolution / PAD as f64;
            let weight = dtft(&windowed, energy * dt).norm() / w_sum;
            Peak { energy, weight }
        })
        .collect();
    peaks.sort_by(|a, b| a.energy.total_cmp(&b.energy));

    if peaks.len() < n_peaks {
        return Err(Error::FewerPeaks {
            requested: n_peaks,
            found: peaks.iter().map(|p| (p.energy, p.weight)).collect(),
        });
    }
    Ok(SpectrumEstimate { peaks, resolution })
}

/// `sum_n x_n exp(i omega n)`.
fn dtft(x: &[Complex64], omega: f64) -> Complex64 {
    x.iter()
        .enumerate()
        .map(|(n, v)| v * Complex64::from_polar(1.0, omega * n as f64))
        .sum()
}

/// Moduli at `t = 0` and decay rates recovered from a decaying series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationFit {
    pub eigenvalues: Vec<f64>,
    pub times: Vec<f64>,
    /// `m_nj(0)` per node.
    pub moduli: BTreeMap<NodeId, Vec<f64>>,
    /// Pooled `Gamma_j`.
    pub gamma: Vec<f64>,
    /// RMS of the log-amplitude residual per node and `j`, under the pooled rate.
    pub residual_rms: BTreeMap<NodeId, Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ExtrapolationFit {
    /// Extrapolated moduli as a measurement, each node renormalized to unit
    /// squared norm.
    pub fn to_measurement(&self) -> SpectralMeasurement {
        let moduli = self
            .moduli
            .iter()
            .map(|(&n, m)| {
                let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
                (n, m.iter().map(|x| x / norm).collect())
            })
            .collect();
        SpectralMeasurement {
            eigenvalues: self.eigenvalues.clone(),
            moduli,
            provenance: Provenance::Extrapolated {
                times: self.times.clone(),
            },
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_rms
            .values()
            .flatten()
            .fold(0.0, |m, &x| m.max(x))
    }
}

struct LineFit {
    slope: f64,
    intercept: f64,
    rms: f64,
}

fn fit_line(t: &[f64], y: &[f64]) -> LineFit {
    let n = t.len() as f64;
    let (tm, ym) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = t.iter().map(|x| (x - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - tm) * (v - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    LineFit {
        slope,
        intercept,
        rms: rms_about(t, y, slope, intercept),
    }
}

fn rms_about(t: &[f64], y: &[f64], slope: f64, intercept: f64) -> f64 {
    let ss: f64 = t
        .iter()
        .zip(y)
        .map(|(x, v)| (v - intercept - slope * x).powi(2))
        .sum();
    (ss / t.len() as f64).sqrt()
}

/// Fits `ln a_nj(t)` by a line per node and eigenstate, pools the slopes
/// into one rate per eigenstate (weighted by amplitude), and refits each
/// intercept under the pooled slope.
///
/// A node whose own slope disagrees with the pooled one by more than five
/// times its residual over the time span produces a warning.
pub fn extrapolate_t0(series: &DecaySeries) -> Result<ExtrapolationFit> {
    let n_eig = series.eigenvalues.len();
    let times = &series.times;
    let mut distinct = times.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Underdetermined(
            "extrapolation needs at least two distinct times".into(),
        ));
    }
    if series.moduli.is_empty() {
        return Err(Error::input("series has no nodes"));
    }
    let span = distinct[distinct.len() - 1] - distinct[0];

    let mut logs: BTreeMap<NodeId, Vec<Vec<f64>>> = BTreeMap::new();
    for (&node, rows) in &series.moduli {
        if rows.len() != times.len() {
            return Err(Error::input(format!(
                "node {node} has {} samples for {} times",
                rows.len(),
                times.len()
            )));
        }
        let mut per_j = vec![Vec::with_capacity(times.len()); n_eig];
        for row in rows {
            if row.len() != n_eig {
                return Err(Error::input(format!("node {node} has a row of the wrong length")));
            }
            for (j, &a) in row.iter().enumerate() {
                if !a.is_finite() || a <= 0.0 {
                    return Err(Error::input(format!(
                        "amplitude of node {node}, eigenstate {j} is not positive"
                    )));
                }
                per_j[j].push(a.ln());
            }
        }
        logs.insert(node, per_j);
    }

    let free: BTreeMap<NodeId, Vec<LineFit>> = logs
        .iter()
        .map(|(&n, per_j)| (n, per_j.iter().map(|y| fit_line(times, y)).collect()))
        .collect();

    let gamma: Vec<f64> = (0..n_eig)
        .map(|j| {
            let (num, den) = free.values().fold((0.0, 0.0), |(num, den), fits| {
                let w = fits[j].intercept.exp();
                (num + w * fits[j].slope, den + w)
            });
            -2.0 * num / den
        })
        .collect();

    let mut moduli = BTreeMap::new();
    let mut residual_rms = BTreeMap::new();
    let mut warnings = Vec::new();
    let tm = times.iter().sum::<f64>() / times.len() as f64;
    for (&n, per_j) in &logs {
        let mut m0 = Vec::with_capacity(n_eig);
        let mut res = Vec::with_capacity(n_eig);
        for (j, y) in per_j.iter().enumerate() {
            let slope = -gamma[j] / 2.0;
            let ym = y.iter().sum::<f64>() / y.len() as f64;
            let intercept = ym - slope * tm;
            m0.push(intercept.exp());
            res.push(rms_about(times, y, slope, intercept));
            let own = &free[&n][j];
            if (own.slope - slope).abs() * span > 5.0 * own.rms + 1e-12 {
                warnings.push(format!(
                    "node {n}, eigenstate {j}: decay rate {:.3e} disagrees with pooled {:.3e}",
                    -2.0 * own.slope,
                    gamma[j]
                ));
            }
        }
        moduli.insert(n, m0);
        residual_rms.insert(n, res);
    }

    Ok(ExtrapolationFit {
        eigenvalues: series.eigenvalues.clone(),
        times: times.clone(),
        moduli,
        gamma,
        residual_rms,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(times: &[f64], lines: &[(f64, f64)]) -> TimeSignal {
        let values = times
            .iter()
            .map(|&t| lines.iter().map(|&(e, w)| Complex64::from_polar(w, -e * t)).sum())
            .collect();
        TimeSignal {
            times: times.to_vec(),
            values,
        }
    }

    #[test]
    fn cosine_has_two_lines() {
        let times = TimeSignal::uniform_times(0.1, 2000);
        let sig = signal(&times, &[(-1.0, 0.5), (1.0, 0.5)]);
        let est = estimate_spectrum_fft(&sig, 2, Window::Rect).unwrap();
        assert!((est.resolution - 2.0 * PI / 200.0).abs() < 1e-12);
        for (p, e) in est.peaks.iter().zip([-1.0, 1.0]) {
            assert!((p.energy - e).abs() < est.resolution, "{p:?}");
            assert!((p.weight - 0.5).abs() < 0.01, "{p:?}");
        }
    }

    #[test]
    fn constant_is_one_line_at_zero() {
        let times = TimeSignal::uniform_times(0.1, 256);
        let sig = signal(&times, &[(0.0, 1.0)]);
        for window in [Window::Rect, Window::Hann] {
            let est = estimate_spectrum_fft(&sig, 1, window).unwrap();
            assert!(est.peaks[0].energy.abs() < 1e-12);
            assert!((est.peaks[0].weight - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_peaks_reports_what_was_found() {
        let times = TimeSignal::uniform_times(0.1, 256);
        let sig = signal(&times, &[(0.0, 1.0)]);
        match estimate_spectrum_fft(&sig, 3, Window::Rect) {
            Err(Error::FewerPeaks { requested: 3, found }) => assert_eq!(found.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_irregular_grids() {
        let mut times = TimeSignal::uniform_times(0.1, 64);
        times[10] += 0.01;
        let sig = signal(&times, &[(1.0, 1.0)]);
        assert!(matches!(estimate_spectrum_fft(&sig, 1, Window::Rect), Err(Error::Input(_))));
    }

    #[test]
    fn band_edge_detection() {
        let dt = 0.1;
        let times = TimeSignal::uniform_times(dt, 400);
        let sig = signal(&times, &[(PI / dt - 0.05, 1.0)]);
        let est = estimate_spectrum_fft(&sig, 1, Window::Rect).unwrap();
        assert!(est.near_band_edge(dt));
        let sig = signal(&times, &[(1.0, 1.0)]);
        assert!(!estimate_spectrum_fft(&sig, 1, Window::Rect).unwrap().near_band_edge(dt));
    }

    fn series(rows: Vec<Vec<f64>>, times: Vec<f64>) -> DecaySeries {
        DecaySeries {
            eigenvalues: vec![0.0],
            times,
            moduli: BTreeMap::from([(1, rows)]),
        }
    }

    #[test]
    fn noiseless_exponential() {
        let times = vec![0.0, 10.0, 20.0];
        let rows = times.iter().map(|t| vec![0.7 * (-0.005f64 * t).exp()]).collect();
        let fit = extrapolate_t0(&series(rows, times)).unwrap();
        assert!((fit.moduli[&1][0] - 0.7).abs() < 1e-12);
        assert!((fit.gamma[0] - 0.01).abs() < 1e-12);
        assert!(fit.max_residual() < 1e-12);
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn constant_series() {
        let fit = extrapolate_t0(&series(vec![vec![0.3]; 4], vec![0.0, 1.0, 2.0, 3.0])).unwrap();
        assert!((fit.moduli[&1][0] - 0.3).abs() < 1e-15);
        assert!(fit.gamma[0].abs() < 1e-15);
    }

    #[test]
    fn extrapolation_errors() {
        assert!(matches!(
            extrapolate_t0(&series(vec![vec![0.3]], vec![5.0])),
            Err(Error::Underdetermined(_))
        ));
        assert!(matches!(
            extrapolate_t0(&series(vec![vec![0.3], vec![0.0]], vec![0.0, 1.0])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn pooled_rate_and_disagreement_warning() {
        let times: Vec<f64> = (0..5).map(|k| 10.0 * k as f64).collect();
        let decay = |m: f64, g: f64| times.iter().map(|t| vec![m * (-g * t / 2.0).exp()]).collect();
        let s = DecaySeries {
            eigenvalues: vec![0.0],
            times: times.clone(),
            moduli: BTreeMap::from([(1, decay(0.6, 0.01)), (2, decay(0.6, 0.03))]),
        };
        let fit = extrapolate_t0(&s).unwrap();
        assert!((fit.gamma[0] - 0.02).abs() < 1e-12);
        assert_eq!(fit.warnings.len(), 2);
    }
}
