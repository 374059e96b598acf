//! Binned frequency distributions and the two line-shape fits used
//! throughout: exponential decay of the excited population and the
//! Lorentzian emission line A·(γ/π)/((ω − ω_c)² + γ²).

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::AmplitudeState;
use crate::modes::ModeSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error(
        "bin width {bin_width:.3e} is below twice the mode spacing; use at least {minimal:.3e}"
    )]
    UnderResolvedBins { bin_width: f64, minimal: f64 },
    #[error("need at least {required} samples in the fit window, found {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error(
        "non-positive population {value:.3e} at t = {time} inside the fit window; \
         end the window before t = {time}"
    )]
    NonPositive { time: f64, value: f64 },
    #[error("Lorentzian fit did not converge after {iterations} iterations (rms residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid spectrum: {0}")]
    Invalid(String),
    #[error("state has {found} amplitudes but the mode set has {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// Photon probability per frequency bin.
    QuantumProbability,
    /// Fraction of radiated energy per frequency bin.
    ClassicalEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDistribution {
    bin_edges: Vec<f64>,
    mass: Vec<f64>,
    total_mass: f64,
    kind: SpectrumKind,
}

impl SpectralDistribution {
    pub fn new(
        bin_edges: Vec<f64>,
        mass: Vec<f64>,
        kind: SpectrumKind,
    ) -> Result<Self, SpectraError> {
        if bin_edges.len() != mass.len() + 1 || mass.is_empty() {
            return Err(SpectraError::Invalid(format!(
                "{} edges for {} bins",
                bin_edges.len(),
                mass.len()
            )));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectraError::Invalid(
                "bin edges must increase strictly".into(),
            ));
        }
        if mass.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(SpectraError::Invalid(
                "bin masses must be finite and ≥ 0".into(),
            ));
        }
        let total_mass = crate::entropy::pairwise_sum(&mass);
        Ok(Self {
            bin_edges,
            mass,
            total_mass,
            kind,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }
    pub fn len(&self) -> usize {
        self.mass.len()
    }
    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Mass per unit angular frequency in each bin.
    pub fn densities(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .zip(&self.mass)
            .map(|(w, m)| m / (w[1] - w[0]))
            .collect()
    }

    /// Same bins with masses multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SpectraError> {
        Self::new(
            self.bin_edges.clone(),
            self.mass.iter().map(|m| m * factor).collect(),
            self.kind,
        )
    }

    /// Linear interpolation of the density between bin centres; zero outside
    /// the outermost centres.
    pub fn density_at(&self, omega: f64) -> f64 {
        let centers = self.centers();
        let dens = self.densities();
        let n = centers.len();
        if n == 1 {
            let (lo, hi) = (self.bin_edges[0], self.bin_edges[1]);
            return if omega >= lo && omega <= hi {
                dens[0]
            } else {
                0.0
            };
        }
        if omega < centers[0] || omega > centers[n - 1] {
            return 0.0;
        }
        let idx = match centers.binary_search_by(|c| c.partial_cmp(&omega).unwrap()) {
            Ok(i) => return dens[i],
            Err(i) => i,
        };
        let (x0, x1) = (centers[idx - 1], centers[idx]);
        let f = (omega - x0) / (x1 - x0);
        dens[idx - 1] * (1.0 - f) + dens[idx] * f
    }

    /// Writes CSV `omega_low,omega_high,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SpectraError> {
        let mut w = crate::io::csv_writer(out);
        let io = |e: csv::Error| SpectraError::Io(e.to_string());
        w.write_record(["omega_low", "omega_high", "mass"])
            .map_err(io)?;
        for (edge, m) in self.bin_edges.windows(2).zip(&self.mass) {
            w.write_record(&[edge[0].to_string(), edge[1].to_string(), m.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| SpectraError::Io(e.to_string()))
    }
}

/// Sums |c_k|² into bins of `bin_width` spanning the mode window.
pub fn bin_spectrum(
    state: &AmplitudeState,
    modes: &ModeSet,
    bin_width: f64,
) -> Result<SpectralDistribution, SpectraError> {
    if state.c_modes.len() != modes.len() {
        return Err(SpectraError::SizeMismatch {
            expected: modes.len(),
            found: state.c_modes.len(),
        });
    }
    let minimal = 2.0 * modes.mean_spacing();
    if !(bin_width >= minimal * (1.0 - 1e-12)) {
        return Err(SpectraError::UnderResolvedBins { bin_width, minimal });
    }
    let (low, high) = modes.window();
    let bins = ((high - low) / bin_width - 1e-9).ceil().max(1.0) as usize;
    let edges: Vec<f64> = (0..=bins).map(|i| low + i as f64 * bin_width).collect();
    let mut mass = vec![0.0; bins];
    for (m, c) in modes.entries().iter().zip(&state.c_modes) {
        let idx = (((m.omega - low) / bin_width).floor() as usize).min(bins - 1);
        mass[idx] += c.norm_sqr();
    }
    SpectralDistribution::new(edges, mass, SpectrumKind::QuantumProbability)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS residual of ln P.
    pub residual: f64,
    pub fit_window: (f64, f64),
    pub samples: usize,
}

/// Default decay-fit window [1/Γ, 4/Γ]: past the short-time quadratic
/// region, before the truncation floor.
pub fn default_decay_window(gamma: f64) -> (f64, f64) {
    (1.0 / gamma, 4.0 / gamma)
}

/// Least-squares line through (t, ln P) for samples with t in `window`.
pub fn fit_exponential(
    series: &[(f64, f64)],
    window: (f64, f64),
) -> Result<DecayFit, SpectraError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < 10 {
        return Err(SpectraError::TooFewSamples {
            required: 10,
            found: pts.len(),
        });
    }
    if let Some(&(time, value)) = pts.iter().find(|&&(_, p)| !(p > 0.0)) {
        return Err(SpectraError::NonPositive { time, value });
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(t, p) in &pts {
        let dt = t - t_mean;
        sxx += dt * dt;
        sxy += dt * (p.ln() - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let residual = (pts
        .iter()
        .map(|&(t, p)| (p.ln() - intercept - slope * t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        residual,
        fit_window: window,
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzFit {
    pub center: f64,
    pub hwhm: f64,
    /// Integrated mass A of the fitted line.
    pub amplitude: f64,
    /// RMS residual in density units.
    pub residual: f64,
    pub fit_window: (f64, f64),
    pub iterations: usize,
}

fn weighted_quantile(x: &[f64], w: &[f64], q: f64) -> f64 {
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        acc += wi;
        if acc >= q * total {
            return *xi;
        }
    }
    x[x.len() - 1]
}

fn lorentz(x: f64, amp: f64, center: f64, hwhm: f64) -> f64 {
    amp * hwhm / std::f64::consts::PI / ((x - center).powi(2) + hwhm * hwhm)
}

/// Fits A·(γ/π)/((ω − ω_c)² + γ²) to the bin densities over all bins.
pub fn fit_lorentzian(spec: &SpectralDistribution) -> Result<LorentzFit, SpectraError> {
    fit_lorentzian_in(spec, None)
}

/// [`fit_lorentzian`] restricted to bins whose centres lie in `window`.
pub fn fit_lorentzian_in(
    spec: &SpectralDistribution,
    window: Option<(f64, f64)>,
) -> Result<LorentzFit, SpectraError> {
    let centers = spec.centers();
    let dens = spec.densities();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ms = Vec::new();
    let mut span = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, (&x, &y)) in centers.iter().zip(&dens).enumerate() {
        if let Some((lo, hi)) = window {
            if x < lo || x > hi {
                continue;
            }
        }
        xs.push(x);
        ys.push(y);
        ms.push(spec.mass()[i]);
        span.0 = span.0.min(spec.bin_edges()[i]);
        span.1 = span.1.max(spec.bin_edges()[i + 1]);
    }
    let nonzero = ms.iter().filter(|m| **m > 0.0).count();
    if nonzero < 10 {
        return Err(SpectraError::TooFewSamples {
            required: 10,
            found: nonzero,
        });
    }

    // Robust starting point: weighted median and half inter-quartile range.
    let c0 = weighted_quantile(&xs, &ms, 0.5);
    let mut g0 = 0.5 * (weighted_quantile(&xs, &ms, 0.75) - weighted_quantile(&xs, &ms, 0.25));
    if !(g0 > 0.0) {
        g0 = spec.bin_edges()[1] - spec.bin_edges()[0];
    }
    let a0: f64 = ms.iter().sum();

    // Scaled parameters: A = a0·a, ω_c = c0 + g0·u, γ = g0·v.
    let mut theta = Vector3::new(1.0, 0.0, 1.0);
    let unpack = |t: &Vector3<f64>| (a0 * t[0], c0 + g0 * t[1], g0 * t[2]);
    let cost = |t: &Vector3<f64>| -> f64 {
        let (a, c, g) = unpack(t);
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (lorentz(x, a, c, g) - y).powi(2))
            .sum()
    };
    let mut current = cost(&theta);
    let mut mu = 1e-3;
    let max_iter = 500;
    let mut iterations = 0;
    let mut converged = current == 0.0;
    while !converged && iterations < max_iter {
        iterations += 1;
        let (a, c, g) = unpack(&theta);
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(&ys) {
            let dx = x - c;
            let d = dx * dx + g * g;
            let f = a * g / std::f64::consts::PI / d;
            let row = Vector3::new(
                a0 * g / std::f64::consts::PI / d,
                g0 * a * g / std::f64::consts::PI * 2.0 * dx / (d * d),
                g0 * a / std::f64::consts::PI * (d - 2.0 * g * g) / (d * d),
            );
            jtj += row * row.transpose();
            jtr += row * (f - y);
        }
        let mut improved = false;
        for _ in 0..60 {
            let mut lhs = jtj;
            for k in 0..3 {
                lhs[(k, k)] += mu * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = lhs.lu().solve(&(-jtr)) else {
                mu *= 10.0;
                continue;
            };
            let trial = theta + step;
            if !(trial[2] > 0.0) {
                mu *= 10.0;
                continue;
            }
            let c_trial = cost(&trial);
            if c_trial <= current {
                let rel_step = step.norm() / theta.norm().max(1e-300);
                let rel_cost = (current - c_trial) / current.max(1e-300);
                theta = trial;
                current = c_trial;
                mu = (mu / 10.0).max(1e-15);
                improved = true;
                if rel_step < 1e-15 || current == 0.0 || (rel_cost < 1e-15 && rel_step < 1e-10) {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            // no downhill step left: at a minimum to working precision
            converged = true;
        }
    }
    let residual = (current / xs.len() as f64).sqrt();
    if !converged {
        return Err(SpectraError::NoConvergence {
            iterations,
            residual,
        });
    }
    let (amplitude, center, hwhm) = unpack(&theta);
    Ok(LorentzFit {
        center,
        hwhm,
        amplitude,
        residual,
        fit_window: span,
        iterations,
    })
}
