//! Classical damped dipole: analytic trajectory, Larmor power, radiation
//! reaction, emission spectrum and the entropy of its energy distribution.
//!
//! The physical displacement is Re r(t). Cycle averages of cos² contribute a
//! factor ½, applied where energies are compared.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::entropy::{build_report, EntropyError, EntropyReport};
use crate::modes::ModeSet;
use crate::params::{tau_classical, v0_classical, ParamsError, PhysicalParams};
use crate::spectra::{SpectraError, SpectralDistribution, SpectrumKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("dt = {dt:.4e} under-samples the oscillation; use dt ≤ {max_dt:.4e}")]
    UnderSampled { dt: f64, max_dt: f64 },
    #[error("trajectory covers {covered:.4e} but at least {required:.4e} (10τ) is needed")]
    ShortCoverage { covered: f64, required: f64 },
    #[error("need at least {required} samples, got {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalTrajectory {
    pub samples: Vec<(f64, Complex64)>,
    pub r0: f64,
    pub omega0: f64,
    /// Damping time; infinite for an undamped oscillator.
    pub tau: f64,
    pub dt: f64,
}

impl ClassicalTrajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    fn re(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1.re).collect()
    }

    /// Writes CSV `t,re_r,im_r`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ClassicalError> {
        let mut w = crate::io::csv_writer(out);
        let io = |e: csv::Error| ClassicalError::Io(e.to_string());
        w.write_record(["t", "re_r", "im_r"]).map_err(io)?;
        for (t, r) in &self.samples {
            w.write_record(&[t.to_string(), r.re.to_string(), r.im.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| ClassicalError::Io(e.to_string()))
    }
}

/// Largest admissible sample spacing, 2π/(20ω₀).
pub fn max_dt(omega0: f64) -> f64 {
    2.0 * PI / (20.0 * omega0)
}

/// Samples r₀e^{−t/2τ}e^{iω₀t} on [0, t_final] with τ from the charge and
/// mass in `p`.
pub fn damped_trajectory(
    p: &PhysicalParams,
    r0: f64,
    t_final: f64,
    dt: f64,
) -> Result<ClassicalTrajectory, ClassicalError> {
    let tau = tau_classical(p)?;
    sample_damped(p.omega0(), tau, r0, 0.0, t_final, dt)
}

/// Samples the damped oscillation at t₀ + n·dt for n·dt ≤ duration. `tau`
/// may be infinite, in which case the coverage requirement is waived.
pub fn sample_damped(
    omega0: f64,
    tau: f64,
    r0: f64,
    t0: f64,
    duration: f64,
    dt: f64,
) -> Result<ClassicalTrajectory, ClassicalError> {
    if !(dt > 0.0) || !(duration > 0.0) || !(tau > 0.0) {
        return Err(ClassicalError::Invalid(
            "dt, duration and tau must be positive".into(),
        ));
    }
    if omega0 > 0.0 && dt > max_dt(omega0) * (1.0 + 1e-12) {
        return Err(ClassicalError::UnderSampled {
            dt,
            max_dt: max_dt(omega0),
        });
    }
    if tau.is_finite() && duration < 10.0 * tau * (1.0 - 1e-12) {
        return Err(ClassicalError::ShortCoverage {
            covered: duration,
            required: 10.0 * tau,
        });
    }
    let n = (duration / dt + 1e-9).floor() as usize + 1;
    let rate = if tau.is_finite() { 0.5 / tau } else { 0.0 };
    let samples = (0..n)
        .map(|i| {
            let t = t0 + i as f64 * dt;
            (t, Complex64::from_polar(r0 * (-rate * t).exp(), omega0 * t))
        })
        .collect();
    Ok(ClassicalTrajectory {
        samples,
        r0,
        omega0,
        tau,
        dt,
    })
}

fn require(n: usize, required: usize) -> Result<(), ClassicalError> {
    if n < required {
        Err(ClassicalError::TooFewSamples { required, found: n })
    } else {
        Ok(())
    }
}

// Fourth-order central stencils.
fn d1(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h)
}
fn d2(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2]) / (12.0 * h * h)
}
fn d3(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i + 3] + 8.0 * f[i + 2] - 13.0 * f[i + 1] + 13.0 * f[i - 1] - 8.0 * f[i - 2] + f[i - 3])
        / (8.0 * h * h * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerPoint {
    pub t: f64,
    pub p_ray: f64,
    pub e_mech: f64,
}

/// Larmor power e²ẍ²/(6πε₀c³) of the dipole e·Re r(t) together with the
/// mechanical energy ½m(ẋ² + ω₀²x²). Derivatives are central differences,
/// so the two samples at each end are omitted.
pub fn larmor_power(
    p: &PhysicalParams,
    traj: &ClassicalTrajectory,
) -> Result<Vec<PowerPoint>, ClassicalError> {
    require(traj.len(), 5)?;
    let x = traj.re();
    let h = traj.dt;
    let k = p.charge_e().powi(2) / (6.0 * PI * p.eps0() * p.c().powi(3));
    let w2 = p.omega0().powi(2);
    Ok((2..x.len() - 2)
        .map(|i| {
            let a = d2(&x, i, h);
            let v = d1(&x, i, h);
            PowerPoint {
                t: traj.samples[i].0,
                p_ray: k * a * a,
                e_mech: 0.5 * p.mass_m() * (v * v + w2 * x[i] * x[i]),
            }
        })
        .collect())
}

/// Writes CSV `t,p_ray,e_mech`.
pub fn write_power_csv<W: Write>(series: &[PowerPoint], out: W) -> Result<(), ClassicalError> {
    let mut w = crate::io::csv_writer(out);
    let io = |e: csv::Error| ClassicalError::Io(e.to_string());
    w.write_record(["t", "p_ray", "e_mech"]).map_err(io)?;
    for pt in series {
        w.write_record(&[
            pt.t.to_string(),
            pt.p_ray.to_string(),
            pt.e_mech.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| ClassicalError::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// ∫P dt over the power series (trapezoid rule).
    pub radiated: f64,
    pub mechanical_loss: f64,
    pub relative_error: f64,
    /// Cumulative radiated energy never decreases.
    pub monotone: bool,
}

pub fn energy_balance(series: &[PowerPoint]) -> Result<EnergyBalance, ClassicalError> {
    require(series.len(), 2)?;
    let mut radiated = 0.0;
    let mut monotone = true;
    for w in series.windows(2) {
        let step = 0.5 * (w[1].t - w[0].t) * (w[0].p_ray + w[1].p_ray);
        monotone &= step >= 0.0;
        radiated += step;
    }
    let mechanical_loss = series[0].e_mech - series[series.len() - 1].e_mech;
    Ok(EnergyBalance {
        radiated,
        mechanical_loss,
        relative_error: (radiated - mechanical_loss).abs() / mechanical_loss.abs(),
        monotone,
    })
}

/// Compares the dropped boundary term |[ẋẍ]| over one period starting at
/// `t_start` with the retained ∫ẍ² dt over the same period.
pub fn boundary_term_ratio(
    traj: &ClassicalTrajectory,
    t_start: f64,
) -> Result<f64, ClassicalError> {
    let x = traj.re();
    let h = traj.dt;
    let t0 = traj.samples.first().map(|s| s.0).unwrap_or(0.0);
    let i0 = ((t_start - t0) / h).round() as usize;
    let period = 2.0 * PI / traj.omega0;
    let steps = (period / h).round() as usize;
    let i1 = i0 + steps;
    if i0 < 2 || i1 + 2 >= x.len() {
        return Err(ClassicalError::Invalid(
            "period window must lie inside the trajectory interior".into(),
        ));
    }
    let va = |i: usize| d1(&x, i, h) * d2(&x, i, h);
    let boundary = (va(i1) - va(i0)).abs();
    let mut retained = 0.0;
    for i in i0..i1 {
        retained += 0.5 * h * (d2(&x, i, h).powi(2) + d2(&x, i + 1, h).powi(2));
    }
    Ok(boundary / retained)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcePoint {
    pub t: f64,
    /// e²/(6πε₀c³) times the jerk of Re r.
    pub f_jerk: f64,
    /// −m v/τ with τ from the parameters.
    pub f_visc: f64,
    pub v: f64,
}

pub fn radiative_force(
    p: &PhysicalParams,
    traj: &ClassicalTrajectory,
) -> Result<Vec<ForcePoint>, ClassicalError> {
    require(traj.len(), 7)?;
    let x = traj.re();
    let h = traj.dt;
    let k = p.charge_e().powi(2) / (6.0 * PI * p.eps0() * p.c().powi(3));
    let damping = match tau_classical(p) {
        Ok(tau) => p.mass_m() / tau,
        Err(_) => 0.0,
    };
    Ok((3..x.len() - 3)
        .map(|i| {
            let v = d1(&x, i, h);
            ForcePoint {
                t: traj.samples[i].0,
                f_jerk: k * d3(&x, i, h),
                f_visc: -damping * v,
                v,
            }
        })
        .collect())
}

/// Time-averaged power extracted by each force form, (⟨F_jerk·v⟩, ⟨F_visc·v⟩).
pub fn mean_force_power(forces: &[ForcePoint]) -> (f64, f64) {
    let n = forces.len().max(1) as f64;
    let jerk = forces.iter().map(|f| f.f_jerk * f.v).sum::<f64>() / n;
    let visc = forces.iter().map(|f| f.f_visc * f.v).sum::<f64>() / n;
    (jerk, visc)
}

/// Continuous Fourier transform X(ω) = Σ r(t_n) e^{−iωt_n} dt on the DFT
/// grid ω_j = 2πj/(N dt), ordered from negative to positive frequency.
pub fn fourier_transform(
    traj: &ClassicalTrajectory,
) -> Result<Vec<(f64, Complex64)>, ClassicalError> {
    fourier_transform_padded(traj, 1)
}

/// [`fourier_transform`] after zero-padding the samples to `padding` times
/// their length, which samples the same transform on a finer grid.
pub fn fourier_transform_padded(
    traj: &ClassicalTrajectory,
    padding: usize,
) -> Result<Vec<(f64, Complex64)>, ClassicalError> {
    require(traj.len(), 2)?;
    if padding == 0 {
        return Err(ClassicalError::Invalid("padding factor must be ≥ 1".into()));
    }
    let n = traj.len() * padding;
    let mut buf: Vec<Complex64> = traj.samples.iter().map(|s| s.1).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    let t0 = traj.samples[0].0;
    let dw = 2.0 * PI / (n as f64 * traj.dt);
    let half = n.div_ceil(2);
    let order = (half..n).chain(0..half);
    Ok(order
        .map(|j| {
            let signed = if j >= half {
                j as f64 - n as f64
            } else {
                j as f64
            };
            let omega = signed * dw;
            (
                omega,
                buf[j] * traj.dt * Complex64::from_polar(1.0, -omega * t0),
            )
        })
        .collect())
}

/// Energy fraction per DFT frequency bin. Bins are centred on the DFT
/// frequencies with width 2π/(N dt).
pub fn classical_spectrum(
    traj: &ClassicalTrajectory,
) -> Result<SpectralDistribution, ClassicalError> {
    classical_spectrum_padded(traj, 1)
}

/// [`classical_spectrum`] on the grid of a zero-padded transform.
pub fn classical_spectrum_padded(
    traj: &ClassicalTrajectory,
    padding: usize,
) -> Result<SpectralDistribution, ClassicalError> {
    if traj.tau.is_finite() {
        let covered = traj.samples.last().map(|s| s.0).unwrap_or(0.0)
            - traj.samples.first().map(|s| s.0).unwrap_or(0.0);
        if covered < 10.0 * traj.tau * (1.0 - 1e-12) {
            return Err(ClassicalError::ShortCoverage {
                covered,
                required: 10.0 * traj.tau,
            });
        }
    }
    let ft = fourier_transform_padded(traj, padding)?;
    let dw = 2.0 * PI / (ft.len() as f64 * traj.dt);
    let power: Vec<f64> = ft.iter().map(|(_, x)| x.norm_sqr()).collect();
    let total = crate::entropy::pairwise_sum(&power);
    if !(total > 0.0) {
        return Err(ClassicalError::Invalid(
            "trajectory carries no energy".into(),
        ));
    }
    let mut edges: Vec<f64> = ft.iter().map(|(w, _)| w - 0.5 * dw).collect();
    edges.push(ft[ft.len() - 1].0 + 0.5 * dw);
    let mass = power.iter().map(|p| p / total).collect();
    Ok(SpectralDistribution::new(
        edges,
        mass,
        SpectrumKind::ClassicalEnergy,
    )?)
}

/// Smallest padding factor giving frequency bins no wider than
/// `max_bin_width`.
pub fn padding_for(traj: &ClassicalTrajectory, max_bin_width: f64) -> usize {
    let natural = 2.0 * PI / (traj.len() as f64 * traj.dt);
    (natural / max_bin_width).ceil().max(1.0) as usize
}

/// Spreads a normalized spectrum over the modes of `modes`:
/// p_k = D(ω_k)·2πλ_k²/Γ(ω_k), where D is the spectral density and Γ(ω) the
/// golden-rule rate. This assigns each mode the share of energy it would
/// receive from a source of that line shape. The coherence volume in
/// `s_volume_ratio` is the classical 6πτc³/ω₀².
pub fn classical_field_entropy(
    spec: &SpectralDistribution,
    modes: &ModeSet,
    p: &PhysicalParams,
) -> Result<EntropyReport, ClassicalError> {
    if !((spec.total_mass() - 1.0).abs() < 1e-9) {
        return Err(ClassicalError::Invalid(format!(
            "spectrum must be normalized, total mass is {}",
            spec.total_mass()
        )));
    }
    let probs: Vec<f64> = modes
        .entries()
        .iter()
        .map(|m| {
            let rho = modes.coupling_density(m.omega);
            if rho > 0.0 {
                spec.density_at(m.omega) * m.coupling * m.coupling / rho
            } else {
                0.0
            }
        })
        .collect();
    let v0 = v0_classical(p).ok();
    Ok(build_report(&probs, 0.0, modes, v0)?)
}
