//! Single-excitation dynamics of a two-level atom coupled to a [`ModeSet`].
//!
//! The state is c₀|e,0⟩ + Σ c_k |g,1_k⟩ and obeys
//!
//! ```text
//! ċ₀  = −iω₀ c₀ − i Σ λ_k c_k
//! ċ_k = −iω_k c_k − i λ_k c₀
//! ```
//!
//! The excitation number commutes with the Hamiltonian, so removing the
//! common carrier e^{−iω₀t} (the rotating frame) is exact: the rotating-frame
//! equations only contain detunings ω_k − ω₀ and the integrator steps on the
//! Γ scale instead of the ω₀ scale. Lab-frame amplitudes differ from the
//! rotating-frame ones by that global phase only.
//!
//! Three routes are provided: an adaptive Dormand–Prince 5(4) integrator,
//! exact diagonalization of the (N+1)×(N+1) Hamiltonian as an independent
//! oracle, and the closed-form long-time amplitudes
//! c_k → λ_k / ((ω_k − ω₀) + iΓ/2).

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modes::ModeSet;
use crate::params::PhysicalParams;

/// Largest mode count accepted by the diagonalization oracle.
pub const ORACLE_MAX_MODES: usize = 5000;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("step size underflow at t = {t}: h = {h:.3e}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {0} integration steps")]
    TooManySteps(usize),
    #[error("oracle refuses {modes} modes; the dense cap is {cap}")]
    OracleTooLarge { modes: usize, cap: usize },
    #[error("state has {found} mode amplitudes but the mode set has {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid sample times: {0}")]
    BadTimes(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Lab,
    /// Interaction picture with respect to ω₀ times the excitation number.
    Rotating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState {
    pub time: f64,
    pub c0: Complex64,
    pub c_modes: Vec<Complex64>,
    pub frame: Frame,
}

impl AmplitudeState {
    /// Excited atom, empty field.
    pub fn excited(n_modes: usize, frame: Frame) -> Self {
        Self {
            time: 0.0,
            c0: Complex64::new(1.0, 0.0),
            c_modes: vec![Complex64::new(0.0, 0.0); n_modes],
            frame,
        }
    }

    pub fn excited_probability(&self) -> f64 {
        self.c0.norm_sqr()
    }

    /// Σ|c_k|², the photon probability carried by the enumerated modes.
    pub fn field_probability(&self) -> f64 {
        self.c_modes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// |c₀|² + Σ|c_k|².
    pub fn norm(&self) -> f64 {
        self.excited_probability() + self.field_probability()
    }

    pub fn mode_probabilities(&self) -> Vec<f64> {
        self.c_modes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Re-expresses the amplitudes in `frame`. States at infinite time carry
    /// no meaningful global phase and are only retagged.
    pub fn to_frame(&self, frame: Frame, omega0: f64) -> Self {
        if frame == self.frame {
            return self.clone();
        }
        let phase = if self.time.is_finite() {
            let sign = match frame {
                Frame::Lab => -1.0,
                Frame::Rotating => 1.0,
            };
            Complex64::from_polar(1.0, sign * omega0 * self.time)
        } else {
            Complex64::new(1.0, 0.0)
        };
        Self {
            time: self.time,
            c0: self.c0 * phase,
            c_modes: self.c_modes.iter().map(|c| c * phase).collect(),
            frame,
        }
    }

    pub fn conjugated(&self) -> Self {
        Self {
            time: self.time,
            c0: self.c0.conj(),
            c_modes: self.c_modes.iter().map(|c| c.conj()).collect(),
            frame: self.frame,
        }
    }

    fn as_vector(&self) -> Vec<Complex64> {
        let mut y = Vec::with_capacity(self.c_modes.len() + 1);
        y.push(self.c0);
        y.extend_from_slice(&self.c_modes);
        y
    }

    fn from_vector(time: f64, y: &[Complex64], frame: Frame) -> Self {
        Self {
            time,
            c0: y[0],
            c_modes: y[1..].to_vec(),
            frame,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub frame: Frame,
    pub max_steps: usize,
    /// Norm deviation beyond which an evolution is flagged.
    pub norm_tolerance: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            frame: Frame::Rotating,
            max_steps: 50_000_000,
            norm_tolerance: 1e-6,
        }
    }
}

/// Sampled trajectory of amplitude states plus integrator diagnostics.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub states: Vec<AmplitudeState>,
    pub max_norm_drift: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Set when the norm drifted beyond the configured tolerance.
    pub norm_flagged: bool,
}

impl Evolution {
    pub fn excited_series(&self) -> Vec<(f64, f64)> {
        self.states
            .iter()
            .map(|s| (s.time, s.excited_probability()))
            .collect()
    }

    /// Writes CSV `t,re_c0,im_c0,p_excited,norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DynamicsError> {
        let mut w = crate::io::csv_writer(out);
        let io = |e: csv::Error| DynamicsError::Io(e.to_string());
        w.write_record(["t", "re_c0", "im_c0", "p_excited", "norm"])
            .map_err(io)?;
        for s in &self.states {
            w.write_record(&[
                s.time.to_string(),
                s.c0.re.to_string(),
                s.c0.im.to_string(),
                s.excited_probability().to_string(),
                s.norm().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| DynamicsError::Io(e.to_string()))
    }
}

/// Writes CSV `omega,re_c,im_c,prob` for one state.
pub fn write_mode_amplitudes<W: Write>(
    state: &AmplitudeState,
    modes: &ModeSet,
    out: W,
) -> Result<(), DynamicsError> {
    let mut w = crate::io::csv_writer(out);
    let io = |e: csv::Error| DynamicsError::Io(e.to_string());
    w.write_record(["omega", "re_c", "im_c", "prob"])
        .map_err(io)?;
    for (m, c) in modes.entries().iter().zip(&state.c_modes) {
        w.write_record(&[
            m.omega.to_string(),
            c.re.to_string(),
            c.im.to_string(),
            c.norm_sqr().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| DynamicsError::Io(e.to_string()))
}

/// The arrowhead generator −i·H of the single-excitation sector.
struct Generator {
    atom: f64,
    diag: Vec<f64>,
    coupling: Vec<f64>,
}

impl Generator {
    fn new(modes: &ModeSet, omega0: f64, frame: Frame) -> Self {
        let shift = match frame {
            Frame::Lab => 0.0,
            Frame::Rotating => omega0,
        };
        Self {
            atom: omega0 - shift,
            diag: modes.entries().iter().map(|m| m.omega - shift).collect(),
            coupling: modes.entries().iter().map(|m| m.coupling).collect(),
        }
    }

    fn apply(&self, y: &[Complex64], out: &mut [Complex64]) {
        let c0 = y[0];
        let mut sum = Complex64::new(0.0, 0.0);
        for ((lam, w), (yk, dk)) in self
            .coupling
            .iter()
            .zip(&self.diag)
            .zip(y[1..].iter().zip(out[1..].iter_mut()))
        {
            sum += yk * lam;
            *dk = -I * (yk * w + c0 * lam);
        }
        out[0] = -I * (c0 * self.atom + sum);
    }

    fn spectral_radius_bound(&self) -> f64 {
        let lam2: f64 = self.coupling.iter().map(|l| l * l).sum();
        let d = self
            .diag
            .iter()
            .fold(self.atom.abs(), |acc, w| acc.max(w.abs()));
        d + lam2.sqrt()
    }
}

// Dormand–Prince 5(4) tableau. The generator is time independent, so the
// node offsets c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri5 {
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
    y_new: Vec<Complex64>,
}

impl Dopri5 {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
        }
    }

    /// One trial step from (y, k[0] = f(y)); leaves the candidate in `y_new`,
    /// its derivative in k[6] and returns the scaled error norm.
    fn trial(&mut self, g: &Generator, y: &[Complex64], h: f64, rtol: f64, atol: f64) -> f64 {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $($coef:expr => $src:expr),+) => {{
                for i in 0..n {
                    self.tmp[i] = y[i] $(+ self.k[$src][i] * (h * $coef))+;
                }
                g.apply(&self.tmp, &mut self.k[$dst]);
            }};
        }
        stage!(1, A21 => 0);
        stage!(2, A31 => 0, A32 => 1);
        stage!(3, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            self.y_new[i] = y[i]
                + (self.k[0][i] * A71
                    + self.k[2][i] * A73
                    + self.k[3][i] * A74
                    + self.k[4][i] * A75
                    + self.k[5][i] * A76)
                    * h;
        }
        g.apply(&self.y_new, &mut self.k[6]);
        let mut acc = 0.0;
        for i in 0..n {
            let err = (self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7)
                * h;
            let sc = atol + rtol * y[i].norm().max(self.y_new[i].norm());
            acc += (err.norm() / sc).powi(2);
        }
        (acc / n as f64).sqrt()
    }
}

fn check_times(times: &[f64], start: f64) -> Result<(), DynamicsError> {
    if times.is_empty() {
        return Err(DynamicsError::BadTimes("no sample times".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(DynamicsError::BadTimes("non-finite sample time".into()));
    }
    if times[0] < start {
        return Err(DynamicsError::BadTimes(format!(
            "first sample {} precedes the initial time {start}",
            times[0]
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(DynamicsError::BadTimes(
            "sample times must be sorted".into(),
        ));
    }
    Ok(())
}

/// `n` equally spaced sample times on [0, t_final], endpoints included.
pub fn uniform_times(t_final: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| t_final * i as f64 / (n - 1) as f64)
        .collect()
}

/// Integrates from the excited atom and empty field, sampling at `times`.
pub fn evolve(
    modes: &ModeSet,
    params: &PhysicalParams,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Evolution, DynamicsError> {
    let initial = AmplitudeState::excited(modes.len(), opts.frame);
    evolve_from(modes, params, &initial, times, opts)
}

/// Integrates from an arbitrary state. The state is converted to the
/// integration frame first; sample times are absolute.
pub fn evolve_from(
    modes: &ModeSet,
    params: &PhysicalParams,
    initial: &AmplitudeState,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Evolution, DynamicsError> {
    if initial.c_modes.len() != modes.len() {
        return Err(DynamicsError::SizeMismatch {
            expected: modes.len(),
            found: initial.c_modes.len(),
        });
    }
    check_times(times, initial.time)?;
    let omega0 = params.omega0();
    let start = initial.to_frame(opts.frame, omega0);
    let g = Generator::new(modes, omega0, opts.frame);
    let n = modes.len() + 1;
    let mut y = start.as_vector();
    let norm0 = start.norm();
    let mut t = start.time;
    let mut solver = Dopri5::new(n);
    g.apply(&y, &mut solver.k[0]);

    let span = times[times.len() - 1] - t;
    let mut h = (0.05 / g.spectral_radius_bound().max(1e-300)).min(span.max(1e-300));
    let mut states = Vec::with_capacity(times.len());
    let mut max_drift: f64 = 0.0;
    let (mut accepted, mut rejected) = (0usize, 0usize);

    for &target in times {
        while t < target {
            if accepted + rejected >= opts.max_steps {
                return Err(DynamicsError::TooManySteps(opts.max_steps));
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            let err = solver.trial(&g, &y, step, opts.rtol, opts.atol);
            if err <= 1.0 {
                accepted += 1;
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut solver.y_new);
                solver.k.swap(0, 6);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !clipped || step * factor > h {
                    h = step * factor;
                }
            } else {
                rejected += 1;
                let factor = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h = step * factor;
                if h < 1e-13 * t.abs().max(1.0) {
                    return Err(DynamicsError::StepUnderflow { t, h });
                }
            }
        }
        let state = AmplitudeState::from_vector(target, &y, opts.frame);
        max_drift = max_drift.max((state.norm() - norm0).abs());
        states.push(state);
    }

    Ok(Evolution {
        states,
        max_norm_drift: max_drift,
        accepted_steps: accepted,
        rejected_steps: rejected,
        norm_flagged: max_drift > opts.norm_tolerance,
    })
}

/// Exact propagator of the rotating-frame Hamiltonian from dense
/// diagonalization.
pub struct ExactPropagator {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
    hamiltonian: DMatrix<f64>,
}

impl ExactPropagator {
    pub fn new(modes: &ModeSet, params: &PhysicalParams) -> Result<Self, DynamicsError> {
        if modes.len() > ORACLE_MAX_MODES {
            return Err(DynamicsError::OracleTooLarge {
                modes: modes.len(),
                cap: ORACLE_MAX_MODES,
            });
        }
        let n = modes.len() + 1;
        let omega0 = params.omega0();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for (k, m) in modes.entries().iter().enumerate() {
            h[(k + 1, k + 1)] = m.omega - omega0;
            h[(0, k + 1)] = m.coupling;
            h[(k + 1, 0)] = m.coupling;
        }
        let eig = SymmetricEigen::new(h.clone());
        Ok(Self {
            energies: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
            hamiltonian: h,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// State at time `t` starting from the excited atom.
    pub fn state_at(&self, t: f64) -> AmplitudeState {
        let n = self.energies.len();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (j, &e) in self.energies.iter().enumerate() {
            let a = self.vectors[(0, j)] * Complex64::from_polar(1.0, -e * t);
            let col = self.vectors.column(j);
            for (yi, v) in y.iter_mut().zip(col.iter()) {
                *yi += a * v;
            }
        }
        AmplitudeState::from_vector(t, &y, Frame::Rotating)
    }

    /// ⟨ψ|H|ψ⟩ in the rotating frame.
    pub fn energy_expectation(&self, state: &AmplitudeState) -> f64 {
        let y = state.as_vector();
        let n = y.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let hij = self.hamiltonian[(i, j)];
                if hij != 0.0 {
                    row += y[j] * hij;
                }
            }
            acc += y[i].conj() * row;
        }
        acc.re
    }
}

/// Exact amplitudes at `times` by dense diagonalization (rotating frame).
pub fn evolve_oracle(
    modes: &ModeSet,
    params: &PhysicalParams,
    times: &[f64],
) -> Result<Vec<AmplitudeState>, DynamicsError> {
    let prop = ExactPropagator::new(modes, params)?;
    Ok(times.iter().map(|&t| prop.state_at(t)).collect())
}

/// Long-time amplitudes c_k = λ_k / ((ω_k − ω₀) + iΓ/2), c₀ = 0, with Γ the
/// rate the mode set was built for. The global phase e^{−iω_k t} is dropped.
pub fn asymptotic_amplitudes(modes: &ModeSet, params: &PhysicalParams) -> AmplitudeState {
    let half = modes.gamma() / 2.0;
    let omega0 = params.omega0();
    AmplitudeState {
        time: f64::INFINITY,
        c0: Complex64::new(0.0, 0.0),
        c_modes: modes
            .entries()
            .iter()
            .map(|m| m.coupling / Complex64::new(m.omega - omega0, half))
            .collect(),
        frame: Frame::Rotating,
    }
}

/// Evolves to `t`, conjugates, evolves for another `t` and returns the largest
/// amplitude deviation from the (conjugated) initial state.
pub fn time_reversal_error(
    modes: &ModeSet,
    params: &PhysicalParams,
    t: f64,
    opts: &IntegratorOptions,
) -> Result<f64, DynamicsError> {
    let forward = evolve(modes, params, &[t], opts)?;
    let mut back = forward.states[0].conjugated();
    back.time = 0.0;
    let returned = evolve_from(modes, params, &back, &[t], opts)?;
    let end = returned.states[0].to_frame(opts.frame, params.omega0());
    let initial = AmplitudeState::excited(modes.len(), opts.frame);
    let mut worst = (end.c0 - initial.c0.conj()).norm();
    for (a, b) in end.c_modes.iter().zip(&initial.c_modes) {
        worst = worst.max((a - b.conj()).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Revival {
    /// Last time before the peak at which |c₀|² is still within
    /// [`ONSET_FRACTION`] of the rise above the preceding minimum, where
    /// reabsorption starts.
    pub onset: f64,
    pub peak_time: f64,
    pub peak_probability: f64,
    /// Rise of |c₀|² from the preceding minimum to the peak.
    pub rise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceOptions {
    pub samples: usize,
    /// Minimal rise, as a fraction of the series maximum, for a local maximum
    /// to count as a revival.
    pub threshold: f64,
    pub integrator: IntegratorOptions,
}

impl Default for RecurrenceOptions {
    fn default() -> Self {
        Self {
            samples: 4001,
            threshold: 0.1,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecurrenceScan {
    pub revivals: Vec<Revival>,
    pub evolution: Evolution,
}

/// Fraction of the rise that marks the start of a revival.
pub const ONSET_FRACTION: f64 = 1e-3;

/// Local maxima of a sampled series that rise at least `threshold × max`
/// above the lowest point since the previous revival.
pub fn find_revivals(series: &[(f64, f64)], threshold: f64) -> Vec<Revival> {
    let peak = series.iter().fold(0.0f64, |a, &(_, p)| a.max(p));
    let min_rise = threshold * peak;
    let mut out = Vec::new();
    if series.len() < 3 || peak <= 0.0 || min_rise <= 0.0 {
        return out;
    }
    let mut valley = 0;
    for i in 1..series.len() - 1 {
        let p = series[i].1;
        if p < series[valley].1 {
            valley = i;
        }
        let is_max = p > series[i - 1].1 && p >= series[i + 1].1;
        let rise = p - series[valley].1;
        if is_max && rise >= min_rise {
            // the floor before a revival can be flat, so walk back from the
            // peak rather than trusting the position of the minimum
            let level = series[valley].1 + ONSET_FRACTION * rise;
            let onset = (valley..i)
                .rev()
                .find(|&j| series[j].1 <= level)
                .unwrap_or(valley);
            out.push(Revival {
                onset: series[onset].0,
                peak_time: series[i].0,
                peak_probability: p,
                rise,
            });
            valley = i;
        }
    }
    out
}

/// Samples |c₀(t)|² on [0, t_final] and reports revivals of the excited
/// population caused by the photon returning after a round trip.
pub fn recurrence_scan(
    modes: &ModeSet,
    params: &PhysicalParams,
    t_final: f64,
    opts: &RecurrenceOptions,
) -> Result<RecurrenceScan, DynamicsError> {
    let times = uniform_times(t_final, opts.samples);
    let evolution = evolve(modes, params, &times, &opts.integrator)?;
    let revivals = find_revivals(&evolution.excited_series(), opts.threshold);
    Ok(RecurrenceScan {
        revivals,
        evolution,
    })
}
