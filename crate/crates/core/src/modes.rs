//! Discretized cavity field modes.
//!
//! Periodic boundary conditions are used in both dimensions: wave vectors sit
//! on the lattice k = 2πn/L. In 1D each frequency level carries the two
//! propagation directions ±k and a frequency-flat coupling calibrated with
//! the golden rule Γ = 2πλ²ρ(ω₀). In 3D every lattice vector in the spectral
//! shell carries two transverse polarizations with the dipole coupling
//! λ = |d·u| √(ω / 2ħε₀V), dipole along ẑ.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{gamma_ww, Dimension, PhysicalParams};

/// Default half-width of the enumerated window, in units of Γ.
pub const DEFAULT_WINDOW_WIDTHS: f64 = 50.0;
/// Minimum number of modes per HWHM accepted by the 1D resolution check.
pub const MIN_MODES_PER_GAMMA: f64 = 5.0;
/// Minimum number of lattice vectors in a 3D shell.
pub const MIN_SHELL_POINTS: usize = 1000;
pub const DEFAULT_MEMORY_CAP_BYTES: usize = 2 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error(
        "mode spacing {spacing:.3e} is coarser than Γ/{per_gamma} = {limit:.3e}; \
         use box_length ≥ {min_box_length:.6e}"
    )]
    UnderResolved {
        spacing: f64,
        limit: f64,
        per_gamma: f64,
        min_box_length: f64,
    },
    #[error("spectral shell holds {found} lattice vectors, need at least {required}")]
    SparseShell { found: usize, required: usize },
    #[error("estimated {estimated} modes need ~{bytes} bytes, above the cap of {cap} bytes")]
    MemoryCap {
        estimated: usize,
        bytes: usize,
        cap: usize,
    },
    #[error("frequency window [{low}, {high}] reaches non-positive frequencies")]
    WindowBelowZero { low: f64, high: f64 },
    #[error("decay rate must be positive to size the window, got {0}")]
    ZeroRate(f64),
    #[error("frequency {omega} lies outside the window [{low}, {high}]")]
    OutsideWindow { omega: f64, low: f64, high: f64 },
    #[error("invalid mode table: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Choice of transverse polarization pair for 3D modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolarizationBasis {
    /// First polarization along the transverse projection of the dipole; the
    /// second one is dark (zero coupling).
    #[default]
    DipoleAligned,
    /// Pair built from the lattice axis with the smallest |k̂| component.
    SmallestAxis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOptions {
    pub window_widths: f64,
    /// 1D only: decay rate the flat coupling is calibrated to. Defaults to
    /// the Weisskopf–Wigner rate of the parameters.
    pub gamma_target: Option<f64>,
    /// 1D only: reject lattices with fewer than five modes per Γ.
    pub enforce_resolution: bool,
    pub polarization: PolarizationBasis,
    pub memory_cap_bytes: usize,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self {
            window_widths: DEFAULT_WINDOW_WIDTHS,
            gamma_target: None,
            enforce_resolution: true,
            polarization: PolarizationBasis::default(),
            memory_cap_bytes: DEFAULT_MEMORY_CAP_BYTES,
        }
    }
}

impl ModeOptions {
    pub fn with_window(window_widths: f64) -> Self {
        Self {
            window_widths,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub omega: f64,
    /// Number of physical modes this entry stands for (1 unless collective).
    pub weight: u32,
    pub coupling: f64,
    pub direction: Option<[f64; 3]>,
    pub polarization: Option<u8>,
}

impl Mode {
    /// Angle between the wave vector and the dipole axis ẑ. Modes without a
    /// direction (1D, collective) are reported at π/2.
    pub fn theta(&self) -> f64 {
        match self.direction {
            Some(d) => d[2].clamp(-1.0, 1.0).acos(),
            None => PI / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum CouplingModel {
    /// λ² constant over the window.
    Flat { coupling_sq: f64 },
    /// λ² ∝ ω sin²θ from the dipole coupling.
    Dipole { dipole_d: f64 },
}

#[derive(Debug, Clone)]
pub struct ModeSet {
    dimension: Dimension,
    entries: Vec<Mode>,
    window: (f64, f64),
    gamma: f64,
    omega0: f64,
    box_length: f64,
    c: f64,
    hbar: f64,
    eps0: f64,
    model: CouplingModel,
    dos_samples: Vec<(f64, f64)>,
}

/// JSON summary of a mode set.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSummary {
    pub dimension: u8,
    pub entries: usize,
    pub physical_modes: u64,
    pub window: (f64, f64),
    pub gamma: f64,
    pub box_length: f64,
    pub mean_spacing: f64,
    pub coupling_sq_sum: f64,
    pub density_of_states: Vec<(f64, f64)>,
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Enumerates the 1D periodic lattice inside [ω₀ − WΓ, ω₀ + WΓ).
pub fn enumerate_1d(p: &PhysicalParams, opts: &ModeOptions) -> Result<ModeSet, ModeError> {
    let gamma = opts.gamma_target.unwrap_or_else(|| gamma_ww(p));
    if !(gamma > 0.0) {
        return Err(ModeError::ZeroRate(gamma));
    }
    let c = p.c();
    let length = p.box_length();
    let spacing = 2.0 * PI * c / length;
    let limit = gamma / MIN_MODES_PER_GAMMA;
    if opts.enforce_resolution && spacing > limit * (1.0 + 1e-12) {
        return Err(ModeError::UnderResolved {
            spacing,
            limit,
            per_gamma: MIN_MODES_PER_GAMMA,
            min_box_length: 2.0 * PI * c * MIN_MODES_PER_GAMMA / gamma,
        });
    }
    let half = opts.window_widths * gamma;
    let low = p.omega0() - half;
    let n_lo = snap(low / spacing).ceil() as i64;
    let levels = snap(2.0 * half / spacing).floor() as i64;
    if n_lo < 1 {
        return Err(ModeError::WindowBelowZero {
            low,
            high: p.omega0() + half,
        });
    }
    if levels < 1 {
        return Err(ModeError::UnderResolved {
            spacing,
            limit,
            per_gamma: MIN_MODES_PER_GAMMA,
            min_box_length: 2.0 * PI * c * MIN_MODES_PER_GAMMA / gamma,
        });
    }
    let density = length / (PI * c);
    let coupling_sq = gamma / (2.0 * PI * density);
    let coupling = coupling_sq.sqrt();
    let mut entries = Vec::with_capacity(2 * levels as usize);
    for n in n_lo..n_lo + levels {
        let omega = n as f64 * spacing;
        for sign in [1.0, -1.0] {
            entries.push(Mode {
                omega,
                weight: 1,
                coupling,
                direction: Some([sign, 0.0, 0.0]),
                polarization: None,
            });
        }
    }
    let first = entries[0].omega;
    let last = entries[entries.len() - 1].omega;
    let mut set = ModeSet {
        dimension: Dimension::One,
        entries,
        window: (first - spacing / 2.0, last + spacing / 2.0),
        gamma,
        omega0: p.omega0(),
        box_length: length,
        c,
        hbar: p.hbar(),
        eps0: p.eps0(),
        model: CouplingModel::Flat { coupling_sq },
        dos_samples: Vec::new(),
    };
    set.tabulate_dos();
    Ok(set)
}

/// Transverse polarization pair for the unit wave vector `k_hat`.
pub fn polarization_pair(k_hat: [f64; 3], basis: PolarizationBasis) -> [[f64; 3]; 2] {
    if basis == PolarizationBasis::DipoleAligned {
        let dz = k_hat[2];
        let t = [-dz * k_hat[0], -dz * k_hat[1], 1.0 - dz * k_hat[2]];
        let norm = dot(t, t).sqrt();
        if norm > 1e-12 {
            let u1 = scale(t, 1.0 / norm);
            return [u1, cross(k_hat, u1)];
        }
    }
    // smallest-component axis; ties resolve to the lowest index
    let mut axis = 0;
    for j in 1..3 {
        if k_hat[j].abs() < k_hat[axis].abs() {
            axis = j;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let proj = dot(e, k_hat);
    let t = [
        e[0] - proj * k_hat[0],
        e[1] - proj * k_hat[1],
        e[2] - proj * k_hat[2],
    ];
    let u1 = scale(t, 1.0 / dot(t, t).sqrt());
    [u1, cross(k_hat, u1)]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Shell-volume estimate of the number of modes (two polarizations) with
/// frequency in [low, high].
pub fn estimate_shell_modes(low: f64, high: f64, box_length: f64, c: f64) -> f64 {
    let r_lo = (low / c) * box_length / (2.0 * PI);
    let r_hi = (high / c) * box_length / (2.0 * PI);
    2.0 * 4.0 * PI / 3.0 * (r_hi.powi(3) - r_lo.max(0.0).powi(3))
}

/// Enumerates every lattice vector with ω in [ω₀ − WΓ, ω₀ + WΓ], two
/// polarizations each. Entries are ordered by |n|², then n, then polarization.
pub fn enumerate_3d(p: &PhysicalParams, opts: &ModeOptions) -> Result<ModeSet, ModeError> {
    let gamma = gamma_ww(p);
    if !(gamma > 0.0) {
        return Err(ModeError::ZeroRate(gamma));
    }
    let c = p.c();
    let length = p.box_length();
    let half = opts.window_widths * gamma;
    let (low, high) = (p.omega0() - half, p.omega0() + half);
    if low <= 0.0 {
        return Err(ModeError::WindowBelowZero { low, high });
    }
    let estimated = estimate_shell_modes(low, high, length, c).ceil() as usize;
    let bytes = estimated.saturating_mul(std::mem::size_of::<Mode>());
    if bytes > opts.memory_cap_bytes {
        return Err(ModeError::MemoryCap {
            estimated,
            bytes,
            cap: opts.memory_cap_bytes,
        });
    }

    let to_lattice = length / (2.0 * PI * c);
    let r_lo = low * to_lattice;
    let r_hi = high * to_lattice;
    let m_min = snap(r_lo * r_lo).ceil() as i64;
    let m_max = snap(r_hi * r_hi).floor() as i64;
    let n_max = (m_max as f64).sqrt().floor() as i64;

    let mut points: Vec<(i64, [i64; 3])> = (-n_max..=n_max)
        .into_par_iter()
        .flat_map_iter(|nx| {
            let mut local = Vec::new();
            for ny in -n_max..=n_max {
                let base = nx * nx + ny * ny;
                if base > m_max {
                    continue;
                }
                let z_hi = isqrt(m_max - base);
                let lo_sq = m_min - base;
                let z_lo = if lo_sq <= 0 { 0 } else { isqrt_ceil(lo_sq) };
                if z_lo > z_hi {
                    continue;
                }
                for nz in -z_hi..=z_hi {
                    if nz.abs() >= z_lo {
                        local.push((base + nz * nz, [nx, ny, nz]));
                    }
                }
            }
            local
        })
        .collect();
    if points.is_empty() || points.len() < MIN_SHELL_POINTS {
        return Err(ModeError::SparseShell {
            found: points.len(),
            required: MIN_SHELL_POINTS,
        });
    }
    points.par_sort_unstable();

    let volume = length.powi(3);
    let d = p.dipole_d();
    let amp = |omega: f64| (omega / (2.0 * p.hbar() * p.eps0() * volume)).sqrt();
    let entries: Vec<Mode> = points
        .par_iter()
        .flat_map_iter(|&(m, n)| {
            let norm = (m as f64).sqrt();
            let omega = norm / to_lattice;
            let k_hat = [n[0] as f64 / norm, n[1] as f64 / norm, n[2] as f64 / norm];
            let pols = polarization_pair(k_hat, opts.polarization);
            let a = amp(omega);
            (0..2u8).map(move |s| Mode {
                omega,
                weight: 1,
                coupling: (d * pols[s as usize][2]).abs() * a,
                direction: Some(k_hat),
                polarization: Some(s),
            })
        })
        .collect();

    let mut set = ModeSet {
        dimension: Dimension::Three,
        entries,
        window: (low, high),
        gamma,
        omega0: p.omega0(),
        box_length: length,
        c,
        hbar: p.hbar(),
        eps0: p.eps0(),
        model: CouplingModel::Dipole { dipole_d: d },
        dos_samples: Vec::new(),
    };
    set.tabulate_dos();
    Ok(set)
}

fn isqrt(v: i64) -> i64 {
    let mut r = (v as f64).sqrt() as i64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

fn isqrt_ceil(v: i64) -> i64 {
    let r = isqrt(v);
    if r * r == v {
        r
    } else {
        r + 1
    }
}

/// Analytic density of states ρ(ω) of the set's lattice.
pub fn density_of_states(m: &ModeSet, omega: f64) -> Result<f64, ModeError> {
    let (low, high) = m.window;
    if !(omega >= low && omega <= high) {
        return Err(ModeError::OutsideWindow { omega, low, high });
    }
    Ok(m.dos_unchecked(omega))
}

impl ModeSet {
    /// Wraps an explicit mode table. Entries must be sorted by frequency and
    /// carry finite, non-negative couplings.
    pub fn from_entries(
        dimension: Dimension,
        entries: Vec<Mode>,
        gamma: f64,
        p: &PhysicalParams,
    ) -> Result<Self, ModeError> {
        if entries.is_empty() {
            return Err(ModeError::Invalid("no modes".into()));
        }
        for w in entries.windows(2) {
            if w[1].omega < w[0].omega {
                return Err(ModeError::Invalid("entries not sorted by frequency".into()));
            }
        }
        if let Some(bad) = entries
            .iter()
            .find(|m| !(m.coupling.is_finite() && m.coupling >= 0.0) || !m.omega.is_finite())
        {
            return Err(ModeError::Invalid(format!("bad mode {bad:?}")));
        }
        let first = entries[0].omega;
        let last = entries[entries.len() - 1].omega;
        let pad = ((last - first) * 1e-9).max(1e-12);
        let coupling_sq = entries[0].coupling.powi(2);
        let mut set = ModeSet {
            dimension,
            entries,
            window: (first - pad, last + pad),
            gamma,
            omega0: p.omega0(),
            box_length: p.box_length(),
            c: p.c(),
            hbar: p.hbar(),
            eps0: p.eps0(),
            model: match dimension {
                Dimension::One => CouplingModel::Flat { coupling_sq },
                Dimension::Three => CouplingModel::Dipole {
                    dipole_d: p.dipole_d(),
                },
            },
            dos_samples: Vec::new(),
        };
        set.tabulate_dos();
        Ok(set)
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }
    pub fn entries(&self) -> &[Mode] {
        &self.entries
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn window(&self) -> (f64, f64) {
        self.window
    }
    /// Decay rate this set was built for (calibration target in 1D,
    /// Weisskopf–Wigner rate in 3D).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn box_length(&self) -> f64 {
        self.box_length
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn density_of_states_samples(&self) -> &[(f64, f64)] {
        &self.dos_samples
    }

    pub fn physical_modes(&self) -> u64 {
        self.entries.iter().map(|m| m.weight as u64).sum()
    }

    /// Lattice frequency spacing 2πc/L of a single axis.
    pub fn lattice_spacing(&self) -> f64 {
        2.0 * PI * self.c / self.box_length
    }

    /// Mean gap between distinct mode frequencies.
    pub fn mean_spacing(&self) -> f64 {
        let mut distinct = 0usize;
        let mut prev = f64::NAN;
        for m in &self.entries {
            if m.omega != prev {
                distinct += 1;
                prev = m.omega;
            }
        }
        if distinct < 2 {
            return self.lattice_spacing();
        }
        let span = self.entries[self.entries.len() - 1].omega - self.entries[0].omega;
        span / (distinct - 1) as f64
    }

    fn dos_unchecked(&self, omega: f64) -> f64 {
        match self.dimension {
            Dimension::One => self.box_length / (PI * self.c),
            Dimension::Three => {
                omega * omega * self.box_length.powi(3) / (PI * PI * self.c.powi(3))
            }
        }
    }

    /// Analytic coupling density Σ λ² δ(ω − ω_k); the golden-rule rate at ω
    /// is 2π times this value.
    pub fn coupling_density(&self, omega: f64) -> f64 {
        match self.model {
            CouplingModel::Flat { coupling_sq } => coupling_sq * self.dos_unchecked(omega),
            CouplingModel::Dipole { dipole_d } => {
                dipole_d * dipole_d * omega.powi(3)
                    / (6.0 * PI * PI * self.hbar * self.eps0 * self.c.powi(3))
            }
        }
    }

    /// Histogram estimate of ρ(ω): physical modes per bin divided by the bin
    /// width. Returns (bin centre, density) pairs across the window.
    pub fn empirical_density(&self, bin_width: f64) -> Vec<(f64, f64)> {
        let (low, high) = self.window;
        let bins = ((high - low) / bin_width).floor().max(1.0) as usize;
        let mut counts = vec![0u64; bins];
        for m in &self.entries {
            let idx = ((m.omega - low) / bin_width).floor() as usize;
            if idx < bins {
                counts[idx] += m.weight as u64;
            }
        }
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| (low + (i as f64 + 0.5) * bin_width, n as f64 / bin_width))
            .collect()
    }

    fn tabulate_dos(&mut self) {
        let (low, high) = self.window;
        self.dos_samples = (0..=8)
            .map(|i| {
                let omega = low + (high - low) * i as f64 / 8.0;
                (omega, self.dos_unchecked(omega))
            })
            .collect();
    }

    /// Reduces the set to collective modes, one per frequency group, each with
    /// coupling √(Σλ²) of its members. With `bin_width = None` entries are
    /// grouped by identical frequency, which leaves the excited-state
    /// amplitude dynamics unchanged.
    pub fn collective_modes(&self, bin_width: Option<f64>) -> ModeSet {
        let (low, _) = self.window;
        let key = |m: &Mode| -> i64 {
            match bin_width {
                Some(w) => ((m.omega - low) / w).floor() as i64,
                None => m.omega.to_bits() as i64,
            }
        };
        let mut out: Vec<Mode> = Vec::new();
        let mut i = 0;
        while i < self.entries.len() {
            let k = key(&self.entries[i]);
            let mut j = i;
            let (mut lam2, mut w_omega, mut plain, mut weight) = (0.0, 0.0, 0.0, 0u32);
            while j < self.entries.len() && key(&self.entries[j]) == k {
                let m = &self.entries[j];
                let l2 = m.coupling * m.coupling;
                lam2 += l2;
                w_omega += l2 * m.omega;
                plain += m.omega;
                weight += m.weight;
                j += 1;
            }
            let omega = if lam2 > 0.0 {
                w_omega / lam2
            } else {
                plain / (j - i) as f64
            };
            out.push(Mode {
                omega,
                weight,
                coupling: lam2.sqrt(),
                direction: None,
                polarization: None,
            });
            i = j;
        }
        self.with_entries(out)
    }

    fn with_entries(&self, entries: Vec<Mode>) -> ModeSet {
        ModeSet {
            dimension: self.dimension,
            entries,
            window: self.window,
            gamma: self.gamma,
            omega0: self.omega0,
            box_length: self.box_length,
            c: self.c,
            hbar: self.hbar,
            eps0: self.eps0,
            model: self.model,
            dos_samples: self.dos_samples.clone(),
        }
    }

    /// Copy of the set with every coupling multiplied by `factor`.
    pub fn scaled_couplings(&self, factor: f64) -> ModeSet {
        let mut out = self.clone();
        for m in &mut out.entries {
            m.coupling *= factor;
        }
        out.model = match out.model {
            CouplingModel::Flat { coupling_sq } => CouplingModel::Flat {
                coupling_sq: coupling_sq * factor * factor,
            },
            CouplingModel::Dipole { dipole_d } => CouplingModel::Dipole {
                dipole_d: dipole_d * factor.abs(),
            },
        };
        out.gamma *= factor * factor;
        out
    }

    pub fn summary(&self) -> ModeSummary {
        ModeSummary {
            dimension: self.dimension.as_u8(),
            entries: self.entries.len(),
            physical_modes: self.physical_modes(),
            window: self.window,
            gamma: self.gamma,
            box_length: self.box_length,
            mean_spacing: self.mean_spacing(),
            coupling_sq_sum: self.entries.iter().map(|m| m.coupling * m.coupling).sum(),
            density_of_states: self.dos_samples.clone(),
        }
    }

    /// Writes the full table as CSV `omega,weight,coupling,theta`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ModeError> {
        let mut w = crate::io::csv_writer(out);
        let io = |e: csv::Error| ModeError::Io(e.to_string());
        w.write_record(["omega", "weight", "coupling", "theta"])
            .map_err(io)?;
        for m in &self.entries {
            w.write_record(&[
                m.omega.to_string(),
                m.weight.to_string(),
                m.coupling.to_string(),
                m.theta().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| ModeError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_1d(gamma: f64, length: f64) -> PhysicalParams {
        PhysicalParams::for_decay_rate(1.0, gamma, length, Dimension::One).unwrap()
    }

    #[test]
    fn spacing_is_exact() {
        let length = 6.2832e6;
        let p = params_1d(1e-3, length);
        let set = enumerate_1d(&p, &ModeOptions::default()).unwrap();
        assert_eq!(set.lattice_spacing(), 2.0 * PI / length);
        let e = set.entries();
        let gap = e[2].omega - e[0].omega;
        assert!((gap - 2.0 * PI / length).abs() < 1e-15);
        assert!((set.lattice_spacing() - 1e-6).abs() < 1e-10);
    }

    #[test]
    fn one_d_count() {
        // spacing 1e-4 for Γ = 1e-3, W = 20
        let p = params_1d(1e-3, 2.0 * PI * 1e4);
        let set = enumerate_1d(&p, &ModeOptions::with_window(20.0)).unwrap();
        assert_eq!(set.len(), 800);
        let (low, high) = set.window();
        assert!(set
            .entries()
            .iter()
            .all(|m| m.omega > low && m.omega < high));
        assert!(set.entries().windows(2).all(|w| w[0].omega <= w[1].omega));
    }

    #[test]
    fn golden_rule_calibration() {
        for &(gamma, length) in &[(1e-3, 2.0 * PI * 1e4), (2e-3, 5e4), (1e-4, 1e6)] {
            let p = params_1d(gamma, length);
            let set = enumerate_1d(&p, &ModeOptions::default()).unwrap();
            let lam = set.entries()[0].coupling;
            let rho = density_of_states(&set, 1.0).unwrap();
            let rate = 2.0 * PI * lam * lam * rho;
            assert!((rate - gamma).abs() <= 1e-12 * gamma);
        }
    }

    #[test]
    fn golden_rule_with_explicit_target() {
        let p = params_1d(1e-3, 2.0 * PI * 1e4);
        let opts = ModeOptions {
            gamma_target: Some(5e-4),
            ..ModeOptions::default()
        };
        let set = enumerate_1d(&p, &opts).unwrap();
        assert_eq!(set.gamma(), 5e-4);
        let lam = set.entries()[0].coupling;
        let rate = 2.0 * PI * lam * lam * density_of_states(&set, 1.0).unwrap();
        assert!((rate - 5e-4).abs() <= 1e-12 * 5e-4);
    }

    #[test]
    fn under_resolved_lattice_names_minimal_length() {
        let p = params_1d(1e-3, 1000.0);
        let err = enumerate_1d(&p, &ModeOptions::default()).unwrap_err();
        match err {
            ModeError::UnderResolved { min_box_length, .. } => {
                assert!((min_box_length - 10.0 * PI / 1e-3).abs() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
        let relaxed = ModeOptions {
            enforce_resolution: false,
            ..ModeOptions::default()
        };
        assert!(enumerate_1d(&p, &relaxed).is_ok());
    }

    #[test]
    fn dos_1d() {
        let p = params_1d(1e-3, 2.0 * PI * 1e6);
        let set = enumerate_1d(&p, &ModeOptions::with_window(5.0)).unwrap();
        let rho = density_of_states(&set, 1.0).unwrap();
        assert!((rho - 2e6).abs() < 1e-6);
        assert!(density_of_states(&set, 2.0).is_err());
    }

    #[test]
    fn dos_scales_with_length() {
        let p = params_1d(1e-3, 1e5);
        let a = enumerate_1d(&p, &ModeOptions::with_window(5.0)).unwrap();
        let b = enumerate_1d(
            &p.with_box_length(3e5).unwrap(),
            &ModeOptions::with_window(5.0),
        )
        .unwrap();
        let ra = density_of_states(&a, 1.0).unwrap();
        let rb = density_of_states(&b, 1.0).unwrap();
        assert!((rb / ra - 3.0).abs() < 1e-12);
    }

    #[test]
    fn polarization_completeness() {
        // deterministic pseudo-random directions
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let d = 0.37;
        for basis in [
            PolarizationBasis::DipoleAligned,
            PolarizationBasis::SmallestAxis,
        ] {
            for _ in 0..100 {
                let k = [next(), next(), next()];
                let n = dot(k, k).sqrt();
                let k_hat = scale(k, 1.0 / n);
                let pols = polarization_pair(k_hat, basis);
                let sum: f64 = pols.iter().map(|u| (d * u[2]).powi(2)).sum();
                let sin2 = 1.0 - k_hat[2] * k_hat[2];
                assert!((sum - d * d * sin2).abs() < 1e-12);
                for u in &pols {
                    assert!(dot(*u, k_hat).abs() < 1e-12);
                    assert!((dot(*u, *u) - 1.0).abs() < 1e-12);
                }
                assert!(dot(pols[0], pols[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dipole_aligned_second_polarization_is_dark() {
        let k_hat = [0.6, 0.0, 0.8];
        let pols = polarization_pair(k_hat, PolarizationBasis::DipoleAligned);
        assert!(pols[1][2].abs() < 1e-15);
    }

    #[test]
    fn axial_k_has_zero_coupling() {
        for basis in [
            PolarizationBasis::DipoleAligned,
            PolarizationBasis::SmallestAxis,
        ] {
            let pols = polarization_pair([0.0, 0.0, 1.0], basis);
            assert!(pols.iter().all(|u| u[2].abs() < 1e-15));
        }
    }
}
