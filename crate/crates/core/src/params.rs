//! Physical constants, the dimensionless unit scheme and the closed-form
//! constants derived from them.
//!
//! Units: ħ = c = ε₀ = 1 and the transition frequency ω₀ sets the frequency
//! scale, so lengths are measured in c/ω₀ and times in 1/ω₀. The three unit
//! constants are still carried on [`PhysicalParams`] so every formula below
//! reads with all of its factors in place.
//!
//! Linewidth convention: `delta_omega` is always the half-width at half
//! maximum of the emission line, δω = Γ/2. A Lorentzian has no finite
//! variance, so "standard deviation" of the line is read as its HWHM.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest Γ/ω₀ accepted without an explicit override.
pub const DEFAULT_MAX_COUPLING_RATIO: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("`{name}` must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("`{name}` must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("dimension must be 1 or 3, got {0}")]
    InvalidDimension(u8),
    #[error(
        "decay rate Γ/ω₀ = {ratio:.3e} exceeds the weak-coupling limit {limit}; \
         raise `max_coupling_ratio` to override"
    )]
    StrongCoupling { ratio: f64, limit: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

/// Spatial dimension of the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    One,
    Three,
}

impl Dimension {
    pub fn as_u8(self) -> u8 {
        match self {
            Dimension::One => 1,
            Dimension::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = ParamsError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(Dimension::One),
            3 => Ok(Dimension::Three),
            other => Err(ParamsError::InvalidDimension(other)),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.as_u8()
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D", self.as_u8())
    }
}

/// User-facing parameter block, as read from a JSON configuration.
///
/// Unlike [`PhysicalParams`] this type carries no invariants; call
/// [`ParamsConfig::build`] to validate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default = "default_dipole")]
    pub dipole_d: f64,
    #[serde(default = "default_charge")]
    pub charge_e: f64,
    #[serde(default = "default_mass")]
    pub mass_m: f64,
    #[serde(default = "default_box_length")]
    pub box_length: f64,
    #[serde(default = "default_dimension")]
    pub dimension: Dimension,
    #[serde(default = "default_max_ratio")]
    pub max_coupling_ratio: f64,
}

fn default_omega0() -> f64 {
    1.0
}
// Γ = 10⁻³ ω₀
fn default_dipole() -> f64 {
    (3.0 * PI * 1e-3).sqrt()
}
// 1/τ = 10⁻³ ω₀ with m = 1
fn default_charge() -> f64 {
    (6.0 * PI * 1e-3).sqrt()
}
fn default_mass() -> f64 {
    1.0
}
// mode spacing Γ/20 for the default Γ
fn default_box_length() -> f64 {
    2.0 * PI * 20.0 / 1e-3
}
fn default_dimension() -> Dimension {
    Dimension::One
}
fn default_max_ratio() -> f64 {
    DEFAULT_MAX_COUPLING_RATIO
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            omega0: default_omega0(),
            dipole_d: default_dipole(),
            charge_e: default_charge(),
            mass_m: default_mass(),
            box_length: default_box_length(),
            dimension: default_dimension(),
            max_coupling_ratio: default_max_ratio(),
        }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> Result<PhysicalParams, ParamsError> {
        PhysicalParams::with_coupling_limit(
            self.omega0,
            self.dipole_d,
            self.charge_e,
            self.mass_m,
            self.box_length,
            self.dimension,
            self.max_coupling_ratio,
        )
    }
}

/// Validated atom, oscillator and cavity constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    omega0: f64,
    dipole_d: f64,
    charge_e: f64,
    mass_m: f64,
    box_length: f64,
    dimension: Dimension,
    hbar: f64,
    c: f64,
    eps0: f64,
}

impl PhysicalParams {
    /// Builds parameters with the default weak-coupling guard Γ/ω₀ ≤ 0.1.
    pub fn new(
        omega0: f64,
        dipole_d: f64,
        charge_e: f64,
        mass_m: f64,
        box_length: f64,
        dimension: Dimension,
    ) -> Result<Self, ParamsError> {
        Self::with_coupling_limit(
            omega0,
            dipole_d,
            charge_e,
            mass_m,
            box_length,
            dimension,
            DEFAULT_MAX_COUPLING_RATIO,
        )
    }

    pub fn with_coupling_limit(
        omega0: f64,
        dipole_d: f64,
        charge_e: f64,
        mass_m: f64,
        box_length: f64,
        dimension: Dimension,
        max_coupling_ratio: f64,
    ) -> Result<Self, ParamsError> {
        positive("omega0", omega0)?;
        positive("box_length", box_length)?;
        non_negative("dipole_d", dipole_d)?;
        non_negative("charge_e", charge_e)?;
        non_negative("mass_m", mass_m)?;
        positive("max_coupling_ratio", max_coupling_ratio)?;
        let p = Self {
            omega0,
            dipole_d,
            charge_e,
            mass_m,
            box_length,
            dimension,
            hbar: 1.0,
            c: 1.0,
            eps0: 1.0,
        };
        let ratio = gamma_ww(&p) / omega0;
        if ratio > max_coupling_ratio {
            return Err(ParamsError::StrongCoupling {
                ratio,
                limit: max_coupling_ratio,
            });
        }
        Ok(p)
    }

    /// Parameters for a two-level atom with prescribed decay rate Γ
    /// (the dipole is solved from the decay-rate formula).
    pub fn for_decay_rate(
        omega0: f64,
        gamma: f64,
        box_length: f64,
        dimension: Dimension,
    ) -> Result<Self, ParamsError> {
        non_negative("gamma", gamma)?;
        positive("omega0", omega0)?;
        let d = (3.0 * PI * gamma / omega0.powi(3)).sqrt();
        Self::new(omega0, d, 0.0, 1.0, box_length, dimension)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn dipole_d(&self) -> f64 {
        self.dipole_d
    }
    pub fn charge_e(&self) -> f64 {
        self.charge_e
    }
    pub fn mass_m(&self) -> f64 {
        self.mass_m
    }
    pub fn box_length(&self) -> f64 {
        self.box_length
    }
    pub fn dimension(&self) -> Dimension {
        self.dimension
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// Cavity volume L^dimension.
    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dimension.as_u8() as i32)
    }

    pub fn with_box_length(&self, box_length: f64) -> Result<Self, ParamsError> {
        positive("box_length", box_length)?;
        Ok(Self {
            box_length,
            ..*self
        })
    }

    pub fn with_dimension(&self, dimension: Dimension) -> Self {
        Self { dimension, ..*self }
    }

    pub fn to_config(&self) -> ParamsConfig {
        ParamsConfig {
            omega0: self.omega0,
            dipole_d: self.dipole_d,
            charge_e: self.charge_e,
            mass_m: self.mass_m,
            box_length: self.box_length,
            dimension: self.dimension,
            max_coupling_ratio: DEFAULT_MAX_COUPLING_RATIO,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamsError::NotPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ParamsError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamsError::Negative { name, value })
    }
}

/// Weisskopf–Wigner decay rate Γ = d²ω₀³ / (3π ħ ε₀ c³).
pub fn gamma_ww(p: &PhysicalParams) -> f64 {
    p.dipole_d.powi(2) * p.omega0.powi(3) / (3.0 * PI * p.hbar * p.eps0 * p.c.powi(3))
}

/// Classical radiation-damping time, 1/τ = e²ω₀² / (6π m ε₀ c³).
pub fn tau_classical(p: &PhysicalParams) -> Result<f64, ParamsError> {
    if p.mass_m <= 0.0 {
        return Err(ParamsError::Domain("damping time needs mass_m > 0".into()));
    }
    if p.charge_e <= 0.0 {
        return Err(ParamsError::Domain(
            "damping time is infinite for charge_e = 0".into(),
        ));
    }
    let rate = p.charge_e.powi(2) * p.omega0.powi(2) / (6.0 * PI * p.mass_m * p.eps0 * p.c.powi(3));
    Ok(1.0 / rate)
}

/// Real-space coherence volume V₀ = 3πc³ / (ω₀² δω).
///
/// Its inverse is the Fourier-space volume K₀ of the modes the photon can
/// reach.
pub fn v0_3d(p: &PhysicalParams, delta_omega: f64) -> Result<f64, ParamsError> {
    if !(delta_omega > 0.0) {
        return Err(ParamsError::Domain(format!(
            "linewidth must be positive, got {delta_omega}"
        )));
    }
    Ok(3.0 * PI * p.c.powi(3) / (p.omega0.powi(2) * delta_omega))
}

/// Classical coherence volume V₀ = 6πτc³/ω₀².
pub fn v0_classical(p: &PhysicalParams) -> Result<f64, ParamsError> {
    let tau = tau_classical(p)?;
    Ok(6.0 * PI * tau * p.c.powi(3) / p.omega0.powi(2))
}

/// k-space measure ∫∫ k₀² sin³θ dθ dφ = 8πω₀²/(3c²) of the dipole shell.
pub fn effective_solid_angle(p: &PhysicalParams) -> f64 {
    8.0 * PI * p.omega0.powi(2) / (3.0 * p.c.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavepacketVolume {
    pub volume: f64,
    /// False when r ≤ c/δω, where the far-zone estimate does not apply.
    pub in_regime: bool,
}

/// Far-zone wave-packet volume V_r ≈ (8π/3) r² / (2δk).
pub fn wavepacket_volume(p: &PhysicalParams, r: f64, delta_k: f64) -> WavepacketVolume {
    let volume = 8.0 * PI / 3.0 * r * r / (2.0 * delta_k);
    let delta_omega = p.c * delta_k;
    WavepacketVolume {
        volume,
        in_regime: delta_k > 0.0 && r > p.c / delta_omega,
    }
}

/// Time for the energy quantum to explore the whole phase space,
/// τ_ps = L/c + τ_em.
pub fn phase_space_time(p: &PhysicalParams, tau_em: f64) -> Result<f64, ParamsError> {
    phase_space_time_for(p.box_length, p.c, tau_em)
}

/// [`phase_space_time`] for an explicit box length, which may be zero.
pub fn phase_space_time_for(box_length: f64, c: f64, tau_em: f64) -> Result<f64, ParamsError> {
    positive("tau_em", tau_em)?;
    non_negative("box_length", box_length)?;
    Ok(box_length / c + tau_em)
}

/// Constants derived from a parameter set, for manifests and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub gamma: f64,
    pub delta_omega: f64,
    pub tau_em: f64,
    pub v0: Option<f64>,
    pub delta_x: f64,
    pub tau_classical: Option<f64>,
    pub v0_classical: Option<f64>,
    pub effective_solid_angle: f64,
}

impl DerivedConstants {
    pub fn from_params(p: &PhysicalParams) -> Self {
        let gamma = gamma_ww(p);
        let delta_omega = gamma / 2.0;
        Self {
            gamma,
            delta_omega,
            tau_em: if gamma > 0.0 {
                1.0 / gamma
            } else {
                f64::INFINITY
            },
            v0: v0_3d(p, delta_omega).ok(),
            delta_x: p.c / (2.0 * delta_omega),
            tau_classical: tau_classical(p).ok(),
            v0_classical: v0_classical(p).ok(),
            effective_solid_angle: effective_solid_angle(p),
        }
    }
}
