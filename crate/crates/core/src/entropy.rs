//! Diagonal entropy of the emitted field and the closed-form estimates it is
//! compared against.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::AmplitudeState;
use crate::modes::ModeSet;
use crate::params::{phase_space_time_for, v0_3d, PhysicalParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("probability {value} at index {index} is negative or not a number")]
    Domain { index: usize, value: f64 },
    #[error("state has {found} amplitudes but the mode set has {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}

const PAIRWISE_BLOCK: usize = 64;

/// Fixed-order pairwise sum; the result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn plogp(p: f64, weight: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * (p / weight).ln()
    }
}

fn check(probs: &[f64]) -> Result<(), EntropyError> {
    match probs.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
        Some(index) => Err(EntropyError::Domain {
            index,
            value: probs[index],
        }),
        None => Ok(()),
    }
}

/// −Σ p ln p in nats, with 0·ln 0 = 0.
pub fn diagonal_entropy(probs: &[f64]) -> Result<f64, EntropyError> {
    check(probs)?;
    let terms: Vec<f64> = probs.iter().map(|&p| plogp(p, 1.0)).collect();
    Ok(pairwise_sum(&terms))
}

/// −Σ P ln(P/w): each P is spread evenly over w degenerate modes.
pub fn weighted_entropy(probs: &[f64], weights: &[u32]) -> Result<f64, EntropyError> {
    if probs.len() != weights.len() {
        return Err(EntropyError::SizeMismatch {
            expected: weights.len(),
            found: probs.len(),
        });
    }
    check(probs)?;
    let terms: Vec<f64> = probs
        .iter()
        .zip(weights)
        .map(|(&p, &w)| plogp(p, w.max(1) as f64))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Binary entropy −p ln p − (1 − p) ln(1 − p).
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    plogp(p, 1.0) + plogp(1.0 - p, 1.0)
}

/// Which regime each closed-form estimate assumes, evaluated for the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeFlags {
    /// Γ/ω₀ below 0.1: the line is narrow and the Lorentzian form applies.
    pub narrow_line: bool,
    /// L > cτ_em: the photon leaves the atom before it comes back.
    pub large_box: bool,
    /// V > V₀, required for s_paper_3d and s_volume_ratio to be positive.
    pub volume_above_v0: bool,
    /// Modes are a 3D lattice, so the 3D estimates refer to this run.
    pub three_dimensional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub s_exact: f64,
    pub s_paper_3d: f64,
    pub s_paper_1d: f64,
    pub s_real_space_1d: f64,
    pub s_timescale: f64,
    pub s_volume_ratio: f64,
    pub deltas: BTreeMap<String, f64>,
    pub atom_term: f64,
    pub truncation_mass: f64,
    pub truncation_entropy_bound: f64,
    pub regimes: RegimeFlags,
}

/// Closed-form estimates for a box of side L and linewidth δω = Γ/2.
struct ClosedForms {
    paper_3d: f64,
    paper_1d: f64,
    real_space_1d: f64,
    timescale: f64,
    volume_ratio: f64,
    regimes: RegimeFlags,
}

fn closed_forms(modes: &ModeSet) -> ClosedForms {
    let l = modes.box_length();
    let c = modes.c();
    let w0 = modes.omega0();
    let gamma = modes.gamma();
    let dw = gamma / 2.0;
    let volume = l.powi(3);
    let v0 = 3.0 * PI * c.powi(3) / (w0 * w0 * dw);
    let dx = c / (2.0 * dw);
    let tau_em = 1.0 / gamma;
    ClosedForms {
        paper_3d: (volume * w0 * w0 * dw / (3.0 * PI * c.powi(3))).ln(),
        paper_1d: (l * dw / (2.0 * PI * c)).ln(),
        real_space_1d: (l / dx).ln(),
        timescale: ((l / c + tau_em) / tau_em).ln(),
        volume_ratio: (volume / v0).ln(),
        regimes: RegimeFlags {
            narrow_line: gamma / w0 < 0.1,
            large_box: l > c * tau_em,
            volume_above_v0: volume > v0,
            three_dimensional: modes.dimension() == crate::params::Dimension::Three,
        },
    }
}

fn deltas(fields: &[(&str, f64)]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (i, (a, va)) in fields.iter().enumerate() {
        for (b, vb) in &fields[i + 1..] {
            out.insert(format!("{a}_minus_{b}"), va - vb);
        }
    }
    out
}

/// Builds a report from per-entry field probabilities and the atom
/// population.
pub fn report_from_probabilities(
    field_probs: &[f64],
    excited: f64,
    modes: &ModeSet,
) -> Result<EntropyReport, EntropyError> {
    build_report(field_probs, excited, modes, None)
}

/// As [`report_from_probabilities`], with `s_volume_ratio` taken against an
/// explicit coherence volume.
pub(crate) fn build_report(
    field_probs: &[f64],
    excited: f64,
    modes: &ModeSet,
    v0: Option<f64>,
) -> Result<EntropyReport, EntropyError> {
    if field_probs.len() != modes.len() {
        return Err(EntropyError::SizeMismatch {
            expected: modes.len(),
            found: field_probs.len(),
        });
    }
    let weights: Vec<u32> = modes.entries().iter().map(|m| m.weight).collect();
    let field = weighted_entropy(field_probs, &weights)?;
    if !(excited >= 0.0) {
        return Err(EntropyError::Domain {
            index: 0,
            value: excited,
        });
    }
    let atom_term = plogp(excited, 1.0);
    let s_exact = field + atom_term;
    let total = pairwise_sum(field_probs) + excited;
    let truncation_mass = (1.0 - total).max(0.0);
    let truncation_entropy_bound = truncation_mass * (modes.physical_modes() as f64).ln();
    let mut cf = closed_forms(modes);
    if let Some(v0) = v0 {
        let volume = modes.box_length().powi(3);
        cf.volume_ratio = (volume / v0).ln();
        cf.regimes.volume_above_v0 = volume > v0;
    }
    let fields = [
        ("s_exact", s_exact),
        ("s_paper_3d", cf.paper_3d),
        ("s_paper_1d", cf.paper_1d),
        ("s_real_space_1d", cf.real_space_1d),
        ("s_timescale", cf.timescale),
        ("s_volume_ratio", cf.volume_ratio),
    ];
    Ok(EntropyReport {
        s_exact,
        s_paper_3d: cf.paper_3d,
        s_paper_1d: cf.paper_1d,
        s_real_space_1d: cf.real_space_1d,
        s_timescale: cf.timescale,
        s_volume_ratio: cf.volume_ratio,
        deltas: deltas(&fields),
        atom_term,
        truncation_mass,
        truncation_entropy_bound,
        regimes: cf.regimes,
    })
}

/// Diagonal entropy of a state over `modes` together with every
/// closed-form estimate.
pub fn emission_entropy(
    state: &AmplitudeState,
    modes: &ModeSet,
) -> Result<EntropyReport, EntropyError> {
    if state.c_modes.len() != modes.len() {
        return Err(EntropyError::SizeMismatch {
            expected: modes.len(),
            found: state.c_modes.len(),
        });
    }
    report_from_probabilities(
        &state.mode_probabilities(),
        state.excited_probability(),
        modes,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyPoint {
    pub t: f64,
    pub s_exact: f64,
    pub atom_term: f64,
    pub truncation_mass: f64,
}

pub fn entropy_time_series(
    states: &[AmplitudeState],
    modes: &ModeSet,
) -> Result<Vec<EntropyPoint>, EntropyError> {
    let weights: Vec<u32> = modes.entries().iter().map(|m| m.weight).collect();
    states
        .iter()
        .map(|s| {
            if s.c_modes.len() != modes.len() {
                return Err(EntropyError::SizeMismatch {
                    expected: modes.len(),
                    found: s.c_modes.len(),
                });
            }
            let probs = s.mode_probabilities();
            let excited = s.excited_probability();
            let atom_term = plogp(excited, 1.0);
            Ok(EntropyPoint {
                t: s.time,
                s_exact: weighted_entropy(&probs, &weights)? + atom_term,
                atom_term,
                truncation_mass: (1.0 - pairwise_sum(&probs) - excited).max(0.0),
            })
        })
        .collect()
}

/// Writes CSV `t,s_exact,atom_term,truncation_mass`.
pub fn write_entropy_series<W: Write>(series: &[EntropyPoint], out: W) -> Result<(), EntropyError> {
    let mut w = crate::io::csv_writer(out);
    let io = |e: csv::Error| EntropyError::Io(e.to_string());
    w.write_record(["t", "s_exact", "atom_term", "truncation_mass"])
        .map_err(io)?;
    for p in series {
        w.write_record(&[
            p.t.to_string(),
            p.s_exact.to_string(),
            p.atom_term.to_string(),
            p.truncation_mass.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| EntropyError::Io(e.to_string()))
}

/// ΔS = ln(τ_ps/τ_em) with τ_ps = L/c + τ_em.
pub fn entropy_timescale(p: &PhysicalParams, tau_em: f64) -> Result<f64, EntropyError> {
    entropy_timescale_for(p.box_length(), p.c(), tau_em)
}

/// [`entropy_timescale`] for an explicit box length; L = 0 gives 0.
pub fn entropy_timescale_for(box_length: f64, c: f64, tau_em: f64) -> Result<f64, EntropyError> {
    let tps = phase_space_time_for(box_length, c, tau_em)
        .map_err(|e| EntropyError::Invalid(e.to_string()))?;
    Ok((tps / tau_em).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiAtomEntropy {
    pub value: f64,
    /// V < V₀: the estimate is negative and outside its regime.
    pub below_coherence_volume: bool,
}

/// N·ln(V/V₀) for N non-interacting photons, V = L³.
pub fn entropy_multi_atom(
    n_atoms: u64,
    p: &PhysicalParams,
    delta_omega: f64,
) -> Result<MultiAtomEntropy, EntropyError> {
    let v0 = v0_3d(p, delta_omega).map_err(|e| EntropyError::Invalid(e.to_string()))?;
    let volume = p.box_length().powi(3);
    Ok(MultiAtomEntropy {
        value: if n_atoms == 0 {
            0.0
        } else {
            n_atoms as f64 * (volume / v0).ln()
        },
        below_coherence_volume: volume < v0,
    })
}

/// Time averages of the atom/field split for an oscillating (small box)
/// excited-population series sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BipartitionAverage {
    pub mean_excited: f64,
    /// Binary entropy of the time-averaged population.
    pub coarse_grained_entropy: f64,
    /// Time average of the instantaneous binary entropy.
    pub mean_instantaneous_entropy: f64,
}

pub fn time_averaged_bipartition(
    series: &[(f64, f64)],
) -> Result<BipartitionAverage, EntropyError> {
    if series.len() < 2 {
        return Err(EntropyError::Invalid("need at least two samples".into()));
    }
    // trapezoid rule
    let span = series[series.len() - 1].0 - series[0].0;
    if !(span > 0.0) {
        return Err(EntropyError::Invalid(
            "samples must span positive time".into(),
        ));
    }
    let (mut pe, mut sh) = (0.0, 0.0);
    for w in series.windows(2) {
        let dt = w[1].0 - w[0].0;
        pe += 0.5 * dt * (w[0].1 + w[1].1);
        sh += 0.5 * dt * (binary_entropy(w[0].1) + binary_entropy(w[1].1));
    }
    let mean_excited = pe / span;
    Ok(BipartitionAverage {
        mean_excited,
        coarse_grained_entropy: binary_entropy(mean_excited),
        mean_instantaneous_entropy: sh / span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{asymptotic_amplitudes, Frame};
    use crate::modes::{enumerate_1d, ModeOptions};
    use crate::params::Dimension;

    #[test]
    fn basic_values() {
        assert_eq!(diagonal_entropy(&[1.0]).unwrap(), 0.0);
        assert_eq!(diagonal_entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let u = vec![1.0 / 1024.0; 1024];
        assert!((diagonal_entropy(&u).unwrap() - 1024f64.ln()).abs() < 1e-12);
        assert!((diagonal_entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            diagonal_entropy(&[0.5, -0.1]),
            Err(EntropyError::Domain { index: 1, .. })
        ));
        assert!(diagonal_entropy(&[f64::NAN]).is_err());
    }

    #[test]
    fn weights_split_mass() {
        let a = weighted_entropy(&[0.5, 0.5], &[2, 2]).unwrap();
        assert!((a - diagonal_entropy(&[0.25; 4]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn timescale_examples() {
        assert!((entropy_timescale_for(5.0, 1.0, 5.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy_timescale_for(0.0, 1.0, 3.0).unwrap(), 0.0);
        assert!((entropy_timescale_for(99.0, 1.0, 1.0).unwrap() - 100f64.ln()).abs() < 1e-12);
        let p = PhysicalParams::for_decay_rate(1.0, 1e-3, 1e3, Dimension::One).unwrap();
        assert!((entropy_timescale(&p, 1e3).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn multi_atom_examples() {
        let p = PhysicalParams::for_decay_rate(1.0, 1e-3, 1.0, Dimension::Three).unwrap();
        let dw = 5e-4;
        let v0 = v0_3d(&p, dw).unwrap();
        let p = p.with_box_length((v0 * 2f64.exp()).cbrt()).unwrap();
        let one = entropy_multi_atom(1, &p, dw).unwrap();
        assert!((one.value - 2.0).abs() < 1e-12);
        assert!((entropy_multi_atom(3, &p, dw).unwrap().value - 6.0).abs() < 1e-12);
        assert_eq!(entropy_multi_atom(0, &p, dw).unwrap().value, 0.0);
        let small = p.with_box_length(v0.cbrt() / 2.0).unwrap();
        let r = entropy_multi_atom(1, &small, dw).unwrap();
        assert!(r.below_coherence_volume && r.value < 0.0);
    }

    #[test]
    fn initial_state_has_zero_entropy() {
        let p = PhysicalParams::for_decay_rate(1.0, 1e-3, 2.0 * PI * 20.0 / 1e-3, Dimension::One)
            .unwrap();
        let m = enumerate_1d(&p, &ModeOptions::default()).unwrap();
        let s = AmplitudeState::excited(m.len(), Frame::Rotating);
        let r = emission_entropy(&s, &m).unwrap();
        assert_eq!(r.s_exact, 0.0);
        assert_eq!(r.atom_term, 0.0);
        assert_eq!(r.truncation_mass, 0.0);
        // V/V₀ and the paper 3D form are the same expression
        assert!((r.s_paper_3d - r.s_volume_ratio).abs() < 1e-12);
        assert_eq!(r.deltas.len(), 15);
    }

    #[test]
    fn asymptotic_1d_doubling() {
        let gamma = 1e-3;
        let mut prev: Option<EntropyReport> = None;
        for k in 0..2 {
            let l = 2.0 * PI * 20.0 / gamma * 2f64.powi(k);
            let p = PhysicalParams::for_decay_rate(1.0, gamma, l, Dimension::One).unwrap();
            let m = enumerate_1d(&p, &ModeOptions::default()).unwrap();
            let r = emission_entropy(&asymptotic_amplitudes(&m, &p), &m).unwrap();
            assert!(r.truncation_mass > 0.0 && r.truncation_mass < 0.01);
            if let Some(q) = prev {
                assert!((r.s_exact - q.s_exact - 2f64.ln()).abs() < 0.02);
                let off = r.s_exact - r.s_paper_1d - (q.s_exact - q.s_paper_1d);
                assert!(off.abs() < 0.02);
            }
            prev = Some(r);
        }
    }

    #[test]
    fn bipartition_of_rabi_cycle() {
        let series: Vec<(f64, f64)> = (0..=4000)
            .map(|i| {
                let t = i as f64 * 1e-3 * PI;
                (t, t.cos().powi(2))
            })
            .collect();
        let b = time_averaged_bipartition(&series).unwrap();
        assert!((b.mean_excited - 0.5).abs() < 1e-6);
        assert!((b.coarse_grained_entropy - 2f64.ln()).abs() < 1e-9);
    }
}
