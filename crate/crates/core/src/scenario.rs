//! Named experiments: configuration, the pipeline behind each scenario and
//! the files it writes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::classical::{
    classical_field_entropy, classical_spectrum_padded, damped_trajectory, energy_balance,
    larmor_power, max_dt, mean_force_power, padding_for, radiative_force, ClassicalError,
    ClassicalTrajectory,
};
use crate::dynamics::{
    asymptotic_amplitudes, evolve, recurrence_scan, uniform_times, write_mode_amplitudes,
    DynamicsError, Frame, IntegratorOptions, RecurrenceOptions,
};
use crate::entropy::{
    emission_entropy, entropy_multi_atom, entropy_time_series, entropy_timescale,
    time_averaged_bipartition, write_entropy_series, EntropyError,
};
use crate::modes::{
    enumerate_1d, enumerate_3d, ModeError, ModeOptions, ModeSet, PolarizationBasis,
};
use crate::params::{
    tau_classical, v0_3d, v0_classical, DerivedConstants, Dimension, ParamsConfig, ParamsError,
    PhysicalParams,
};
use crate::spectra::{
    bin_spectrum, fit_exponential, fit_lorentzian_in, SpectraError, SpectralDistribution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Excited-state decay and exponential fit.
    Decay,
    /// Emitted spectrum and Lorentzian fit.
    Spectrum,
    /// Diagonal entropy along the evolution and closed-form estimates.
    Entropy,
    /// Revivals of the excited population after photon round trips.
    Recurrence,
    /// Asymptotic entropy as the box grows.
    ScalingSweep,
    /// Damped classical dipole.
    Classical,
    /// Classical against quantum spectral entropy.
    Correspondence,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Decay => "decay",
            Scenario::Spectrum => "spectrum",
            Scenario::Entropy => "entropy",
            Scenario::Recurrence => "recurrence",
            Scenario::ScalingSweep => "scaling-sweep",
            Scenario::Classical => "classical",
            Scenario::Correspondence => "correspondence",
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}: {message}")]
    Numerical {
        module: &'static str,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl ScenarioError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 2,
            _ => 1,
        }
    }
}

macro_rules! numerical_from {
    ($ty:ty, $module:literal) => {
        impl From<$ty> for ScenarioError {
            fn from(e: $ty) -> Self {
                ScenarioError::Numerical {
                    module: $module,
                    message: e.to_string(),
                }
            }
        }
    };
}
numerical_from!(ModeError, "modes");
numerical_from!(DynamicsError, "dynamics");
numerical_from!(SpectraError, "spectra");
numerical_from!(EntropyError, "entropy");
numerical_from!(ClassicalError, "classical");

impl From<ParamsError> for ScenarioError {
    fn from(e: ParamsError) -> Self {
        ScenarioError::Config(format!("params: {e}"))
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e.to_string())
    }
}

/// Numerical settings. Times and frequencies given "in gammas" are in units
/// of 1/Γ and Γ of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Half-width of the mode window in units of Γ.
    pub window_widths: f64,
    /// Decay rate the 1D couplings are calibrated to; defaults to the
    /// Weisskopf–Wigner rate of the parameters.
    pub gamma_target: Option<f64>,
    pub enforce_resolution: bool,
    pub polarization: PolarizationBasis,
    pub rtol: f64,
    pub atol: f64,
    pub frame: Frame,
    pub samples: usize,
    pub t_final_gammas: f64,
    pub decay_fit_window_gammas: (f64, f64),
    /// Evolution time for spectra and entropy time series.
    pub long_time_gammas: f64,
    pub bin_width_gammas: f64,
    /// Lorentzian fits use bins within this many Γ of ω₀; all bins if unset.
    pub lorentz_window_gammas: Option<f64>,
    pub revival_threshold: f64,
    /// Recurrence runs last this many round trips L/c.
    pub round_trips: f64,
    pub recurrence_samples: usize,
    pub scaling_factors: Vec<f64>,
    pub classical_r0: f64,
    /// Classical sample spacing; defaults to the largest admissible one.
    pub classical_dt: Option<f64>,
    pub classical_duration_taus: f64,
    /// Largest classical spectral bin, as a fraction of 1/τ.
    pub classical_bin_fraction: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            window_widths: crate::modes::DEFAULT_WINDOW_WIDTHS,
            gamma_target: None,
            enforce_resolution: true,
            polarization: PolarizationBasis::default(),
            rtol: 1e-9,
            atol: 1e-12,
            frame: Frame::Rotating,
            samples: 501,
            t_final_gammas: 5.0,
            decay_fit_window_gammas: (1.0, 4.0),
            long_time_gammas: 10.0,
            bin_width_gammas: 0.1,
            lorentz_window_gammas: None,
            revival_threshold: 0.1,
            round_trips: 2.5,
            recurrence_samples: 4001,
            scaling_factors: vec![1.0, 2.0, 4.0],
            classical_r0: 1.0,
            classical_dt: None,
            classical_duration_taus: 20.0,
            classical_bin_fraction: 0.025,
        }
    }
}

impl Numerics {
    fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions {
            rtol: self.rtol,
            atol: self.atol,
            frame: self.frame,
            ..IntegratorOptions::default()
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("window_widths", self.window_widths),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("t_final_gammas", self.t_final_gammas),
            ("long_time_gammas", self.long_time_gammas),
            ("bin_width_gammas", self.bin_width_gammas),
            ("revival_threshold", self.revival_threshold),
            ("round_trips", self.round_trips),
            ("classical_r0", self.classical_r0),
            ("classical_duration_taus", self.classical_duration_taus),
            ("classical_bin_fraction", self.classical_bin_fraction),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::Config(format!(
                    "numerics.{name} must be positive, got {v}"
                )));
            }
        }
        if self.samples < 2 || self.recurrence_samples < 3 {
            return Err(ScenarioError::Config(
                "numerics.samples must be ≥ 2 and numerics.recurrence_samples ≥ 3".into(),
            ));
        }
        let (a, b) = self.decay_fit_window_gammas;
        if !(a >= 0.0 && b > a) {
            return Err(ScenarioError::Config(format!(
                "numerics.decay_fit_window_gammas must satisfy 0 ≤ start < end, got ({a}, {b})"
            )));
        }
        if self.scaling_factors.is_empty() || self.scaling_factors.iter().any(|f| !(*f > 0.0)) {
            return Err(ScenarioError::Config(
                "numerics.scaling_factors must be a non-empty list of positive numbers".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub numerics: Numerics,
    /// Each entry maps dotted keys (`params.box_length`) to values.
    #[serde(default)]
    pub sweep: Vec<BTreeMap<String, Value>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn parse_set(raw: &str) -> Result<(String, Value), ScenarioError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ScenarioError::Config(format!("--set expects key=value, got `{raw}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ScenarioError::Config(format!("empty key in `{raw}`")));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.to_string(), value))
}

/// Sets a dotted key inside a JSON object, creating intermediate objects.
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), ScenarioError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            ScenarioError::Config(format!("`{}` is not an object", parts[..i].join(".")))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn config_from_value(v: Value) -> Result<ScenarioConfig, ScenarioError> {
    serde_json::from_value(v).map_err(|e| ScenarioError::Config(e.to_string()))
}

/// Reads an optional JSON config file and applies `key=value` overrides.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<ScenarioConfig, ScenarioError> {
    let mut root = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| ScenarioError::Config(format!("{}: {e}", p.display())))?;
            // Parse into the typed config first so errors carry line and column.
            serde_json::from_str::<ScenarioConfig>(&text)
                .map_err(|e| ScenarioError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| ScenarioError::Config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for raw in sets {
        let (key, value) = parse_set(raw)?;
        apply_override(&mut root, &key, value)?;
    }
    config_from_value(root)
}

/// Options that only affect how a run is executed.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    /// Worker threads for sweeps; rayon's default when unset.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub output_dir: PathBuf,
    /// Scalar results of the run, or of the first point of a sweep.
    pub headline: BTreeMap<String, f64>,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: Scenario,
    config: &'a ScenarioConfig,
    derived: DerivedConstants,
    version: &'static str,
    files: &'a [String],
    timings: BTreeMap<&'static str, f64>,
    timestamp_unix: u64,
}

struct Outcome {
    headline: BTreeMap<String, f64>,
    files: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    prefix: String,
    files: Vec<String>,
}

impl Writer<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(format!("{}{name}", self.prefix));
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ScenarioError> {
        let text =
            crate::io::to_sorted_json(value).map_err(|e| ScenarioError::Io(e.to_string()))?;
        fs::write(self.path(name), text)?;
        Ok(())
    }

    fn csv<F>(&mut self, name: &str, write: F) -> Result<(), ScenarioError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), ScenarioError>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        fs::write(self.path(name), buf)?;
        Ok(())
    }
}

/// Runs `scenario` with `cfg`, writing every artifact and a manifest into
/// the output directory.
pub fn run_scenario(
    scenario: Scenario,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<RunSummary, ScenarioError> {
    let start = Instant::now();
    let params = cfg.params.build()?;
    cfg.numerics.validate()?;
    let dir = opts
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));

    // Validate every sweep point before running anything.
    let base = serde_json::to_value(cfg).map_err(|e| ScenarioError::Config(e.to_string()))?;
    let mut points = Vec::new();
    for (i, overrides) in cfg.sweep.iter().enumerate() {
        let mut v = base.clone();
        for (key, value) in overrides {
            if key == "sweep" || key.starts_with("sweep.") || key == "output_dir" {
                return Err(ScenarioError::Config(format!(
                    "sweep[{i}]: `{key}` cannot be overridden per point"
                )));
            }
            apply_override(&mut v, key, value.clone())?;
        }
        let mut point =
            config_from_value(v).map_err(|e| ScenarioError::Config(format!("sweep[{i}]: {e}")))?;
        point.sweep.clear();
        point
            .params
            .build()
            .map_err(|e| ScenarioError::Config(format!("sweep[{i}]: {e}")))?;
        point.numerics.validate()?;
        points.push(point);
    }

    fs::create_dir_all(&dir)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = opts.jobs {
            b = b.num_threads(n.max(1));
        }
        b.build()
            .map_err(|e| ScenarioError::Config(e.to_string()))?
    };

    let (headline, mut files) = pool.install(|| -> Result<_, ScenarioError> {
        if points.is_empty() {
            let out = run_single(scenario, cfg, &params, &dir, "")?;
            return Ok((out.headline, out.files));
        }
        let results: Vec<Result<Outcome, ScenarioError>> = points
            .par_iter()
            .enumerate()
            .map(|(i, point)| {
                let name = format!("point_{i:03}");
                let sub = dir.join(&name);
                fs::create_dir_all(&sub)?;
                let p = point.params.build()?;
                run_single(scenario, point, &p, &sub, &format!("{name}/"))
            })
            .collect();
        let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let mut files = Vec::new();
        let table = sweep_table(&cfg.sweep, &outcomes)?;
        fs::write(dir.join("sweep.csv"), table)?;
        files.push("sweep.csv".to_string());
        for o in &outcomes {
            files.extend(o.files.iter().cloned());
        }
        Ok((outcomes[0].headline.clone(), files))
    })?;

    files.push("manifest.json".to_string());
    let manifest = Manifest {
        scenario,
        config: cfg,
        derived: DerivedConstants::from_params(&params),
        version: env!("CARGO_PKG_VERSION"),
        files: &files,
        timings: BTreeMap::from([("total_seconds", start.elapsed().as_secs_f64())]),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let text =
        crate::io::to_sorted_json(&manifest).map_err(|e| ScenarioError::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text)?;
    Ok(RunSummary {
        scenario,
        output_dir: dir,
        headline,
        files,
    })
}

fn sweep_table(
    sweep: &[BTreeMap<String, Value>],
    outcomes: &[Outcome],
) -> Result<Vec<u8>, ScenarioError> {
    let keys: BTreeSet<&String> = sweep.iter().flat_map(|m| m.keys()).collect();
    let metrics: BTreeSet<&String> = outcomes.iter().flat_map(|o| o.headline.keys()).collect();
    let mut buf = Vec::new();
    {
        let mut w = crate::io::csv_writer(&mut buf);
        let io = |e: csv::Error| ScenarioError::Io(e.to_string());
        let mut header = vec!["point".to_string()];
        header.extend(keys.iter().map(|k| k.to_string()));
        header.extend(metrics.iter().map(|k| k.to_string()));
        w.write_record(&header).map_err(io)?;
        for (i, (overrides, o)) in sweep.iter().zip(outcomes).enumerate() {
            let mut row = vec![i.to_string()];
            for k in &keys {
                row.push(match overrides.get(*k) {
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                    None => String::new(),
                });
            }
            for k in &metrics {
                row.push(
                    o.headline
                        .get(*k)
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                );
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Builds the mode set for `p`, optionally calibrated to `gamma_target`.
pub fn build_modes(
    p: &PhysicalParams,
    numerics: &Numerics,
    gamma_target: Option<f64>,
) -> Result<ModeSet, ModeError> {
    let opts = ModeOptions {
        window_widths: numerics.window_widths,
        gamma_target: gamma_target.or(numerics.gamma_target),
        enforce_resolution: numerics.enforce_resolution,
        polarization: numerics.polarization,
        ..ModeOptions::default()
    };
    match p.dimension() {
        Dimension::One => enumerate_1d(p, &opts),
        Dimension::Three => enumerate_3d(p, &opts),
    }
}

fn run_single(
    scenario: Scenario,
    cfg: &ScenarioConfig,
    p: &PhysicalParams,
    dir: &Path,
    prefix: &str,
) -> Result<Outcome, ScenarioError> {
    let mut w = Writer {
        dir,
        prefix: prefix.to_string(),
        files: Vec::new(),
    };
    let n = &cfg.numerics;
    let headline = match scenario {
        Scenario::Decay => decay(p, n, &mut w)?,
        Scenario::Spectrum => spectrum(p, n, &mut w)?,
        Scenario::Entropy => entropy(p, n, &mut w)?,
        Scenario::Recurrence => recurrence(p, n, &mut w)?,
        Scenario::ScalingSweep => scaling(p, n, &mut w)?,
        Scenario::Classical => classical(p, n, &mut w)?,
        Scenario::Correspondence => correspondence(p, n, &mut w)?,
    };
    Ok(Outcome {
        headline,
        files: w.files,
    })
}

fn headline<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn fit_window(n: &Numerics, center: f64, scale: f64) -> Option<(f64, f64)> {
    n.lorentz_window_gammas
        .map(|k| (center - k * scale, center + k * scale))
}

#[derive(Serialize)]
struct DecayReport {
    fit: crate::spectra::DecayFit,
    expected_rate: f64,
    relative_error: f64,
    max_norm_drift: f64,
    norm_flagged: bool,
    accepted_steps: usize,
    rejected_steps: usize,
}

fn decay(
    p: &PhysicalParams,
    n: &Numerics,
    w: &mut Writer,
) -> Result<BTreeMap<String, f64>, ScenarioError> {
    let modes = build_modes(p, n, None)?;
    w.json("modes_summary.json", &modes.summary())?;
    let g = modes.gamma();
    let times = uniform_times(n.t_final_gammas / g, n.samples);
    let ev = evolve(&modes, p, &times, &n.integrator())?;
    w.csv("decay.csv", |b| Ok(ev.write_csv(b)?))?;
    let (a, b) = n.decay_fit_window_gammas;
    let fit = fit_exponential(&ev.excited_series(), (a / g, b / g))?;
    let report = DecayReport {
        fit,
        expected_rate: g,
        relative_error: (fit.rate - g).abs() / g,
        max_norm_drift: ev.max_norm_drift,
        norm_flagged: ev.norm_flagged,
        accepted_steps: ev.accepted_steps,
        rejected_steps: ev.rejected_steps,
    };
    w.json("fit.json", &report)?;
    Ok(headline([
        ("rate", fit.rate),
        ("expected_rate", g),
        ("relative_error", report.relative_error),
        ("max_norm_drift", ev.max_norm_drift),
    ]))
}

#[derive(Serialize)]
struct LineReport {
    fit: crate::spectra::LorentzFit,
    expected_hwhm: f64,
    hwhm_relative_error: f64,
    center_relative_error: f64,
    total_mass: f64,
}

impl LineReport {
    fn new(
        fit: crate::spectra::LorentzFit,
        expected_hwhm: f64,
        omega0: f64,
        spec: &SpectralDistribution,
    ) -> Self {
        Self {
            fit,
            expected_hwhm,
            hwhm_relative_error: (fit.hwhm - expected_hwhm).abs() / expected_hwhm,
            center_relative_error: (fit.center - omega0).abs() / omega0,
            total_mass: spec.total_mass(),
        }
    }
}

fn spectrum(
    p: &PhysicalParams,
    n: &Numerics,
    w: &mut Writer,
) -> Result<BTreeMap<String, f64>, ScenarioError> {
    let modes = build_modes(p, n, None)?;
    w.json("modes_summary.json", &modes.summary())?;
    let g = modes.gamma();
    let ev = evolve(&modes, p, &[n.long_time_gammas / g], &n.integrator())?;
    let state = &ev.states[0];
    w.csv("mode_amplitudes.csv", |b| {
        Ok(write_mode_amplitudes(state, &modes, b)?)
    })?;
    let spec = bin_spectrum(state, &modes, n.bin_width_gammas * g)?;
    w.csv("spectrum.csv", |b| Ok(spec.write_csv(b)?))?;
    let fit = fit_lorentzian_in(&spec, fit_window(n, p.omega0(), g))?;
    let report = LineReport::new(fit, g / 2.0, p.omega0(), &spec);
    w.json("lorentz_fit.json", &report)?;
    Ok(headline([
        ("center", fit.center),
        ("hwhm", fit.hwhm),
        ("expected_hwhm", g / 2.0),
        ("hwhm_relative_error", report.hwhm_relative_error),
        ("total_mass", spec.total_mass()),
    ]))
}

#[derive(Serialize)]
struct EntropyFile {
    final_state: crate::entropy::EntropyReport,
    asymptotic: crate::entropy::EntropyReport,
    final_minus_asymptotic: f64,
    bipartition: crate::entropy::BipartitionAverage,
    s_timescale: f64,
    multi_atom_single: crate::entropy::MultiAtomEntropy,
}

fn entropy(
    p: &PhysicalParams,
    n: &Numerics,
    w: &mut Writer,
) -> Result<BTreeMap<String, f64>, ScenarioError> {
    let modes = build_modes(p, n, None)?;
    w.json("modes_summary.json", &modes.summary())?;
    let g = modes.gamma();
    let times = uniform_times(n.long_time_gammas / g, n.samples);
    let ev = evolve(&modes, p, &times, &n.integrator())?;
    let series = entropy_time_series(&ev.states, &modes)?;
    w.csv("entropy_series.csv", |b| {
        Ok(write_entropy_series(&series, b)?)
    })?;
    let last = ev.states.last().expect("at least two samples");
    let final_state = emission_entropy(last, &modes)?;
    let asymptotic = emission_entropy(&asymptotic_amplitudes(&modes, p), &modes)?;
    let file = EntropyFile {
        final_minus_asymptotic: final_state.s_exact - asymptotic.s_exact,
        bipartition: time_averaged_bipartition(&ev.excited_series())?,
        s_timescale: entropy_timescale(p, 1.0 / g)?,
        multi_atom_single: entropy_multi_atom(1, p, g / 2.0)?,
        final_state,
        asymptotic,
    };
    w.json("entropy.json", &file)?;
    Ok(headline([
        ("s_exact_final", file.final_state.s_exact),
        ("s_exact_asymptotic", file.asymptotic.s_exact),
        ("s_paper_1d", file.asymptotic.s_paper_1d),
        ("s_paper_3d", file.asymptotic.s_paper_3d),
        ("mean_excited", file.bipartition.mean_excited),
    ]))
}

#[derive(Serialize)]
struct RevivalFile {
    revivals: Vec<crate::dynamics::Revival>,
    round_trip_time: f64,
    first_onset_relative_error: Option<f64>,
}

fn recurrence(
    p: &PhysicalParams,
    n: &Numerics,
    w: &mut Writer,
) -> Result<BTreeMap<String, f64>, ScenarioError> {
    let modes = build_modes(p, n, None)?;
    w.json("modes_summary.json", &modes.summary())?;
    let round_trip = p.box_length() / p.c();
    let opts = RecurrenceOptions {
        samples: n.recurrence_samples,
        threshold: n.revival_threshold,
        integrator: n.integrator(),
    };
    let scan = recurrence_scan(&modes, p, n.round_trips * round_trip, &opts)?;
    w.csv("recurrence.csv", |b| Ok(scan.evolution.write_csv(b)?))?;
    let first = scan
        .revivals
        .first()
        .map(|r| (r.onset - round_trip).abs() / round_trip);
    let file = RevivalFile {
        revivals: scan.revivals,
        round_trip_time: round_trip,
        first_onset_relative_error: first,
    };
    w.json("revivals.json", &file)?;
    let mut h = headline([
        ("revivals", file.revivals.len() as f64),
        ("round_trip_time", round_trip),
    ]);
    if let Some(r) = file.revivals.first() {
        h.insert("first_onset".into(), r.onset);
        h.insert("first_peak_probability".into(), r.peak_probability);
    }
    Ok(h)
}

#[derive(Serialize)]
struct ScalingRow {
    factor: f64,
    box_length: f64,
    modes: u64,
    s_exact: f64,
    s_paper: f64,
    exact_minus_paper: f64,
    truncation_mass: f64,
}

fn scaling(
    p: &PhysicalParams,
    n: &Numerics,
    w: &mut Writer,
) -> Result<BTreeMap<String, f64>, ScenarioError> {
    let rows: Vec<Result<(ScalingRow, crate::entropy::EntropyReport), ScenarioError>> = n
        .scaling_factors
        .par_iter()
        .map(|&f| {
            let pf = p.with_box_length(p.box_length() * f)?;
            let modes = build_modes(&pf, n, None)?;
            let r = emission_entropy(&asymptotic_amplitudes(&modes, &pf), &modes)?;
            let s_paper = match pf.dimension() {
                Dimension::One => r.s_paper_1d,
                Dimension::Three => r.s_paper_3d,
            };
            Ok((
                ScalingRow {
                    factor: f,
                    box_length: pf.box_length(),
                    modes: modes.physical_modes(),
                    s_exact: r.s_exact,
                    s_paper,
                    exact_minus_paper: r.s_exact - s_paper,
                    truncation_mass: r.truncation_mass,
                },
                r,
            ))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let dim = p.dimension().as_u8() as f64;
    let mut worst_slope = 0.0f64;
    let mut offsets = Vec::new();
    w.csv("entropy_vs_L.csv", |b| {
        let mut cw = crate::io::csv_writer(b);
        let io = |e: csv::Error| ScenarioError::Io(e.to_string());
        cw.write_record([
            "factor",
            "box_length",
            "modes",
            "s_exact",
            "s_paper",
            "exact_minus_paper",
            "truncation_mass",
            "delta_s",
            "expected_delta_s",
        ])
        .map_err(io)?;
        for (i, (row, _)) in rows.iter().enumerate() {
            let (delta, expected) = if i == 0 {
                (String::new(), String::new())
            } else {
                let prev = &rows[i - 1].0;
                let d = row.s_exact - prev.s_exact;
                let e = dim * (row.factor / prev.factor).ln();
                worst_slope = worst_slope.max((d - e).abs());
                (d.to_string(), e.to_string())
            };
            offsets.push(row.exact_minus_paper);
            cw.write_record(&[
                row.factor.to_string(),
                row.box_length.to_string(),
                row.modes.to_string(),
                row.s_exact.to_string(),
                row.s_paper.to_string(),
                row.exact_minus_paper.to_string(),
                row.truncation_mass.to_string(),
                delta,
                expected,
            ])
            .map_err(io)?;
        }
        cw.flush()?;
        Ok(())
    })?;
    for (i, (_, report)) in rows.iter().enumerate() {
        w.json(&format!("entropy_L{i}.json"), report)?;
    }
    let spread = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - offsets.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(headline([
        ("max_slope_deviation", worst_slope),
        ("offset_spread", spread),
        ("s_exact_first", rows[0].0.s_exact),
    ]))
}

/// Trajectory and padded spectrum shared by the classical scenarios.
fn classical_run(
    p: &PhysicalParams,
    n: &Numerics,
) -> Result<(f64, ClassicalTrajectory, SpectralDistribution), ScenarioError> {
    let tau = tau_classical(p)?;
    let dt = n.classical_dt.unwrap_or_else(|| max_dt(p.omega0()));
    let traj = damped_trajectory(p, n.classical_r0, n.classical_duration_taus * tau, dt)?;
    let pad = padding_for(&traj, n.classical_bin_fraction / tau);
    let spec = classical_spectrum_padded(&traj, pad)?;
    Ok((tau, traj, spec))
}

#[derive(Serialize)]
struct EnergyFile {
    balance: crate::classical::EnergyBalance,
    boundary_term_ratio: f64,
    jerk_power: f64,
    viscous_power: f64,
}

fn classical(
    p: &PhysicalParams,
    n: &Numerics,
    w: &mut Writer,
) -> Result<BTreeMap<String, f64>, ScenarioError> {
    let (tau, traj, spec) = classical_run(p, n)?;
    w.csv("trajectory.csv", |b| Ok(traj.write_csv(b)?))?;
    let power = larmor_power(p, &traj)?;
    w.csv("power.csv", |b| {
        Ok(crate::classical::write_power_csv(&power, b)?)
    })?;
    let forces = radiative_force(p, &traj)?;
    let (jerk_power, viscous_power) = mean_force_power(&forces);
    let energy = EnergyFile {
        balance: energy_balance(&power)?,
        boundary_term_ratio: crate::classical::boundary_term_ratio(&traj, tau)?,
        jerk_power,
        viscous_power,
    };
    w.json("energy_balance.json", &energy)?;
    w.csv("classical_spectrum.csv", |b| Ok(spec.write_csv(b)?))?;
    let scale = 1.0 / tau;
    let window = fit_window(n, p.omega0(), scale).unwrap_or((
        p.omega0() - n.window_widths * scale,
        p.omega0() + n.window_widths * scale,
    ));
    let fit = fit_lorentzian_in(&spec, Some(window))?;
    let line = LineReport::new(fit, 0.5 / tau, p.omega0(), &spec);
    w.json("lorentz_fit.json", &line)?;
    let modes = build_modes(p, n, Some(scale))?;
    let report = classical_field_entropy(&spec, &modes, p)?;
    w.json("classical_entropy.json", &report)?;
    Ok(headline([
        ("tau", tau),
        ("hwhm", fit.hwhm),
        ("hwhm_relative_error", line.hwhm_relative_error),
        ("energy_relative_error", energy.balance.relative_error),
        ("s_exact", report.s_exact),
    ]))
}

#[derive(Serialize)]
struct CorrespondenceFile {
    quantum: crate::entropy::EntropyReport,
    classical: crate::entropy::EntropyReport,
    entropy_difference: f64,
    v0_classical: f64,
    v0_quantum: f64,
    v0_relative_difference: f64,
}

fn correspondence(
    p: &PhysicalParams,
    n: &Numerics,
    w: &mut Writer,
) -> Result<BTreeMap<String, f64>, ScenarioError> {
    let (tau, _, spec) = classical_run(p, n)?;
    let modes = build_modes(p, n, Some(1.0 / tau))?;
    w.json("modes_summary.json", &modes.summary())?;
    let quantum = emission_entropy(&asymptotic_amplitudes(&modes, p), &modes)?;
    let classical = classical_field_entropy(&spec, &modes, p)?;
    let v0_cl = v0_classical(p)?;
    let v0_q = v0_3d(p, 0.5 / tau)?;
    let file = CorrespondenceFile {
        entropy_difference: classical.s_exact - quantum.s_exact,
        v0_relative_difference: (v0_cl - v0_q).abs() / v0_q,
        v0_classical: v0_cl,
        v0_quantum: v0_q,
        quantum,
        classical,
    };
    w.json("correspondence.json", &file)?;
    Ok(headline([
        ("s_quantum", file.quantum.s_exact),
        ("s_classical", file.classical.s_exact),
        ("entropy_difference", file.entropy_difference),
        ("v0_relative_difference", file.v0_relative_difference),
    ]))
}
