//! Experiment configuration: TOML with strict keys, defaults materialised
//! by [`ExperimentConfig::resolve`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsOptions;
use crate::discretization::InitialData;
use crate::error::{Error, Result};
use crate::evolution::{IntegratorConfig, Mode};
use crate::geometry::{ManifoldProfile, Order};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub n: u32,
    /// Non-negative integer or `"inf"`.
    pub k: Order,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Outer radius; `120` when absent. Checked against the domain-sizing rule.
    pub r_max: Option<f64>,
    pub m: usize,
    /// Cap on the wavenumber used by the domain-sizing rule.
    pub xi_cap: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { r_max: None, m: 16384, xi_cap: 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: f64,
    /// Interval between binary checkpoints; none when absent.
    pub checkpoint_every: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt: 1e-3, t_final: 40.0, sample_every: 0.1, checkpoint_every: None }
    }
}

/// Initial data. Randomised families draw from the top-level `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Gaussian { amplitude: f64, width: f64 },
    Bump { amplitude: f64, inner: f64, outer: f64 },
    PerturbedGaussian { amplitude: f64, width: f64, perturbation: f64 },
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Gaussian { amplitude: 1.0, width: 3.0 }
    }
}

impl DataConfig {
    pub fn initial_data(&self, seed: u64) -> InitialData {
        match *self {
            DataConfig::Gaussian { amplitude, width } => InitialData::Gaussian { amplitude, width },
            DataConfig::Bump { amplitude, inner, outer } => InitialData::Bump { amplitude, inner, outer },
            DataConfig::PerturbedGaussian { amplitude, width, perturbation } => {
                InitialData::PerturbedGaussian { amplitude, width, perturbation, seed }
            }
        }
    }
}

/// Diagnostic toggles and parameters. Absent entries are filled in by
/// [`ExperimentConfig::resolve`] from the run length and mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub morawetz: Option<bool>,
    pub virial: Option<bool>,
    pub scattering: Option<bool>,
    pub defect_times: Option<Vec<f64>>,
    pub profile: Option<bool>,
    pub profile_times: Option<Vec<f64>>,
    pub t_min_profile: Option<f64>,
    pub rho_max: Option<f64>,
    pub rho_points: Option<usize>,
    pub profile_compare_rho_min: Option<f64>,
    pub phase: Option<bool>,
    pub phase_window: Option<(f64, f64)>,
    pub phase_match_tolerance: Option<f64>,
    pub longrange: Option<bool>,
    pub longrange_window_start: Option<f64>,
    pub psi_support: Option<(f64, f64)>,
    pub saturation_fraction: Option<f64>,
}

fn default_sigma() -> f64 {
    0.5
}
fn default_mode() -> Mode {
    Mode::Nonlinear
}
fn default_solver_tol() -> f64 {
    1e-12
}
fn default_leak_threshold() -> f64 {
    1e-6
}
fn default_max_work() -> f64 {
    5e10
}

/// One experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: ProfileConfig,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_leak_threshold")]
    pub leak_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    /// Used when neither `--out` nor `RADSCAT_OUT` is given.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Ceiling on `m` times the number of time steps of all flows in the run.
    #[serde(default = "default_max_work")]
    pub max_work: f64,
}

/// Default radius when `grid.r_max` is absent.
pub const DEFAULT_R_MAX: f64 = 120.0;

/// Dyadic times `t_final / 2^j >= t_min`, ascending.
fn dyadic_times(t_final: f64, t_min: f64, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..count).map(|j| t_final / (1u64 << j) as f64).filter(|t| *t >= t_min).collect();
    v.reverse();
    v
}

fn is_multiple(t: f64, step: f64) -> bool {
    let k = (t / step).round();
    k >= 0.0 && (k * step - t).abs() <= 1e-9 * t.abs().max(step)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(toml_path(&e), e.message().to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn manifold(&self) -> Result<ManifoldProfile> {
        ManifoldProfile::new(self.profile.n, self.profile.k).map_err(|e| Error::config("profile", e.to_string()))
    }

    pub fn r_max(&self) -> f64 {
        self.grid.r_max.unwrap_or(DEFAULT_R_MAX)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.time.dt,
            sigma: self.sigma,
            mode: self.mode,
            solver_tol: self.solver_tol,
            leak_threshold: self.leak_threshold,
        }
    }

    /// Fills every optional entry with its default and validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        let t_final = self.time.t_final;
        self.grid.r_max = Some(self.r_max());
        let free = self.mode == Mode::Free;
        let d = &mut self.diagnostics;
        d.morawetz.get_or_insert(true);
        d.virial.get_or_insert(true);
        d.scattering.get_or_insert(!free);
        let every = self.time.sample_every;
        d.defect_times.get_or_insert_with(|| {
            dyadic_times(t_final, every, 4).into_iter().filter(|s| is_multiple(*s, every)).collect()
        });
        let t_min_profile = *d.t_min_profile.get_or_insert(5.0);
        d.profile.get_or_insert(true);
        d.profile_times.get_or_insert_with(|| dyadic_times(t_final, t_min_profile, 4));
        d.rho_max.get_or_insert((self.grid.r_max.unwrap_or(DEFAULT_R_MAX) / t_final).min(4.0));
        d.rho_points.get_or_insert(400);
        d.profile_compare_rho_min.get_or_insert(0.0);
        d.phase.get_or_insert(free);
        d.phase_window.get_or_insert((0.5 * t_final, t_final));
        d.phase_match_tolerance.get_or_insert(0.1);
        d.longrange.get_or_insert(!free);
        d.longrange_window_start.get_or_insert(0.25 * t_final);
        d.psi_support.get_or_insert((1.0, 3.0));
        d.saturation_fraction.get_or_insert(0.02);
        self.validate()?;
        Ok(self)
    }

    /// Diagnostic options of a resolved config.
    pub fn diagnostics_options(&self) -> DiagnosticsOptions {
        let d = &self.diagnostics;
        DiagnosticsOptions {
            morawetz: d.morawetz.unwrap_or(true),
            virial: d.virial.unwrap_or(true),
            scattering: d.scattering.unwrap_or(false),
            defect_times: d.defect_times.clone().unwrap_or_default(),
            profile: d.profile.unwrap_or(false),
            profile_times: d.profile_times.clone().unwrap_or_default(),
            rho_max: d.rho_max.unwrap_or(4.0),
            rho_points: d.rho_points.unwrap_or(400),
            profile_compare_rho_min: d.profile_compare_rho_min.unwrap_or(0.0),
            phase: d.phase.unwrap_or(false),
            phase_window: d.phase_window.unwrap_or((0.5 * self.time.t_final, self.time.t_final)),
            longrange: d.longrange.unwrap_or(false),
            longrange_window_start: d.longrange_window_start.unwrap_or(0.25 * self.time.t_final),
            psi_support: d.psi_support.unwrap_or((1.0, 3.0)),
            saturation_fraction: d.saturation_fraction.unwrap_or(0.02),
            phase_match_tolerance: d.phase_match_tolerance.unwrap_or(0.1),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.manifold()?;
        let n = p.n as f64;
        if self.mode == Mode::Nonlinear {
            if p.n < 4 {
                return Err(Error::config(
                    "profile.n",
                    format!("nonlinear runs need n >= 4 (the scattering theory covers n >= 4), got {}", p.n),
                ));
            }
            let upper = 2.0 / (n - 2.0);
            if !(self.sigma > 0.0 && self.sigma < upper) {
                return Err(Error::config(
                    "sigma",
                    format!(
                        "nonlinear runs need 0 < sigma < 2/(n-2) = {upper} (the energy-subcritical range of the scattering theorems), got {}",
                        self.sigma
                    ),
                ));
            }
        }
        let t = &self.time;
        positive("time.dt", t.dt)?;
        positive("time.t_final", t.t_final)?;
        positive("time.sample_every", t.sample_every)?;
        if !is_multiple(t.t_final, t.dt) {
            return Err(Error::config("time.t_final", format!("{} is not a multiple of dt = {}", t.t_final, t.dt)));
        }
        if !is_multiple(t.sample_every, t.dt) || !is_multiple(t.t_final, t.sample_every) {
            return Err(Error::config(
                "time.sample_every",
                format!("must be a multiple of dt = {} dividing t_final = {}", t.dt, t.t_final),
            ));
        }
        if let Some(c) = t.checkpoint_every {
            if !(c > 0.0) || !is_multiple(c, t.sample_every) {
                return Err(Error::config("time.checkpoint_every", "must be a positive multiple of sample_every"));
            }
        }
        positive("grid.r_max", self.r_max())?;
        positive("grid.xi_cap", self.grid.xi_cap)?;
        if self.grid.m < 16 {
            return Err(Error::config("grid.m", format!("needs at least 16 nodes, got {}", self.grid.m)));
        }
        positive("solver_tol", self.solver_tol)?;
        positive("leak_threshold", self.leak_threshold)?;
        positive("max_work", self.max_work)?;
        let d = &self.diagnostics;
        let sampled = |field: &str, times: &[f64]| -> Result<()> {
            for &s in times {
                if !(s > 0.0 && s <= t.t_final * (1.0 + 1e-12)) || !is_multiple(s, t.sample_every) {
                    return Err(Error::config(
                        field,
                        format!("{s} must be a sample time in (0, t_final] (a multiple of sample_every)"),
                    ));
                }
            }
            Ok(())
        };
        sampled("diagnostics.defect_times", d.defect_times.as_deref().unwrap_or(&[]))?;
        sampled("diagnostics.profile_times", d.profile_times.as_deref().unwrap_or(&[]))?;
        if let (Some(times), Some(t_min)) = (&d.profile_times, d.t_min_profile) {
            if let Some(bad) = times.iter().find(|s| **s < t_min) {
                return Err(Error::config("diagnostics.profile_times", format!("{bad} is below t_min_profile = {t_min}")));
            }
        }
        if let Some((a, b)) = d.phase_window {
            if !(0.0 < a && a < b && b <= t.t_final * (1.0 + 1e-12)) {
                return Err(Error::config("diagnostics.phase_window", "needs 0 < start < end <= t_final"));
            }
        }
        if let Some(s) = d.longrange_window_start {
            if !(s > 0.0 && 4.0 * s <= t.t_final * (1.0 + 1e-12)) {
                return Err(Error::config(
                    "diagnostics.longrange_window_start",
                    format!("needs 0 < start <= t_final/4 = {}, got {s}", 0.25 * t.t_final),
                ));
            }
        }
        if let Some((a, b)) = d.psi_support {
            if !(0.0 <= a && a < b && b < self.r_max()) {
                return Err(Error::config("diagnostics.psi_support", "needs 0 <= inner < outer < r_max"));
            }
        }
        if let Some(r) = d.profile_compare_rho_min {
            if !(r >= 0.0 && r < d.rho_max.unwrap_or(f64::INFINITY)) {
                return Err(Error::config("diagnostics.profile_compare_rho_min", "needs 0 <= profile_compare_rho_min < rho_max"));
            }
        }
        if let Some(f) = d.saturation_fraction {
            positive("diagnostics.saturation_fraction", f)?;
        }
        Ok(())
    }

    /// `m` times the number of time steps of the main flow and of every
    /// auxiliary free flow (back-propagations, the long-range test wave).
    pub fn work_estimate(&self) -> f64 {
        let steps = self.time.t_final / self.time.dt;
        let d = &self.diagnostics;
        let mut total = steps;
        if d.scattering == Some(true) {
            total += d.defect_times.as_deref().unwrap_or(&[]).iter().sum::<f64>() / self.time.dt;
        }
        if d.longrange == Some(true) && self.mode == Mode::Nonlinear {
            total += steps;
        }
        self.grid.m as f64 * total
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

/// Best-effort key path of a TOML error, for field-level messages.
fn toml_path(e: &toml::de::Error) -> String {
    let msg = e.message();
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".into()
}
