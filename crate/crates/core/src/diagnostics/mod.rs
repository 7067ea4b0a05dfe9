//! Functionals evaluated along trajectories: Morawetz and virial integrals,
//! scattering defects, far-field profiles, the long-range pairing, and the
//! power-law fits built on them.
//!
//! Every accumulator consumes states in time order. [`Diagnostics`] bundles
//! the enabled ones behind a single `observe` call.

pub mod fit;
pub mod longrange;
pub mod morawetz;
pub mod profile;
pub mod scattering;

#[cfg(test)]
mod tests;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use fit::{linear_fit, power_law_fit, LinearFit};
pub use longrange::{DecayExponent, LongRangeReport, LongRangeTracker, NOISE_FLOOR};
pub use morawetz::{MorawetzAccumulator, MorawetzReport, VirialAccumulator, VirialReport};
pub use profile::{extract_profile, PhaseReport, PhaseTracker, ProfileSnapshot, RhoGrid};
pub use scattering::{scattering_defect, DefectPair, ScatteringReport, ScatteringTracker};

use crate::discretization::{FieldState, RadialGrid};
use crate::error::Result;
use crate::evolution::{IntegratorConfig, Mode};

/// Header of the time-series CSV.
pub const SERIES_CSV_HEADER: &str = "t,mass,energy,h1,linf_u,morawetz_cum,virial_lhs,virial_rhs,defect,leak";

/// One sample of the monitored quantities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub h1: f64,
    pub linf_u: f64,
    pub morawetz_cum: Option<f64>,
    pub virial_lhs: Option<f64>,
    pub virial_rhs: Option<f64>,
    /// `defect(t/2, t)` when both back-propagations are recorded.
    pub defect: Option<f64>,
    pub leak: f64,
    /// `(‖u‖ + ‖D_r u‖)^2` in the weighted `L^{2n/(n-2)}` norm; `None` for `n = 2`.
    pub x_integrand: Option<f64>,
}

impl SeriesRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{:e},{:e},{:e},{:e},{:e},{},{},{},{},{:e}",
            self.t,
            self.mass,
            self.energy,
            self.h1,
            self.linf_u,
            opt(self.morawetz_cum),
            opt(self.virial_lhs),
            opt(self.virial_rhs),
            opt(self.defect),
            self.leak
        )
    }
}

/// Energy `∫|∇u|^2 + |u|^{2σ+2}/(σ+1)`; the kinetic part alone for free flow.
pub fn energy(state: &FieldState, mode: Mode, sigma: f64) -> f64 {
    match mode {
        Mode::Nonlinear => state.energy(sigma),
        Mode::Free => state.kinetic_energy(),
    }
}

/// `(‖u‖_{L^q_w} + ‖D_r u‖_{L^q_w})^2` with `q = 2n/(n-2)` and the Strichartz
/// weight `w_n^{q-2}`.
pub fn x_integrand(state: &FieldState) -> Option<f64> {
    let g = &state.grid;
    let n = g.profile().n as f64;
    if n <= 2.0 {
        return None;
    }
    let q = 2.0 * n / (n - 2.0);
    let grad: Vec<_> = (0..state.w.len()).map(|i| g.scaled_gradient(&state.w, i)).collect();
    let a = g.weighted_lq_norm_of(&state.w, q).ok()?;
    let b = g.weighted_lq_norm_of(&grad, q).ok()?;
    Some((a + b) * (a + b))
}

/// Which diagnostics to run and their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsOptions {
    pub morawetz: bool,
    pub virial: bool,
    pub scattering: bool,
    /// Back-propagation times for scattering defects.
    pub defect_times: Vec<f64>,
    pub profile: bool,
    pub profile_times: Vec<f64>,
    pub rho_max: f64,
    pub rho_points: usize,
    /// Lower end of the ρ-range of the profile comparisons. On hyperbolic
    /// space `F ~ ρ^{-1/2}` as `ρ -> 0` and the sup over a grid reaching
    /// `ρ ~ 1/t` grows like `√t`.
    pub profile_compare_rho_min: f64,
    pub phase: bool,
    pub phase_window: (f64, f64),
    pub longrange: bool,
    pub longrange_window_start: f64,
    pub psi_support: (f64, f64),
    /// Relative Morawetz growth over the last quarter below which the
    /// integral counts as saturated.
    pub saturation_fraction: f64,
    /// Tolerance for matching `λ_fit` to a candidate constant.
    pub phase_match_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileComparison {
    pub t1: f64,
    pub t2: f64,
    /// `sup|F_{t1} - F_{t2}| / sup F_{t2}` over `ρ >= rho_min`.
    pub relative_sup_difference: f64,
    pub rho_min: f64,
    /// The same over the whole ρ-grid.
    pub full_grid_sup_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: LinearFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Conservation {
    /// `max_t |mass(t) - mass(0)| / mass(0)`.
    pub mass_drift: f64,
    /// `max_t |E(t) - E(0)| / E(0)`.
    pub energy_drift: f64,
}

/// Everything the diagnostics produce for one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub series: Vec<SeriesRow>,
    pub conservation: Conservation,
    pub morawetz: Option<MorawetzReport>,
    pub virial: Option<VirialReport>,
    pub scattering: Option<ScatteringReport>,
    pub profiles: Vec<ProfileSnapshot>,
    pub profile_comparisons: Vec<ProfileComparison>,
    pub phase: Option<PhaseReport>,
    pub longrange: Option<LongRangeReport>,
    pub fits: Vec<NamedFit>,
    pub invariant_violations: Vec<String>,
    pub warnings: Vec<String>,
    /// Fully resolved configuration of the run, attached by the caller.
    pub config: Option<serde_json::Value>,
}

/// The enabled accumulators of one run.
#[derive(Debug)]
pub struct Diagnostics {
    options: DiagnosticsOptions,
    n: u32,
    mode: Mode,
    sigma: f64,
    dt: f64,
    series: Vec<SeriesRow>,
    morawetz: Option<MorawetzAccumulator>,
    virial: Option<VirialAccumulator>,
    scattering: Option<ScatteringTracker>,
    rho_grid: Option<RhoGrid>,
    profiles: Vec<ProfileSnapshot>,
    phase: Option<PhaseTracker>,
    longrange: Option<LongRangeTracker>,
    initial_mass: Option<f64>,
    warnings: Vec<String>,
}

impl Diagnostics {
    pub fn new(grid: Arc<RadialGrid>, config: &IntegratorConfig, options: DiagnosticsOptions) -> Result<Self> {
        let sigma = if config.mode == Mode::Nonlinear { config.sigma } else { 0.0 };
        let morawetz = options.morawetz.then(|| MorawetzAccumulator::new(options.saturation_fraction));
        let virial = options.virial.then(|| VirialAccumulator::new(sigma));
        let scattering = if options.scattering {
            Some(ScatteringTracker::new(grid.clone(), config, options.defect_times.clone())?)
        } else {
            None
        };
        let rho_grid = if options.profile || options.phase {
            Some(RhoGrid::uniform(options.rho_max, options.rho_points)?)
        } else {
            None
        };
        let phase = match (&rho_grid, options.phase) {
            (Some(rg), true) => Some(PhaseTracker::new(rg, options.phase_window, grid.r_max())?),
            _ => None,
        };
        let longrange = if options.longrange && config.mode == Mode::Nonlinear {
            Some(LongRangeTracker::new(grid.clone(), config, options.psi_support, options.longrange_window_start)?)
        } else {
            None
        };
        let mut warnings = Vec::new();
        if options.longrange && config.mode == Mode::Free {
            warnings.push("long-range indicator skipped: free run".into());
        }
        Ok(Diagnostics {
            n: grid.profile().n,
            options,
            mode: config.mode,
            sigma: config.sigma,
            dt: config.dt,
            series: Vec::new(),
            morawetz,
            virial,
            scattering,
            rho_grid,
            profiles: Vec::new(),
            phase,
            longrange,
            initial_mass: None,
            warnings,
        })
    }

    pub fn series(&self) -> &[SeriesRow] {
        &self.series
    }

    /// Feeds one sample; returns the series row it produced.
    pub fn observe(&mut self, state: &FieldState) -> Result<&SeriesRow> {
        let mass = state.mass();
        let initial_mass = *self.initial_mass.get_or_insert(mass);
        if let Some(m) = &mut self.morawetz {
            m.observe(state);
        }
        if let Some(v) = &mut self.virial {
            v.observe(state);
        }
        let mut defect = None;
        if let Some(s) = &mut self.scattering {
            if s.observe(state)?.is_some() {
                defect = s.latest_dyadic().map(|p| p.defect);
            }
        }
        if let (Some(rg), true) = (&self.rho_grid, self.options.profile) {
            let tol = 0.5 * self.dt;
            if self.options.profile_times.iter().any(|t| (t - state.t).abs() <= tol) {
                let snap = extract_profile(state, rg, initial_mass)?;
                if let Some(p) = snap.truncated_at {
                    self.warnings.push(format!("profile at t = {} truncated at rho = {p}", state.t));
                }
                self.profiles.push(snap);
            }
        }
        if let Some(p) = &mut self.phase {
            p.observe(state);
        }
        if let Some(l) = &mut self.longrange {
            l.observe(state)?;
        }
        self.series.push(SeriesRow {
            t: state.t,
            mass,
            energy: energy(state, self.mode, self.sigma),
            h1: state.h1_norm(),
            linf_u: state.linf_u(),
            morawetz_cum: self.morawetz.as_ref().map(|m| m.cumulative()),
            virial_lhs: self.virial.as_ref().map(|v| v.lhs()),
            virial_rhs: self.virial.as_ref().map(|v| v.rhs()),
            defect,
            leak: state.leak_fraction(),
            x_integrand: x_integrand(state),
        });
        Ok(self.series.last().expect("row just pushed"))
    }

    pub fn finish(self) -> DiagnosticsReport {
        let mut violations = Vec::new();
        let mut warnings = self.warnings;
        let mut fits = Vec::new();
        let initial_mass = self.initial_mass.unwrap_or(0.0);

        let drift = |f: fn(&SeriesRow) -> f64| -> f64 {
            let Some(first) = self.series.first() else { return 0.0 };
            let base = f(first);
            let worst = self.series.iter().map(|r| (f(r) - base).abs()).fold(0.0, f64::max);
            if base == 0.0 {
                worst
            } else {
                worst / base.abs()
            }
        };
        let conservation = Conservation { mass_drift: drift(|r| r.mass), energy_drift: drift(|r| r.energy) };

        let morawetz = self.morawetz.map(|m| m.finish());
        if let Some(m) = &morawetz {
            if m.negative_increments > 0 {
                violations.push(format!("Morawetz integral decreased at {} samples", m.negative_increments));
            }
            if m.degenerate_dimension {
                warnings.push("n = 3: the Morawetz weight degenerates; raw integral reported".into());
            }
        }
        let virial = self.virial.map(|v| v.finish());
        if let Some(v) = &virial {
            if v.negative_nonlinear > 0 {
                violations.push(format!("virial nonlinear term negative at {} samples", v.negative_nonlinear));
            }
        }
        let scattering = self.scattering.as_ref().map(|s| s.finish());
        if let Some(s) = &scattering {
            if s.pairs.iter().any(|p| !p.reliable) {
                warnings.push("some scattering defects are UNRELIABLE (boundary mass above threshold)".into());
            }
            if let Some(f) = &s.decay_fit {
                fits.push(NamedFit { name: "defect_decay".into(), fit: *f });
            }
        }
        let profile_comparisons = self
            .profiles
            .windows(2)
            .map(|w| ProfileComparison {
                t1: w[0].t,
                t2: w[1].t,
                relative_sup_difference: w[0].relative_sup_difference_from(&w[1], self.options.profile_compare_rho_min),
                rho_min: self.options.profile_compare_rho_min,
                full_grid_sup_difference: w[0].relative_sup_difference(&w[1]),
            })
            .collect();
        let phase = match &self.phase {
            Some(p) => {
                match p.finish(self.n, self.options.phase_match_tolerance) {
                    Ok(r) => {
                        fits.push(NamedFit { name: "phase".into(), fit: r.fit });
                        Some(r)
                    }
                    Err(e) => {
                        violations.push(format!("phase fit failed: {e}"));
                        None
                    }
                }
            }
            None => None,
        };
        let longrange = self.longrange.as_ref().map(|l| l.finish(initial_mass));
        if let Some(l) = &longrange {
            match &l.exponent {
                DecayExponent::Fitted { fit, .. } => fits.push(NamedFit { name: "longrange_pairing".into(), fit: *fit }),
                DecayExponent::Undetermined => {
                    warnings.push("long-range pairing below the noise floor: exponent UNDETERMINED".into())
                }
            }
        }
        DiagnosticsReport {
            series: self.series,
            conservation,
            morawetz,
            virial,
            scattering,
            profiles: self.profiles,
            profile_comparisons,
            phase,
            longrange,
            fits,
            invariant_violations: violations,
            warnings,
            config: None,
        }
    }
}
