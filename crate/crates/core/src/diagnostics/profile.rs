//! Asymptotic profiles of free waves: the modulus `F(ρ)` of the far-field
//! profile and the constant in its phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::fit::{linear_fit, LinearFit};
use crate::discretization::FieldState;
use crate::error::{Error, Result};

/// Uniform grid `ρ_j = j ρ_max / points`, `j = 1..=points`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhoGrid {
    pub rho: Vec<f64>,
}

impl RhoGrid {
    pub fn uniform(rho_max: f64, points: usize) -> Result<Self> {
        if !(rho_max > 0.0 && rho_max.is_finite()) || points == 0 {
            return Err(Error::config("diagnostics.rho_max", "the profile grid needs rho_max > 0 and points > 0"));
        }
        let d = rho_max / points as f64;
        Ok(RhoGrid { rho: (1..=points).map(|j| j as f64 * d).collect() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub rho: Vec<f64>,
    /// `t^{n/2} (phi(tρ)/(tρ))^{(n-1)/2} |u(t, tρ)|`.
    pub f: Vec<f64>,
    /// First `ρ` dropped because `tρ` left the domain.
    pub truncated_at: Option<f64>,
    /// `| |S^{n-1}| ∫ F^2 ρ^{n-1} dρ - mass(u_0) | / mass(u_0)`; `None` for zero data.
    pub unitarity_defect: Option<f64>,
}

impl ProfileSnapshot {
    /// `sup_ρ |F_self - F_other| / sup_ρ F_other` over the common ρ-range.
    pub fn relative_sup_difference(&self, other: &ProfileSnapshot) -> f64 {
        self.relative_sup_difference_from(other, 0.0)
    }

    /// As [`Self::relative_sup_difference`], restricted to `ρ >= rho_min`.
    pub fn relative_sup_difference_from(&self, other: &ProfileSnapshot, rho_min: f64) -> f64 {
        let len = self.f.len().min(other.f.len());
        let keep = |i: &usize| self.rho[*i] >= rho_min;
        let top = (0..len).filter(keep).map(|i| other.f[i]).fold(0.0, f64::max);
        let diff = (0..len).filter(keep).map(|i| (self.f[i] - other.f[i]).abs()).fold(0.0, f64::max);
        if top == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / top
        }
    }
}

/// Far-field profile of `state` on `grid`. Since
/// `(phi/r)^{(n-1)/2} |u| = |w| r^{-(n-1)/2}`, the profile is
/// `t^{1/2} ρ^{-(n-1)/2} |w(tρ)|` with `w` interpolated linearly.
pub fn extract_profile(state: &FieldState, grid: &RhoGrid, initial_mass: f64) -> Result<ProfileSnapshot> {
    let t = state.t;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("profiles need t > 0, got {t}")));
    }
    let g = &state.grid;
    let c = g.profile().half_codim();
    let mut rho = Vec::with_capacity(grid.rho.len());
    let mut f = Vec::with_capacity(grid.rho.len());
    let mut truncated_at = None;
    for &p in &grid.rho {
        match g.interpolate(&state.w, t * p) {
            Some(z) => {
                rho.push(p);
                f.push(t.sqrt() * z.norm() * (-c * p.ln()).exp());
            }
            None => {
                truncated_at = Some(p);
                log::warn!("profile at t = {t} truncated at rho = {p}: t rho exceeds r_max = {}", g.r_max());
                break;
            }
        }
    }
    let n = g.profile().n as i32;
    // trapezoid from ρ = 0, where F^2 ρ^{n-1} = t |w(0)|^2 vanishes
    let mut integral = 0.0;
    let (mut prev_rho, mut prev_val) = (0.0, 0.0);
    for (p, v) in rho.iter().zip(&f) {
        let val = v * v * p.powi(n - 1);
        integral += 0.5 * (p - prev_rho) * (prev_val + val);
        prev_rho = *p;
        prev_val = val;
    }
    let norm_sq = g.sphere_area() * integral;
    let unitarity_defect = (initial_mass > 0.0).then(|| (norm_sq - initial_mass).abs() / initial_mass);
    Ok(ProfileSnapshot { t, rho, f, truncated_at, unitarity_defect })
}

/// Largest admissible phase increment between consecutive samples. Beyond
/// it the unwrapped branch is ambiguous.
pub const MAX_PHASE_STEP: f64 = 0.5 * PI;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseReport {
    pub window: (f64, f64),
    /// `ρ` with the largest `|F|` at the end of the window; `λ_fit` is measured there.
    pub rho_star: f64,
    pub lambda_fit: f64,
    pub fit: LinearFit,
    /// Range of per-`ρ` estimates over the band where `F >= F_max/2`.
    pub band: (f64, f64),
    pub lambda_band: (f64, f64),
    /// `(n-1)/2` and `(n-1)^2/4`.
    pub candidates: [f64; 2],
    /// Candidates within `match_tolerance` of `λ_fit`.
    pub matches: Vec<f64>,
    pub match_tolerance: f64,
}

/// Records `arg(w(t, tρ) e^{-i (tρ)^2/(4t)})` over a time window and fits
/// its slope `-λ`.
#[derive(Clone, Debug)]
pub struct PhaseTracker {
    window: (f64, f64),
    rho: Vec<f64>,
    t: Vec<f64>,
    /// Unwrapped phases, one row per sample.
    phase: Vec<Vec<f64>>,
    last_modulus: Vec<f64>,
    max_step: f64,
}

impl PhaseTracker {
    /// Only `ρ <= r_max / t_end` are tracked, so every column stays inside
    /// the domain over the whole window.
    pub fn new(grid: &RhoGrid, window: (f64, f64), r_max: f64) -> Result<Self> {
        if !(window.0 > 0.0 && window.1 > window.0) {
            return Err(Error::config("diagnostics.phase_window", "needs 0 < t_start < t_end"));
        }
        let rho: Vec<f64> = grid.rho.iter().cloned().filter(|p| p * window.1 <= r_max).collect();
        if rho.is_empty() {
            return Err(Error::config("diagnostics.phase_window", "no profile radius stays inside the domain"));
        }
        Ok(PhaseTracker { window, rho, t: Vec::new(), phase: Vec::new(), last_modulus: Vec::new(), max_step: 0.0 })
    }

    pub fn observe(&mut self, state: &FieldState) {
        let t = state.t;
        let eps = 1e-9 * self.window.1;
        if t < self.window.0 - eps || t > self.window.1 + eps {
            return;
        }
        let g = &state.grid;
        let mut row = Vec::with_capacity(self.rho.len());
        let mut modulus = Vec::with_capacity(self.rho.len());
        for (j, &p) in self.rho.iter().enumerate() {
            let r = t * p;
            let z = g.interpolate(&state.w, r).unwrap_or_default() * Complex64::from_polar(1.0, -r * r / (4.0 * t));
            let raw = z.arg();
            let value = match self.phase.last() {
                Some(prev) => {
                    let step = (raw - prev[j] + PI).rem_euclid(2.0 * PI) - PI;
                    self.max_step = self.max_step.max(step.abs());
                    prev[j] + step
                }
                None => raw,
            };
            row.push(value);
            modulus.push(z.norm());
        }
        self.t.push(t);
        self.phase.push(row);
        self.last_modulus = modulus;
    }

    /// Fits the phase slope. `n` selects the candidate constants.
    pub fn finish(&self, n: u32, match_tolerance: f64) -> Result<PhaseReport> {
        if self.t.len() < 3 {
            return Err(Error::Domain(format!("phase fit needs at least 3 samples in the window, got {}", self.t.len())));
        }
        if self.max_step > MAX_PHASE_STEP {
            return Err(Error::Numerical {
                step: 0,
                t: self.window.0,
                message: format!(
                    "phase unwrapping ambiguous: increment {:.3} rad between samples exceeds {:.3}; shrink the sampling interval",
                    self.max_step, MAX_PHASE_STEP
                ),
            });
        }
        // F is |w| rescaled by a ρ-dependent factor
        let c = 0.5 * (n as f64 - 1.0);
        let f: Vec<f64> = self.rho.iter().zip(&self.last_modulus).map(|(p, m)| m * (-c * p.ln()).exp()).collect();
        let (star, f_max) = f.iter().enumerate().fold((0, 0.0), |acc, (j, v)| if *v > acc.1 { (j, *v) } else { acc });
        if f_max == 0.0 {
            return Err(Error::Domain("phase fit on a vanishing field".into()));
        }
        let column = |j: usize| -> Vec<f64> { self.phase.iter().map(|row| row[j]).collect() };
        let fit = linear_fit(&self.t, &column(star))?;
        let mut band = (f64::INFINITY, f64::NEG_INFINITY);
        let mut lambda_band = (f64::INFINITY, f64::NEG_INFINITY);
        for (j, v) in f.iter().enumerate() {
            if *v >= 0.5 * f_max {
                let l = -linear_fit(&self.t, &column(j))?.slope;
                band = (band.0.min(self.rho[j]), band.1.max(self.rho[j]));
                lambda_band = (lambda_band.0.min(l), lambda_band.1.max(l));
            }
        }
        let lambda_fit = -fit.slope;
        let nf = n as f64;
        let candidates = [0.5 * (nf - 1.0), 0.25 * (nf - 1.0) * (nf - 1.0)];
        let mut matches: Vec<f64> = candidates.iter().cloned().filter(|c| (c - lambda_fit).abs() <= match_tolerance).collect();
        matches.dedup();
        Ok(PhaseReport {
            window: self.window,
            rho_star: self.rho[star],
            lambda_fit,
            fit,
            band,
            lambda_band,
            candidates,
            matches,
            match_tolerance,
        })
    }
}
