//! Decay of the pairing `D(t) = |<U_0(t)ψ, |u|^{2σ}u(t)>|`, whose
//! integrability in time separates short-range from long-range power
//! nonlinearities.

use std::sync::Arc;

use serde::Serialize;

use super::fit::{power_law_fit, LinearFit};
use crate::discretization::{bump_data, FieldState, RadialGrid};
use crate::error::{Error, Result};
use crate::evolution::{Integrator, IntegratorConfig, Mode};
use crate::geometry::scattering_dimension;

/// `D(t)` below `NOISE_FLOOR · mass(u_0)` is treated as numerical noise.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecayExponent {
    /// `D ~ t^{-β}` fitted over the window.
    Fitted { beta: f64, fit: LinearFit },
    /// `D` is below the noise floor throughout the window.
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongRangeReport {
    pub t: Vec<f64>,
    pub pairing: Vec<f64>,
    pub window: (f64, f64),
    pub noise_floor: f64,
    pub exponent: DecayExponent,
    /// `N σ`; `None` on hyperbolic space, where `N` is infinite.
    pub predicted: Option<f64>,
    /// `β > 1`: the pairing is integrable in time.
    pub short_range: Option<bool>,
}

/// Carries `U_0(t)ψ` along with the nonlinear trajectory.
#[derive(Debug)]
pub struct LongRangeTracker {
    sigma: f64,
    psi: FieldState,
    free: Integrator,
    window_start: f64,
    t: Vec<f64>,
    pairing: Vec<f64>,
}

impl LongRangeTracker {
    /// `ψ` is the smooth unit bump on `[inner, outer]`; the fit covers
    /// `t >= window_start`.
    pub fn new(
        grid: Arc<RadialGrid>,
        config: &IntegratorConfig,
        psi_support: (f64, f64),
        window_start: f64,
    ) -> Result<Self> {
        if config.mode != Mode::Nonlinear || !(config.sigma > 0.0) {
            return Err(Error::config("sigma", "the long-range indicator needs a nonlinear run"));
        }
        let psi = bump_data(grid.clone(), 1.0, psi_support.0, psi_support.1)?;
        let free = Integrator::new(grid, IntegratorConfig { mode: Mode::Free, ..*config })?;
        Ok(LongRangeTracker { sigma: config.sigma, psi, free, window_start, t: Vec::new(), pairing: Vec::new() })
    }

    /// `|S^{n-1}| h Σ conj(ψ_w) |u|^{2σ} w`.
    pub fn pairing(psi: &FieldState, state: &FieldState, sigma: f64) -> f64 {
        let g = &state.grid;
        let w = &state.w;
        let s: num_complex::Complex64 = (0..w.len())
            .map(|i| psi.w[i].conj() * w[i] * g.abs_u_pow(w, i, 2.0 * sigma))
            .sum();
        g.sphere_area() * g.h() * s.norm()
    }

    pub fn observe(&mut self, state: &FieldState) -> Result<()> {
        let span = state.t - self.psi.t;
        if span < 0.0 {
            return Err(Error::Domain("long-range samples must be in time order".into()));
        }
        let steps = self.free.steps_for(span, "time.sample_every")?;
        self.free.advance(&mut self.psi, steps)?;
        self.psi.t = state.t;
        self.t.push(state.t);
        self.pairing.push(Self::pairing(&self.psi, state, self.sigma));
        Ok(())
    }

    pub fn finish(&self, initial_mass: f64) -> LongRangeReport {
        let floor = NOISE_FLOOR * initial_mass;
        let t_end = self.t.last().copied().unwrap_or(0.0);
        let (wt, wd): (Vec<f64>, Vec<f64>) = self
            .t
            .iter()
            .zip(&self.pairing)
            .filter(|(t, d)| **t >= self.window_start - 1e-9 && **t > 0.0 && **d > floor)
            .map(|(t, d)| (*t, *d))
            .unzip();
        let exponent = match power_law_fit(&wt, &wd) {
            Ok(fit) if wt.len() >= 3 => DecayExponent::Fitted { beta: -fit.slope, fit },
            _ => DecayExponent::Undetermined,
        };
        let predicted = scattering_dimension(self.psi.grid.profile()).finite().map(|n| n as f64 * self.sigma);
        let short_range = match &exponent {
            DecayExponent::Fitted { beta, .. } => Some(*beta > 1.0),
            DecayExponent::Undetermined => None,
        };
        LongRangeReport {
            t: self.t.clone(),
            pairing: self.pairing.clone(),
            window: (self.window_start, t_end),
            noise_floor: floor,
            exponent,
            predicted,
            short_range,
        }
    }
}
