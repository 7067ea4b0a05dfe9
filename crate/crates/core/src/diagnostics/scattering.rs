//! Scattering defects: distances between free back-propagations of the
//! nonlinear solution taken at different times.

use std::sync::Arc;

use serde::Serialize;

use super::fit::{power_law_fit, LinearFit};
use crate::discretization::{FieldState, RadialGrid};
use crate::error::{Error, Result};
use crate::evolution::{Integrator, IntegratorConfig, Mode};

/// `‖U_0(-t2)u(t2) - U_0(-t1)u(t1)‖_{H^1}` for two states of one trajectory,
/// back-propagated with the free integrator `free`.
pub fn scattering_defect(free: &mut Integrator, u1: &FieldState, u2: &FieldState) -> Result<f64> {
    if free.config().mode != Mode::Free {
        return Err(Error::Domain("scattering defects need a free-flow integrator".into()));
    }
    let a = free.free_backpropagate(u1, 0.0)?;
    let b = free.free_backpropagate(u2, 0.0)?;
    Ok(b.h1_distance(&a))
}

/// Back-propagated snapshot `U_0(-t) u(t)`.
#[derive(Clone, Debug)]
pub struct Backpropagated {
    pub t: f64,
    pub state: FieldState,
    /// Boundary mass fraction of `u(t)` and of its back-propagation.
    pub leak: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DefectPair {
    pub t1: f64,
    pub t2: f64,
    /// `‖U_0(-t2)u(t2) - U_0(-t1)u(t1)‖_{H^1}`.
    pub defect: f64,
    /// `false` when either snapshot had boundary mass above the threshold.
    pub reliable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatteringReport {
    /// `defect(T, 2T)` for every dyadic pair of recorded times, then all
    /// remaining consecutive pairs.
    pub pairs: Vec<DefectPair>,
    /// Power-law fit `defect(T, 2T) ~ T^{slope}` over the reliable dyadic pairs.
    pub decay_fit: Option<LinearFit>,
    /// `defect(T, 2T)/defect(2T, 4T)` for consecutive dyadic pairs.
    pub dyadic_ratios: Vec<f64>,
}

/// Records back-propagated snapshots at prescribed times.
#[derive(Debug)]
pub struct ScatteringTracker {
    times: Vec<f64>,
    free: Integrator,
    leak_threshold: f64,
    snapshots: Vec<Backpropagated>,
}

impl ScatteringTracker {
    /// `times` must be positive; the integrator config supplies `dt` and the
    /// solver tolerance of the free flow used for back-propagation.
    pub fn new(grid: Arc<RadialGrid>, config: &IntegratorConfig, mut times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::config("diagnostics.defect_times", "times must be positive and finite"));
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        let free = Integrator::new(grid, IntegratorConfig { mode: Mode::Free, ..*config })?;
        Ok(ScatteringTracker {
            times,
            free,
            leak_threshold: config.leak_threshold,
            snapshots: Vec::new(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Back-propagates `state` if its time is one of the recording times.
    pub fn observe(&mut self, state: &FieldState) -> Result<Option<&Backpropagated>> {
        let tol = 0.5 * self.free.config().dt;
        if !self.times.iter().any(|t| (t - state.t).abs() <= tol) {
            return Ok(None);
        }
        let back = self.free.free_backpropagate(state, 0.0)?;
        let leak = state.leak_fraction().max(back.leak_fraction());
        self.snapshots.push(Backpropagated { t: state.t, state: back, leak });
        Ok(self.snapshots.last())
    }

    pub fn snapshots(&self) -> &[Backpropagated] {
        &self.snapshots
    }

    /// Defect between two recorded snapshots.
    pub fn defect(&self, t1: f64, t2: f64) -> Option<DefectPair> {
        let tol = 0.5 * self.free.config().dt;
        let find = |t: f64| self.snapshots.iter().find(|s| (s.t - t).abs() <= tol);
        let (a, b) = (find(t1)?, find(t2)?);
        Some(DefectPair {
            t1: a.t,
            t2: b.t,
            defect: b.state.h1_distance(&a.state),
            reliable: a.leak <= self.leak_threshold && b.leak <= self.leak_threshold,
        })
    }

    /// Most recent `defect(t/2, t)` ending at the last snapshot, if recorded.
    pub fn latest_dyadic(&self) -> Option<DefectPair> {
        let last = self.snapshots.last()?;
        self.defect(0.5 * last.t, last.t)
    }

    pub fn finish(&self) -> ScatteringReport {
        let mut dyadic = Vec::new();
        let mut others = Vec::new();
        for (i, a) in self.snapshots.iter().enumerate() {
            if let Some(p) = self.defect(a.t, 2.0 * a.t) {
                dyadic.push(p);
            }
            if let Some(b) = self.snapshots.get(i + 1) {
                if (b.t - 2.0 * a.t).abs() > 0.5 * self.free.config().dt {
                    others.extend(self.defect(a.t, b.t));
                }
            }
        }
        let good: Vec<&DefectPair> = dyadic.iter().filter(|p| p.reliable && p.defect > 0.0).collect();
        let decay_fit = if good.len() >= 2 {
            let t: Vec<f64> = good.iter().map(|p| p.t1).collect();
            let d: Vec<f64> = good.iter().map(|p| p.defect).collect();
            power_law_fit(&t, &d).ok()
        } else {
            None
        };
        let dyadic_ratios = dyadic
            .windows(2)
            .filter(|w| (w[1].t1 - w[0].t2).abs() <= 0.5 * self.free.config().dt)
            .map(|w| w[0].defect / w[1].defect)
            .collect();
        let mut pairs = dyadic;
        pairs.extend(others);
        ScatteringReport { pairs, decay_fit, dyadic_ratios }
    }
}
