//! Time integration of `i w_t = -w_rr + V_eff w + |u|^{2σ} w` on `(0, r_max)`
//! with Dirichlet ends: Crank–Nicolson for the linear part, the exact phase
//! rotation for the nonlinear part, and Strang splitting between them.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretization::{FieldState, RadialGrid};
use crate::error::{Error, Result};
use crate::tridiag::{Factored, Tridiagonal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nonlinear,
    Free,
}

/// Parameters of one integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub sigma: f64,
    pub mode: Mode,
    /// Relative residual accepted from each tridiagonal solve.
    pub solver_tol: f64,
    /// Largest mass fraction tolerated in `[0.9 r_max, r_max]`.
    pub leak_threshold: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            sigma: 0.5,
            mode: Mode::Nonlinear,
            solver_tol: 1e-12,
            leak_threshold: 1e-6,
        }
    }
}

/// Diagonal and (constant) off-diagonal of `H = -D_2 + diag(V_eff)`.
pub fn hamiltonian(grid: &RadialGrid) -> (Vec<f64>, f64) {
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    (grid.v_eff().iter().map(|v| 2.0 * inv_h2 + v).collect(), -inv_h2)
}

/// `(I + i dt/2 H, I - i dt/2 H)`.
pub fn cayley_pair(grid: &RadialGrid, dt: f64) -> (Tridiagonal, Tridiagonal) {
    let (diag, off) = hamiltonian(grid);
    let tau = 0.5 * dt;
    let build = |sign: f64| {
        let m = diag.len();
        Tridiagonal::new(
            vec![Complex64::new(0.0, sign * tau * off); m],
            diag.iter().map(|d| Complex64::new(1.0, sign * tau * d)).collect(),
            vec![Complex64::new(0.0, sign * tau * off); m],
        )
    };
    (build(1.0), build(-1.0))
}

/// Multiplies `w` by `exp(-i dt |u|^{2σ})` node by node. `|u|` is invariant
/// under this map, so the step is exact and preserves `|w|`.
pub fn nonlinear_step(state: &mut FieldState, dt: f64, sigma: f64) {
    let grid = state.grid.clone();
    for (i, z) in state.w.iter_mut().enumerate() {
        let a = z.norm();
        if a == 0.0 {
            continue;
        }
        // |u|^{2σ} = exp(σ (ln|w|² - 2 half_i)), never forming phi^{-(n-1)σ} separately
        let g = (2.0 * sigma * (a.ln() - grid.half_log_measure()[i])).exp();
        *z *= Complex64::from_polar(1.0, -dt * g);
    }
}

/// One Crank–Nicolson step with a fresh factorisation; the integrator
/// reuses its factors instead.
pub fn linear_step(state: &mut FieldState, dt: f64, solver_tol: f64) -> Result<()> {
    let (plus, minus) = cayley_pair(&state.grid, dt);
    let plus = plus.factor().ok_or_else(|| numerical(0, state.t, "singular Crank-Nicolson matrix"))?;
    let mut work = Workspace::new(state.w.len());
    cayley_apply(&plus, &minus, &mut state.w, &mut work, solver_tol).map_err(|res| {
        numerical(0, state.t, &format!("tridiagonal residual {res:.3e} above {solver_tol:.1e}"))
    })?;
    state.t += dt;
    Ok(())
}

fn numerical(step: u64, t: f64, message: &str) -> Error {
    Error::Numerical {
        step,
        t,
        message: message.to_string(),
    }
}

#[derive(Clone, Debug)]
struct Workspace {
    rhs: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Workspace {
    fn new(m: usize) -> Self {
        Workspace {
            rhs: vec![Complex64::new(0.0, 0.0); m],
            scratch: vec![Complex64::new(0.0, 0.0); m],
        }
    }
}

/// `w <- solve^{-1} (explicit w)`; `Err` carries the final residual.
fn cayley_apply(
    solve: &Factored,
    explicit: &Tridiagonal,
    w: &mut [Complex64],
    work: &mut Workspace,
    tol: f64,
) -> std::result::Result<(), f64> {
    explicit.apply(w, &mut work.rhs);
    let report = solve.solve_checked(&work.rhs, w, &mut work.scratch, tol);
    if report.relative_residual <= tol {
        Ok(())
    } else {
        Err(report.relative_residual)
    }
}

/// A pre-factored integrator for one grid and time step.
#[derive(Clone, Debug)]
pub struct Integrator {
    grid: Arc<RadialGrid>,
    config: IntegratorConfig,
    plus_factored: Factored,
    minus_factored: Factored,
    work: Workspace,
    steps_taken: u64,
}

impl Integrator {
    pub fn new(grid: Arc<RadialGrid>, config: IntegratorConfig) -> Result<Self> {
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(Error::config("time.dt", format!("must be positive, got {}", config.dt)));
        }
        if config.mode == Mode::Nonlinear && !(config.sigma > 0.0) {
            return Err(Error::config("sigma", format!("must be positive, got {}", config.sigma)));
        }
        let (plus, minus) = cayley_pair(&grid, config.dt);
        let fail = || numerical(0, 0.0, "singular Crank-Nicolson matrix");
        let plus_factored = plus.factor().ok_or_else(fail)?;
        let minus_factored = minus.factor().ok_or_else(fail)?;
        let m = grid.m();
        Ok(Integrator {
            grid,
            config,
            plus_factored,
            minus_factored,
            work: Workspace::new(m),
            steps_taken: 0,
        })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn check_grid(&self, state: &FieldState) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &state.grid) || state.w.len() == self.grid.m() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "state has {} samples but the integrator grid has {}",
                state.w.len(),
                self.grid.m()
            )))
        }
    }

    fn forward_linear(&mut self, w: &mut [Complex64], t: f64) -> Result<()> {
        self.steps_taken += 1;
        let tol = self.config.solver_tol;
        cayley_apply(&self.plus_factored, self.minus_factored.matrix(), w, &mut self.work, tol)
            .map_err(|res| numerical(self.steps_taken, t, &format!("tridiagonal residual {res:.3e} above {tol:.1e}")))
    }

    fn backward_linear(&mut self, w: &mut [Complex64], t: f64) -> Result<()> {
        self.steps_taken += 1;
        let tol = self.config.solver_tol;
        cayley_apply(&self.minus_factored, self.plus_factored.matrix(), w, &mut self.work, tol)
            .map_err(|res| numerical(self.steps_taken, t, &format!("tridiagonal residual {res:.3e} above {tol:.1e}")))
    }

    /// One Crank–Nicolson step of the free flow.
    pub fn linear_step(&mut self, state: &mut FieldState) -> Result<()> {
        self.check_grid(state)?;
        self.forward_linear(&mut state.w, state.t)?;
        state.t += self.config.dt;
        Ok(())
    }

    /// Advances by `steps` time steps. Consecutive nonlinear half steps are
    /// merged, which is exact because the phase rotation preserves `|u|`.
    pub fn advance(&mut self, state: &mut FieldState, steps: u64) -> Result<()> {
        self.check_grid(state)?;
        if steps == 0 {
            return Ok(());
        }
        let dt = self.config.dt;
        let t0 = state.t;
        match self.config.mode {
            Mode::Free => {
                for s in 0..steps {
                    self.forward_linear(&mut state.w, t0 + s as f64 * dt)?;
                }
            }
            Mode::Nonlinear => {
                let sigma = self.config.sigma;
                nonlinear_step(state, 0.5 * dt, sigma);
                for s in 0..steps {
                    self.forward_linear(&mut state.w, t0 + s as f64 * dt)?;
                    let sub = if s + 1 == steps { 0.5 * dt } else { dt };
                    nonlinear_step(state, sub, sigma);
                }
            }
        }
        state.t = t0 + steps as f64 * dt;
        if state.w.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(numerical(self.steps_taken, state.t, "non-finite field value"));
        }
        Ok(())
    }

    /// Applies the inverse Cayley map `steps` times (free flow backwards).
    pub fn retreat(&mut self, state: &mut FieldState, steps: u64) -> Result<()> {
        self.check_grid(state)?;
        let dt = self.config.dt;
        let t0 = state.t;
        for s in 0..steps {
            self.backward_linear(&mut state.w, t0 - s as f64 * dt)?;
        }
        state.t = t0 - steps as f64 * dt;
        Ok(())
    }

    /// Number of steps covering `span`, which must be a multiple of `dt`.
    pub fn steps_for(&self, span: f64, what: &str) -> Result<u64> {
        let dt = self.config.dt;
        let steps = (span / dt).round();
        if !(span >= 0.0) || (steps * dt - span).abs() > 1e-9 * span.abs().max(dt) {
            return Err(Error::config(what, format!("{span} is not a non-negative multiple of dt = {dt}")));
        }
        Ok(steps as u64)
    }

    /// `e^{-i (t - t0) H}` applied backwards: the candidate scattering state at `t0`.
    pub fn free_backpropagate(&mut self, state: &FieldState, t0: f64) -> Result<FieldState> {
        let steps = self.steps_for(state.t - t0, "backpropagation span")?;
        let mut out = state.clone();
        self.retreat(&mut out, steps)?;
        out.t = t0;
        Ok(out)
    }

    /// Runs to `t_final`, handing the state to `observer` at the start and
    /// after every `sample_interval`, and enforcing the boundary-leak bound at
    /// each sample.
    pub fn evolve(
        &mut self,
        mut state: FieldState,
        t_final: f64,
        sample_interval: f64,
        mut observer: impl FnMut(&FieldState) -> Result<()>,
    ) -> Result<FieldState> {
        if !(t_final > state.t) {
            return Err(Error::config("time.t_final", format!("must exceed the start time {}", state.t)));
        }
        let per_sample = self.steps_for(sample_interval, "time.sample_every")?.max(1);
        let total = self.steps_for(t_final - state.t, "time.t_final")?;
        if total % per_sample != 0 {
            return Err(Error::config(
                "time.sample_every",
                format!("the run length {} is not a multiple of the sampling interval", t_final - state.t),
            ));
        }
        let t_start = state.t;
        self.check_leak(&state)?;
        observer(&state)?;
        for k in 1..=total / per_sample {
            self.advance(&mut state, per_sample)?;
            // re-anchor to avoid drift in the sampled times
            state.t = t_start + (k * per_sample) as f64 * self.config.dt;
            self.check_leak(&state)?;
            observer(&state)?;
        }
        Ok(state)
    }

    fn check_leak(&self, state: &FieldState) -> Result<()> {
        let fraction = state.leak_fraction();
        if fraction > self.config.leak_threshold {
            return Err(Error::DomainTooSmall {
                t: state.t,
                fraction,
                threshold: self.config.leak_threshold,
            });
        }
        Ok(())
    }
}

/// RMS wavenumber `sqrt(Σ|D w|² / Σ|w|²)` of the reduced field, capped by the
/// grid Nyquist value `π/h`.
pub fn rms_wavenumber(state: &FieldState) -> f64 {
    let h = state.grid.h();
    let w = &state.w;
    let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if norm == 0.0 {
        return 0.0;
    }
    let zero = Complex64::new(0.0, 0.0);
    let grad: f64 = (0..=w.len())
        .map(|i| {
            let right = w.get(i).copied().unwrap_or(zero);
            let left = if i == 0 { zero } else { w[i - 1] };
            (right - left).norm_sqr()
        })
        .sum::<f64>()
        / (h * h);
    (grad / norm).sqrt().min(std::f64::consts::PI / h)
}

/// Smallest `r_max` for which waves launched by `state` stay clear of the
/// wall until `t_final`: `r_data + 2 ξ t_final` with `ξ` the RMS wavenumber,
/// capped at `xi_cap`.
pub fn required_radius(state: &FieldState, r_data: f64, t_final: f64, xi_cap: f64) -> f64 {
    r_data + 2.0 * rms_wavenumber(state).min(xi_cap) * t_final
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{bump_data, gaussian_data};
    use crate::geometry::ManifoldProfile;

    fn grid(profile: ManifoldProfile, r_max: f64, m: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(profile, r_max, m).unwrap())
    }

    fn free(dt: f64) -> IntegratorConfig {
        IntegratorConfig {
            dt,
            mode: Mode::Free,
            ..IntegratorConfig::default()
        }
    }

    #[test]
    fn eigenvector_evolves_by_cayley_factor() {
        // k = 0, n = 3: V_eff = 0, so sin(jπ r/r_max) is an exact eigenvector of H
        let g = grid(ManifoldProfile::euclidean(3).unwrap(), 1.0, 63);
        let h = g.h();
        let j = 3.0;
        let mut s = FieldState::zeros(g.clone());
        for (i, r) in g.nodes().iter().enumerate() {
            s.w[i] = Complex64::new((j * std::f64::consts::PI * r).sin(), 0.0);
        }
        let lambda = 4.0 / (h * h) * (j * std::f64::consts::PI * h / 2.0).sin().powi(2);
        let dt = 0.01;
        let factor = Complex64::new(1.0, -0.5 * dt * lambda) / Complex64::new(1.0, 0.5 * dt * lambda);
        let before = s.w.clone();
        linear_step(&mut s, dt, 1e-13).unwrap();
        for (a, b) in s.w.iter().zip(&before) {
            assert!((a - b * factor).norm() < 1e-13);
        }
        assert!((factor.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_state_is_fixed() {
        let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 20.0, 200);
        let mut it = Integrator::new(g.clone(), IntegratorConfig::default()).unwrap();
        let mut s = FieldState::zeros(g.clone());
        it.advance(&mut s, 10).unwrap();
        assert!(s.w.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        let back = it.free_backpropagate(&s, 0.0).unwrap();
        assert!(back.w.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn nonlinear_step_examples() {
        let g = grid(ManifoldProfile::euclidean(3).unwrap(), 10.0, 9);
        let mut s = FieldState::zeros(g.clone());
        // u = 1 at r = 2 means w = r = 2
        s.w[1] = Complex64::new(2.0, 0.0);
        nonlinear_step(&mut s, 0.1, 0.5);
        assert!((s.w[1].arg() + 0.1).abs() < 1e-15);
        assert!((s.w[1].norm() - 2.0).abs() < 1e-15);

        let base = gaussian_data(grid(ManifoldProfile::hyperbolic(4).unwrap(), 20.0, 300), 0.8, 1.5).unwrap();
        let mut a = base.clone();
        nonlinear_step(&mut a, 0.05, 0.4);
        nonlinear_step(&mut a, 0.05, 0.4);
        let mut b = base.clone();
        nonlinear_step(&mut b, 0.1, 0.4);
        for ((x, y), z) in a.w.iter().zip(&b.w).zip(&base.w) {
            assert!((x.norm() - z.norm()).abs() <= 1e-15 * z.norm());
            assert!((x - y).norm() <= 1e-14 * z.norm());
        }
    }

    #[test]
    fn free_mode_equals_repeated_linear_steps() {
        let g = grid(ManifoldProfile::finite(4, 1).unwrap(), 30.0, 500);
        let s0 = gaussian_data(g.clone(), 1.0, 1.5).unwrap();
        let mut it = Integrator::new(g.clone(), free(0.01)).unwrap();
        let mut a = s0.clone();
        it.advance(&mut a, 25).unwrap();
        let mut b = s0.clone();
        for _ in 0..25 {
            it.linear_step(&mut b).unwrap();
        }
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn backpropagation_inverts_free_flow() {
        let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 40.0, 2000);
        let s0 = gaussian_data(g.clone(), 1.0, 2.0).unwrap();
        let mut it = Integrator::new(g, free(0.005)).unwrap();
        let mut s = s0.clone();
        it.advance(&mut s, 2000).unwrap();
        let back = it.free_backpropagate(&s, 0.0).unwrap();
        assert!(back.l2_distance(&s0) < 1e-8 * s0.mass().sqrt(), "{}", back.l2_distance(&s0));
        assert_eq!(back.t, 0.0);
    }

    #[test]
    fn mass_is_conserved_in_both_modes() {
        let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 40.0, 1000);
        for mode in [Mode::Free, Mode::Nonlinear] {
            let s0 = gaussian_data(g.clone(), 1.0, 2.0).unwrap();
            let cfg = IntegratorConfig { dt: 0.01, mode, sigma: 0.5, ..IntegratorConfig::default() };
            let mut it = Integrator::new(g.clone(), cfg).unwrap();
            let mut s = s0.clone();
            it.advance(&mut s, 1000).unwrap();
            assert!(((s.mass() - s0.mass()) / s0.mass()).abs() < 1e-11, "{mode:?}");
        }
    }

    #[test]
    fn free_flow_conserves_the_discrete_kinetic_energy() {
        let g = grid(ManifoldProfile::finite(4, 2).unwrap(), 40.0, 1000);
        let s0 = gaussian_data(g.clone(), 1.0, 1.0).unwrap();
        let mut it = Integrator::new(g, free(0.01)).unwrap();
        let mut s = s0.clone();
        it.advance(&mut s, 500).unwrap();
        let (e0, e1) = (s0.kinetic_energy(), s.kinetic_energy());
        assert!(((e1 - e0) / e0).abs() < 1e-11, "{e0} {e1}");
    }

    #[test]
    fn euclidean_gaussian_matches_closed_form() {
        // u(t) = (1+2it)^{-n/2} exp(-r²/(2(1+2it))) for u0 = e^{-r²/2}
        let g = grid(ManifoldProfile::euclidean(4).unwrap(), 40.0, 4095);
        let s0 = gaussian_data(g.clone(), 1.0, 1.0).unwrap();
        let mut it = Integrator::new(g.clone(), free(2e-3)).unwrap();
        let mut s = s0.clone();
        it.advance(&mut s, 500).unwrap();
        let exact: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&r| {
                let z = Complex64::new(1.0, 2.0);
                z.powf(-2.0) * (-r * r / (2.0 * z)).exp()
            })
            .collect();
        let e = FieldState::from_u(g, 1.0, &exact).unwrap();
        assert!(s.l2_distance(&e) < 5e-4, "{}", s.l2_distance(&e));
    }

    #[test]
    fn leak_monitor_aborts() {
        let g = grid(ManifoldProfile::euclidean(4).unwrap(), 16.0, 800);
        let s0 = gaussian_data(g.clone(), 1.0, 1.0).unwrap();
        let mut it = Integrator::new(g, IntegratorConfig { leak_threshold: 1e-8, ..free(0.01) }).unwrap();
        match it.evolve(s0, 20.0, 0.5, |_| Ok(())) {
            Err(Error::DomainTooSmall { t, fraction, .. }) => assert!(t > 0.0 && fraction > 1e-8),
            other => panic!("expected a leak abort, got {other:?}"),
        }
    }

    #[test]
    fn evolve_samples_on_schedule() {
        let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 30.0, 300);
        let s0 = bump_data(g.clone(), 0.5, 1.0, 3.0).unwrap();
        let mut it = Integrator::new(g, IntegratorConfig { dt: 0.01, ..IntegratorConfig::default() }).unwrap();
        let mut times = Vec::new();
        let end = it
            .evolve(s0, 1.0, 0.25, |s| {
                times.push(s.t);
                Ok(())
            })
            .unwrap();
        assert_eq!(times, [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(end.t, 1.0);
        assert!(it.evolve(end.clone(), 2.0, 0.333, |_| Ok(())).is_err());
        assert!(it.evolve(end, 0.5, 0.25, |_| Ok(())).is_err());
    }

    #[test]
    fn wavenumber_estimate() {
        let g = grid(ManifoldProfile::euclidean(3).unwrap(), 40.0, 4000);
        // w = r e^{-r²/(2s²)}: ξ_rms² = 3/(2s²) for this radial profile
        let s = gaussian_data(g.clone(), 1.0, 2.0).unwrap();
        let xi = rms_wavenumber(&s);
        assert!((xi - (1.5f64).sqrt() / 2.0).abs() < 1e-3, "{xi}");
        assert_eq!(rms_wavenumber(&FieldState::zeros(g)), 0.0);
    }
}
