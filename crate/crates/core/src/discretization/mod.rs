//! Uniform radial grids, fields in the reduced representation
//! `w = phi^{(n-1)/2} u`, and the quadratures built on them.
//!
//! Nodes are `r_i = i h`, `i = 1..=m`, `h = r_max/(m+1)`, with `w = 0` at
//! both `r = 0` and `r = r_max`. Geometric factors such as `phi^{n-1}` are
//! kept in log form, since on hyperbolic profiles they overflow long before
//! the field itself becomes negligible.

pub mod io;

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    effective_potential, ln_phi, ln_strichartz_weight, morawetz_kernel, morawetz_kernel_normalized,
    morawetz_weights, ManifoldProfile,
};

/// `ln` of the magnitude below which initial samples are stored as zero.
const FLUSH_LN: f64 = -640.0;

/// Immutable grid with precomputed geometry at every node.
#[derive(Debug)]
pub struct RadialGrid {
    profile: ManifoldProfile,
    r_max: f64,
    h: f64,
    r: Vec<f64>,
    /// `(n-1)/2 · ln phi(r_i)`.
    half_log_measure: Vec<f64>,
    /// `(phi(r_i)/phi(r_{i-1}))^{(n-1)/2}`, with `1` at `i = 0`.
    ratio_prev: Vec<f64>,
    /// `(phi(r_i)/phi(r_{i+1}))^{(n-1)/2}`, with `1` at `i = m-1`.
    ratio_next: Vec<f64>,
    v_eff: Vec<f64>,
    ln_weight: Vec<f64>,
    lap_a: Vec<f64>,
    neg_bilap_a: Vec<f64>,
    morawetz_kernel: Vec<f64>,
    inverse_cube: Vec<f64>,
    sphere_area: f64,
}

impl RadialGrid {
    pub fn new(profile: ManifoldProfile, r_max: f64, m: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Domain(format!("r_max must be positive and finite, got {r_max}")));
        }
        if m < 2 {
            return Err(Error::Domain(format!("a grid needs at least 2 interior points, got {m}")));
        }
        let h = r_max / (m + 1) as f64;
        let half_codim = profile.half_codim();
        let mut r = Vec::with_capacity(m);
        let mut half = Vec::with_capacity(m);
        let mut v_eff = Vec::with_capacity(m);
        let mut ln_weight = Vec::with_capacity(m);
        let mut lap_a = Vec::with_capacity(m);
        let mut neg_bilap_a = Vec::with_capacity(m);
        let mut kernel = Vec::with_capacity(m);
        let mut inverse_cube = Vec::with_capacity(m);
        for i in 1..=m {
            let ri = i as f64 * h;
            r.push(ri);
            half.push(half_codim * ln_phi(&profile, ri)?);
            v_eff.push(effective_potential(&profile, ri)?.v_eff);
            ln_weight.push(ln_strichartz_weight(&profile, ri)?);
            let mw = morawetz_weights(&profile, ri)?;
            lap_a.push(mw.lap_a);
            neg_bilap_a.push(mw.neg_bilap_a);
            kernel.push(morawetz_kernel(&profile, ri)?);
            inverse_cube.push(1.0 / (ri * ri * ri));
        }
        let ratio_prev = (0..m).map(|i| if i == 0 { 1.0 } else { (half[i] - half[i - 1]).exp() }).collect();
        let ratio_next = (0..m).map(|i| if i + 1 == m { 1.0 } else { (half[i] - half[i + 1]).exp() }).collect();
        Ok(RadialGrid {
            profile,
            r_max,
            h,
            r,
            half_log_measure: half,
            ratio_prev,
            ratio_next,
            v_eff,
            ln_weight,
            lap_a,
            neg_bilap_a,
            morawetz_kernel: kernel,
            inverse_cube,
            sphere_area: profile.sphere_area(),
        })
    }

    pub fn profile(&self) -> &ManifoldProfile {
        &self.profile
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn sphere_area(&self) -> f64 {
        self.sphere_area
    }

    /// `V_eff(r_i)` of the reduced operator `-d²/dr² + V_eff`.
    pub fn v_eff(&self) -> &[f64] {
        &self.v_eff
    }

    /// `(n-1)/2 · ln phi(r_i)`, so that `u_i = w_i e^{-half_i}`.
    pub fn half_log_measure(&self) -> &[f64] {
        &self.half_log_measure
    }

    /// `ln w_n(r_i)`.
    pub fn ln_strichartz_weight(&self) -> &[f64] {
        &self.ln_weight
    }

    /// `Δa(r_i)`.
    pub fn lap_a(&self) -> &[f64] {
        &self.lap_a
    }

    /// `-Δ²a(r_i)`.
    pub fn neg_bilap_a(&self) -> &[f64] {
        &self.neg_bilap_a
    }

    /// Morawetz integrand weight, see [`morawetz_kernel`].
    pub fn morawetz_kernel(&self) -> &[f64] {
        &self.morawetz_kernel
    }

    pub fn morawetz_kernel_normalized(&self) -> bool {
        morawetz_kernel_normalized(&self.profile)
    }

    /// `1/r_i^3`, the comparison weight on `M_k^n`.
    pub fn inverse_cube(&self) -> &[f64] {
        &self.inverse_cube
    }

    /// `|u_i|` from `w_i`, underflowing gracefully where `phi` is huge.
    pub fn abs_u(&self, w: &[Complex64], i: usize) -> f64 {
        scale_log_real(w[i].norm(), -self.half_log_measure[i])
    }

    /// `|u_i|^{p}` for `p > 0`, in log form.
    pub fn abs_u_pow(&self, w: &[Complex64], i: usize, p: f64) -> f64 {
        let a = w[i].norm();
        if a == 0.0 {
            0.0
        } else {
            (p * (a.ln() - self.half_log_measure[i])).exp()
        }
    }

    /// `phi(r_i)^{(n-1)/2} (D_r u)_i`: centred difference of `u`, one-sided at
    /// the first and last node, expressed through `w` and the ratio tables.
    pub fn scaled_gradient(&self, w: &[Complex64], i: usize) -> Complex64 {
        let m = w.len();
        let h = self.h;
        if i == 0 {
            (w[1] * self.ratio_next[0] - w[0]) / h
        } else if i + 1 == m {
            (w[i] - w[i - 1] * self.ratio_prev[i]) / h
        } else {
            (w[i + 1] * self.ratio_next[i] - w[i - 1] * self.ratio_prev[i]) / (2.0 * h)
        }
    }

    /// `|S^{n-1}| Σ |w_i|^2 h`.
    pub fn mass_of(&self, w: &[Complex64]) -> f64 {
        self.sphere_area * self.h * w.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `|S^{n-1}| h <w, H w>`, the discrete `∫ |D_r u|^2 phi^{n-1}`. After the
    /// Liouville transform `∫ |u'|^2 phi^{n-1} = ∫ |w'|^2 + V_eff |w|^2`, and this
    /// compact form is the quadratic form of the Crank-Nicolson Hamiltonian,
    /// so the free flow conserves it exactly.
    pub fn gradient_sq_of(&self, w: &[Complex64]) -> f64 {
        let m = w.len();
        if m == 0 {
            return 0.0;
        }
        let inv_h2 = 1.0 / (self.h * self.h);
        let jumps: f64 = w[0].norm_sqr()
            + w.windows(2).map(|p| (p[1] - p[0]).norm_sqr()).sum::<f64>()
            + w[m - 1].norm_sqr();
        let pot: f64 = w.iter().zip(&self.v_eff).map(|(z, v)| v * z.norm_sqr()).sum();
        self.sphere_area * self.h * (inv_h2 * jumps + pot)
    }

    pub fn h1_norm_of(&self, w: &[Complex64]) -> f64 {
        (self.mass_of(w) + self.gradient_sq_of(w)).sqrt()
    }

    /// `|S^{n-1}| Σ (|D_r u|^2 + |u|^{2σ+2}/(σ+1)) phi^{n-1} h`.
    pub fn energy_of(&self, w: &[Complex64], sigma: f64) -> f64 {
        let pot: f64 = (0..w.len())
            .map(|i| w[i].norm_sqr() * self.abs_u_pow(w, i, 2.0 * sigma))
            .sum();
        self.gradient_sq_of(w) + self.sphere_area * self.h * pot / (sigma + 1.0)
    }

    /// `(|S^{n-1}| Σ |u_i|^q w_n^{q-2} phi^{n-1} h)^{1/q}`, summed in log space.
    pub fn weighted_lq_norm_of(&self, w: &[Complex64], q: f64) -> Result<f64> {
        if !(q >= 2.0 && q.is_finite()) {
            return Err(Error::Domain(format!("weighted L^q norm needs 2 <= q < inf, got {q}")));
        }
        let logs: Vec<f64> = (0..w.len())
            .filter(|&i| w[i].norm() > 0.0)
            .map(|i| {
                let half = self.half_log_measure[i];
                q * (w[i].norm().ln() - half) + (q - 2.0) * self.ln_weight[i] + 2.0 * half
            })
            .collect();
        if logs.is_empty() {
            return Ok(0.0);
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        Ok((((self.sphere_area * self.h).ln() + top + sum.ln()) / q).exp())
    }

    /// Fraction of the mass in the outer tenth `r ∈ [0.9 r_max, r_max]`.
    pub fn leak_fraction_of(&self, w: &[Complex64]) -> f64 {
        let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let cut = 0.9 * self.r_max;
        let outer: f64 = self.r.iter().zip(w).filter(|(r, _)| **r >= cut).map(|(_, z)| z.norm_sqr()).sum();
        outer / total
    }

    /// Linear interpolation of `w` at `r ∈ [0, r_max]`, using the Dirichlet
    /// values at both ends. `None` outside the domain.
    pub fn interpolate(&self, w: &[Complex64], r: f64) -> Option<Complex64> {
        if !(0.0..=self.r_max).contains(&r) {
            return None;
        }
        let zero = Complex64::new(0.0, 0.0);
        let s = r / self.h;
        let j = (s.floor() as usize).min(w.len());
        let frac = s - j as f64;
        // node j sits at r = j h; node 0 and node m+1 are the walls
        let at = |j: usize| if j == 0 || j > w.len() { zero } else { w[j - 1] };
        Some(at(j) * (1.0 - frac) + at(j + 1) * frac)
    }

    /// `max_i |u_i|`.
    pub fn linf_u_of(&self, w: &[Complex64]) -> f64 {
        (0..w.len()).map(|i| self.abs_u(w, i)).fold(0.0, f64::max)
    }
}

/// Samples of the reduced field at one time.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub grid: Arc<RadialGrid>,
    pub t: f64,
    pub w: Vec<Complex64>,
}

/// The three equivalent representations of a radial field at the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Representations {
    /// The solution itself.
    pub u: Vec<Complex64>,
    /// `ũ = u (phi/r)^{(n-1)/2}`, which solves a Euclidean equation with potential `V`.
    pub u_tilde: Vec<Complex64>,
    /// `w = phi^{(n-1)/2} u`.
    pub w: Vec<Complex64>,
}

impl FieldState {
    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let m = grid.m();
        FieldState {
            grid,
            t: 0.0,
            w: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    /// Builds a state from `u` samples.
    pub fn from_u(grid: Arc<RadialGrid>, t: f64, u: &[Complex64]) -> Result<Self> {
        if u.len() != grid.m() {
            return Err(Error::Domain(format!("expected {} samples, got {}", grid.m(), u.len())));
        }
        let w = u
            .iter()
            .zip(grid.half_log_measure())
            .map(|(z, half)| scale_log(*z, *half))
            .collect();
        Ok(FieldState { grid, t, w })
    }

    /// Builds a state from `u = exp(ln_amp(r)) e^{i phase(r)}`, forming `w` in
    /// log space so that neither factor overflows.
    pub fn from_log_amplitude(
        grid: Arc<RadialGrid>,
        ln_amp_and_phase: impl Fn(f64) -> (f64, f64),
    ) -> Self {
        let w = grid
            .nodes()
            .iter()
            .zip(grid.half_log_measure())
            .map(|(&r, &half)| {
                let (ln_amp, phase) = ln_amp_and_phase(r);
                let ln_w = ln_amp + half;
                // values this small only cost subnormal arithmetic later
                if ln_w < FLUSH_LN {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(ln_w.exp(), phase)
                }
            })
            .collect();
        FieldState { grid, t: 0.0, w }
    }

    pub fn u(&self) -> Vec<Complex64> {
        self.w
            .iter()
            .zip(self.grid.half_log_measure())
            .map(|(z, half)| scale_log(*z, -half))
            .collect()
    }

    pub fn representations(&self) -> Representations {
        let c = self.grid.profile().half_codim();
        let u_tilde = self
            .w
            .iter()
            .zip(self.grid.nodes())
            .map(|(z, r)| scale_log(*z, -c * r.ln()))
            .collect();
        Representations {
            u: self.u(),
            u_tilde,
            w: self.w.clone(),
        }
    }

    pub fn mass(&self) -> f64 {
        self.grid.mass_of(&self.w)
    }

    pub fn h1_norm(&self) -> f64 {
        self.grid.h1_norm_of(&self.w)
    }

    pub fn energy(&self, sigma: f64) -> f64 {
        self.grid.energy_of(&self.w, sigma)
    }

    /// Energy without the nonlinear term, conserved by the free flow.
    pub fn kinetic_energy(&self) -> f64 {
        self.grid.gradient_sq_of(&self.w)
    }

    pub fn weighted_lq_norm(&self, q: f64) -> Result<f64> {
        self.grid.weighted_lq_norm_of(&self.w, q)
    }

    pub fn leak_fraction(&self) -> f64 {
        self.grid.leak_fraction_of(&self.w)
    }

    pub fn linf_u(&self) -> f64 {
        self.grid.linf_u_of(&self.w)
    }

    /// `‖self - other‖_{L^2}` on a shared grid.
    pub fn l2_distance(&self, other: &FieldState) -> f64 {
        self.grid.mass_of(&difference(&self.w, &other.w)).sqrt()
    }

    /// `‖self - other‖_{H^1}` on a shared grid.
    pub fn h1_distance(&self, other: &FieldState) -> f64 {
        self.grid.h1_norm_of(&difference(&self.w, &other.w))
    }
}

fn difference(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `z e^{s}`, falling back to log space when `e^{s}` leaves the normal range.
fn scale_log(z: Complex64, s: f64) -> Complex64 {
    let f = s.exp();
    if f.is_normal() {
        let out = z * f;
        if out.re.is_finite() && out.im.is_finite() {
            return out;
        }
    }
    let a = z.norm();
    if a == 0.0 {
        z
    } else {
        z / a * (a.ln() + s).exp()
    }
}

/// `a e^{s}` for `a >= 0`, as [`scale_log`].
fn scale_log_real(a: f64, s: f64) -> f64 {
    let f = s.exp();
    if f.is_normal() && (a * f).is_finite() {
        a * f
    } else if a == 0.0 {
        0.0
    } else {
        (a.ln() + s).exp()
    }
}

/// Initial data families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `u = A e^{-r^2/(2 s^2)}`.
    Gaussian { amplitude: f64, width: f64 },
    /// `u = A exp(1 - 1/(1 - x^2))`, `x` the affine map of `[inner, outer]` onto `[-1, 1]`.
    Bump { amplitude: f64, inner: f64, outer: f64 },
    /// A Gaussian modulated by `1 + ε Σ_{j=1}^{4} c_j cos(j r/s + θ_j)`, with
    /// `c_j ∈ [-1/j, 1/j]` and `θ_j` drawn from a ChaCha8 stream.
    PerturbedGaussian { amplitude: f64, width: f64, perturbation: f64, seed: u64 },
}

impl InitialData {
    pub fn state(&self, grid: Arc<RadialGrid>) -> Result<FieldState> {
        match *self {
            InitialData::Gaussian { amplitude, width } => gaussian_data(grid, amplitude, width),
            InitialData::Bump { amplitude, inner, outer } => bump_data(grid, amplitude, inner, outer),
            InitialData::PerturbedGaussian { amplitude, width, perturbation, seed } => {
                perturbed_gaussian_data(grid, amplitude, width, perturbation, seed)
            }
        }
    }

    /// Radius beyond which the datum is negligible (below `e^{-40}` of its peak).
    pub fn support_radius(&self) -> f64 {
        match *self {
            InitialData::Gaussian { width, .. } | InitialData::PerturbedGaussian { width, .. } => {
                width * 80f64.sqrt()
            }
            InitialData::Bump { outer, .. } => outer,
        }
    }
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if amplitude >= 0.0 && amplitude.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("amplitude must be finite and non-negative, got {amplitude}")))
    }
}

fn check_width(grid: &RadialGrid, width: f64) -> Result<()> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain(format!("width must be positive, got {width}")));
    }
    if width > grid.r_max() / 8.0 {
        return Err(Error::Domain(format!(
            "width {width} exceeds r_max/8 = {}: the data would touch the outer boundary",
            grid.r_max() / 8.0
        )));
    }
    Ok(())
}

pub fn gaussian_data(grid: Arc<RadialGrid>, amplitude: f64, width: f64) -> Result<FieldState> {
    check_amplitude(amplitude)?;
    check_width(&grid, width)?;
    let ln_a = amplitude.ln();
    Ok(FieldState::from_log_amplitude(grid, |r| (ln_a - r * r / (2.0 * width * width), 0.0)))
}

pub fn bump_data(grid: Arc<RadialGrid>, amplitude: f64, inner: f64, outer: f64) -> Result<FieldState> {
    check_amplitude(amplitude)?;
    if !(0.0 <= inner && inner < outer && outer <= grid.r_max()) {
        return Err(Error::Domain(format!(
            "bump support [{inner}, {outer}] must be a non-empty subinterval of [0, r_max]"
        )));
    }
    let ln_a = amplitude.ln();
    let (mid, half_len) = (0.5 * (inner + outer), 0.5 * (outer - inner));
    Ok(FieldState::from_log_amplitude(grid, |r| {
        let x = (r - mid) / half_len;
        if x.abs() < 1.0 {
            (ln_a + 1.0 - 1.0 / (1.0 - x * x), 0.0)
        } else {
            (f64::NEG_INFINITY, 0.0)
        }
    }))
}

pub fn perturbed_gaussian_data(
    grid: Arc<RadialGrid>,
    amplitude: f64,
    width: f64,
    perturbation: f64,
    seed: u64,
) -> Result<FieldState> {
    check_amplitude(amplitude)?;
    check_width(&grid, width)?;
    if !(0.0..1.0).contains(&perturbation) {
        return Err(Error::Domain(format!("perturbation must lie in [0, 1), got {perturbation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64)> = (1..=4)
        .map(|j| {
            let c = rng.gen_range(-1.0..=1.0) / j as f64;
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            (c, theta)
        })
        .collect();
    let ln_a = amplitude.ln();
    Ok(FieldState::from_log_amplitude(grid, |r| {
        let m: f64 = modes
            .iter()
            .enumerate()
            .map(|(j, (c, th))| c * ((j + 1) as f64 * r / width + th).cos())
            .sum();
        // Σ|c_j| < 2.09, so the factor stays positive for ε < 0.47
        let factor = 1.0 + perturbation * m;
        (ln_a - r * r / (2.0 * width * width) + factor.abs().ln(), if factor < 0.0 { std::f64::consts::PI } else { 0.0 })
    }))
}
