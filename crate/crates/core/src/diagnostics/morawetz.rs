//! Space-time Morawetz integrals and the virial inequality.
//!
//! Both accumulators consume a sampled trajectory in time order and
//! integrate in time with the trapezoid rule.

use serde::Serialize;

use crate::discretization::FieldState;

/// `|S^{n-1}| h Σ weight_i |w_i|^2`, the spatial integral of `weight |u|^2`.
fn weighted_mass(state: &FieldState, weight: &[f64]) -> f64 {
    let g = &state.grid;
    let s: f64 = state.w.iter().zip(weight).map(|(z, k)| k * z.norm_sqr()).sum();
    g.sphere_area() * g.h() * s
}

/// Relative change of a sampled series over `[t_from, t_end]`:
/// `(y(t_end) - y(t_from)) / y(t_end)`, `0` when `y(t_end) = 0`.
pub(crate) fn relative_increase(t: &[f64], y: &[f64], t_from: f64) -> f64 {
    let (Some(&last), Some(idx)) = (y.last(), t.iter().position(|&s| s >= t_from - 1e-9)) else {
        return 0.0;
    };
    if last == 0.0 {
        0.0
    } else {
        (last - y[idx]) / last
    }
}

/// `(max - min)/max` of `y` over samples with `t >= t_from`; `0` if the max is `0`.
pub(crate) fn relative_spread(t: &[f64], y: &[f64], t_from: f64) -> f64 {
    let tail: Vec<f64> = t.iter().zip(y).filter(|(s, _)| **s >= t_from - 1e-9).map(|(_, v)| *v).collect();
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    if tail.is_empty() || hi == 0.0 {
        0.0
    } else {
        (hi - lo) / hi.abs()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MorawetzSeries {
    pub t: Vec<f64>,
    /// `M(t)`, the cumulative Morawetz integral.
    pub cumulative: Vec<f64>,
    /// The same integral with the `1/r^3` weight.
    pub cumulative_inverse_cube: Vec<f64>,
    /// `M(t) / sup_{s <= t} ‖u(s)‖_{H^1}^2`.
    pub bound_ratio: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorawetzReport {
    pub series: MorawetzSeries,
    pub final_value: f64,
    pub final_inverse_cube: f64,
    /// `sup_t bound_ratio(t)`, the empirical Morawetz constant.
    pub bound_constant: f64,
    /// Relative growth of the running constant over the last octave.
    pub bound_constant_variation: f64,
    /// Relative growth of `M` over the last quarter of the run.
    pub last_quarter_increase: f64,
    pub saturation_fraction: f64,
    pub saturated: bool,
    /// `false` when the finite-order kernel could not be normalised by
    /// `(n-1)(n-3)` (`n < 4`) and is divided by `n - 1` only.
    pub kernel_normalized: bool,
    /// `n = 3`: the positivity of the weight is degenerate at infinity and
    /// the estimate is outside its range of validity.
    pub degenerate_dimension: bool,
    /// Samples at which an increment came out negative.
    pub negative_increments: usize,
}

/// Streaming accumulator for the Morawetz integral.
#[derive(Clone, Debug)]
pub struct MorawetzAccumulator {
    saturation_fraction: f64,
    series: MorawetzSeries,
    last: Option<(f64, f64, f64)>,
    sup_h1_sq: f64,
    negative_increments: usize,
    kernel_normalized: bool,
    degenerate_dimension: bool,
}

impl MorawetzAccumulator {
    pub fn new(saturation_fraction: f64) -> Self {
        MorawetzAccumulator {
            saturation_fraction,
            series: MorawetzSeries::default(),
            last: None,
            sup_h1_sq: 0.0,
            negative_increments: 0,
            kernel_normalized: true,
            degenerate_dimension: false,
        }
    }

    /// Spatial integrand at one time: kernel weight and `1/r^3` weight.
    pub fn integrands(state: &FieldState) -> (f64, f64) {
        (
            weighted_mass(state, state.grid.morawetz_kernel()),
            weighted_mass(state, state.grid.inverse_cube()),
        )
    }

    pub fn observe(&mut self, state: &FieldState) {
        let (k, c) = Self::integrands(state);
        let h1 = state.h1_norm();
        self.sup_h1_sq = self.sup_h1_sq.max(h1 * h1);
        self.kernel_normalized = state.grid.morawetz_kernel_normalized();
        self.degenerate_dimension = state.grid.profile().n == 3;
        let (m, mc) = match (self.last, self.series.cumulative.last(), self.series.cumulative_inverse_cube.last()) {
            (Some((t0, k0, c0)), Some(&m0), Some(&mc0)) => {
                let dt = state.t - t0;
                let inc = 0.5 * dt * (k0 + k);
                if !(inc >= 0.0) {
                    self.negative_increments += 1;
                }
                (m0 + inc, mc0 + 0.5 * dt * (c0 + c))
            }
            _ => (0.0, 0.0),
        };
        self.last = Some((state.t, k, c));
        self.series.t.push(state.t);
        self.series.cumulative.push(m);
        self.series.cumulative_inverse_cube.push(mc);
        self.series.bound_ratio.push(if self.sup_h1_sq > 0.0 { m / self.sup_h1_sq } else { 0.0 });
    }

    pub fn cumulative(&self) -> f64 {
        self.series.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn finish(self) -> MorawetzReport {
        let s = &self.series;
        let (t0, t_end) = match (s.t.first(), s.t.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (0.0, 0.0),
        };
        let span = t_end - t0;
        let running: Vec<f64> = s
            .bound_ratio
            .iter()
            .scan(0.0f64, |acc, v| {
                *acc = acc.max(*v);
                Some(*acc)
            })
            .collect();
        let last_quarter_increase = relative_increase(&s.t, &s.cumulative, t0 + 0.75 * span);
        let bound_constant = running.last().copied().unwrap_or(0.0);
        MorawetzReport {
            final_value: s.cumulative.last().copied().unwrap_or(0.0),
            final_inverse_cube: s.cumulative_inverse_cube.last().copied().unwrap_or(0.0),
            bound_constant,
            bound_constant_variation: relative_increase(&s.t, &running, t0 + 0.5 * span),
            last_quarter_increase,
            saturation_fraction: self.saturation_fraction,
            saturated: last_quarter_increase < self.saturation_fraction,
            kernel_normalized: self.kernel_normalized,
            degenerate_dimension: self.degenerate_dimension,
            negative_increments: self.negative_increments,
            series: self.series,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VirialSeries {
    pub t: Vec<f64>,
    /// `∫_0^t ∫ (-Δ²a)|u|^2/2 + σ/(σ+1) |u|^{2σ+2} Δa`.
    pub lhs: Vec<f64>,
    /// `sup_{s <= t} ∫ |ū ∂_r u|`.
    pub rhs: Vec<f64>,
    /// Spatial nonlinear contribution at each sample.
    pub nonlinear: Vec<f64>,
    /// `lhs / rhs`, `0` while `rhs = 0`.
    pub constant: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VirialReport {
    pub series: VirialSeries,
    pub final_lhs: f64,
    pub final_rhs: f64,
    /// Empirical constant `C(T) = LHS(T)/RHS(T)` at the end of the run.
    pub constant: f64,
    /// `(max - min)/max` of `C` over the last half of the run.
    pub constant_variation: f64,
    /// Samples where the nonlinear contribution came out negative.
    pub negative_nonlinear: usize,
}

/// Streaming accumulator for both sides of the virial inequality.
#[derive(Clone, Debug)]
pub struct VirialAccumulator {
    sigma: f64,
    series: VirialSeries,
    last: Option<(f64, f64)>,
    sup_rhs: f64,
    negative_nonlinear: usize,
}

impl VirialAccumulator {
    /// `sigma = 0` drops the nonlinear term (free flow).
    pub fn new(sigma: f64) -> Self {
        VirialAccumulator {
            sigma,
            series: VirialSeries::default(),
            last: None,
            sup_rhs: 0.0,
            negative_nonlinear: 0,
        }
    }

    /// `(linear, nonlinear, flux)` spatial integrals at one time.
    pub fn integrands(state: &FieldState, sigma: f64) -> (f64, f64, f64) {
        let g = &state.grid;
        let w = &state.w;
        let scale = g.sphere_area() * g.h();
        let linear = 0.5 * weighted_mass(state, g.neg_bilap_a());
        let nonlinear = if sigma > 0.0 {
            let s: f64 = (0..w.len())
                .map(|i| g.lap_a()[i] * w[i].norm_sqr() * g.abs_u_pow(w, i, 2.0 * sigma))
                .sum();
            sigma / (sigma + 1.0) * scale * s
        } else {
            0.0
        };
        let flux: f64 = (0..w.len()).map(|i| (w[i].conj() * g.scaled_gradient(w, i)).norm()).sum();
        (linear, nonlinear, scale * flux)
    }

    pub fn observe(&mut self, state: &FieldState) {
        let (lin, nl, flux) = Self::integrands(state, self.sigma);
        if !(nl >= 0.0) {
            self.negative_nonlinear += 1;
        }
        let density = lin + nl;
        let lhs = match (self.last, self.series.lhs.last()) {
            (Some((t0, d0)), Some(&l0)) => l0 + 0.5 * (state.t - t0) * (d0 + density),
            _ => 0.0,
        };
        self.last = Some((state.t, density));
        self.sup_rhs = self.sup_rhs.max(flux);
        self.series.t.push(state.t);
        self.series.lhs.push(lhs);
        self.series.rhs.push(self.sup_rhs);
        self.series.nonlinear.push(nl);
        self.series.constant.push(if self.sup_rhs > 0.0 { lhs / self.sup_rhs } else { 0.0 });
    }

    pub fn lhs(&self) -> f64 {
        self.series.lhs.last().copied().unwrap_or(0.0)
    }

    pub fn rhs(&self) -> f64 {
        self.sup_rhs
    }

    pub fn finish(self) -> VirialReport {
        let s = &self.series;
        let (t0, t_end) = match (s.t.first(), s.t.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (0.0, 0.0),
        };
        VirialReport {
            final_lhs: s.lhs.last().copied().unwrap_or(0.0),
            final_rhs: self.sup_rhs,
            constant: s.constant.last().copied().unwrap_or(0.0),
            constant_variation: relative_spread(&s.t, &s.constant, 0.5 * (t0 + t_end)),
            negative_nonlinear: self.negative_nonlinear,
            series: self.series,
        }
    }
}
