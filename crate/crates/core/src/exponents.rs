//! Exponent algebra behind the weighted Strichartz bootstrap: admissible
//! pairs, the Hölder/integrability systems on `H^n` and `M_k^n`, and the
//! bootstrap lemma.
//!
//! Every system is linear in `α` once `σ` (and `a`) are fixed, so the feasible
//! set is an interval `(0, α_sup)`. The solvers locate `α_sup` by bisection and
//! then return the `α` that maximises the smallest constraint slack, which is
//! deterministic and keeps every strict inequality well away from equality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{scattering_dimension, ManifoldProfile, Order, ScatteringDimension};

/// Tolerance of the admissibility identity `2/p + n/q = n/2`.
pub const ADMISSIBLE_TOL: f64 = 1e-12;
/// Strict inequalities must hold with at least this slack.
pub const MARGIN_TOL: f64 = 1e-9;
/// Resolution of the bisection for the supremum of feasible `α`.
pub const ALPHA_RESOLUTION: f64 = 1e-6;
/// Grid step of the search over the Sobolev exponent `a`.
pub const A_GRID_STEP: f64 = 1e-3;

/// `2* = 2n/(n-2)`.
pub fn sobolev_exponent(n: u32) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// `(p, q)` is `n`-admissible: `2/p + n/q = n/2`, `p >= 2`, `(p, q, n) != (2, ∞, 2)`.
/// Infinite exponents are passed as `f64::INFINITY`.
pub fn is_admissible(n: u32, p: f64, q: f64) -> bool {
    if n < 2 || p.is_nan() || q.is_nan() || p < 2.0 || q < 2.0 {
        return false;
    }
    if n == 2 && p == 2.0 && q == f64::INFINITY {
        return false;
    }
    let n = n as f64;
    (2.0 / p + n / q - n / 2.0).abs() <= ADMISSIBLE_TOL
}

/// A solved tuple of one of the exponent systems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSolution {
    pub n: u32,
    pub k: Order,
    pub sigma: f64,
    /// `None` on `H^n`.
    pub scattering_dimension: Option<u64>,
    pub alpha: f64,
    /// Sobolev exponent, present for the `M_k^n` system only.
    pub a: Option<f64>,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub inv_p: f64,
    pub inv_q: f64,
    pub inv_theta: f64,
    /// Smallest slack over the strict inequalities.
    pub margin: f64,
    /// Name of the constraint attaining `margin`.
    pub binding: &'static str,
    /// Largest feasible `α` found by bisection, for reference.
    pub alpha_sup: f64,
}

/// Why a system has no solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Infeasibility {
    /// Some strict inequality already fails in the limit `α → 0`
    /// (for every `a` on the `M` grid).
    Infeasible { violated: &'static str, slack: f64 },
    /// Feasible in exact arithmetic, but the best margin is below [`MARGIN_TOL`].
    InfeasibleAtTolerance { margin: f64, binding: &'static str },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExponentOutcome {
    Feasible(ExponentSolution),
    Infeasible(Infeasibility),
}

impl ExponentOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ExponentOutcome::Feasible(_))
    }

    pub fn solution(&self) -> Option<&ExponentSolution> {
        match self {
            ExponentOutcome::Feasible(s) => Some(s),
            ExponentOutcome::Infeasible(_) => None,
        }
    }
}

/// The linear system at fixed `(n, σ[, a])`, as named slacks in `α`.
#[derive(Clone, Copy, Debug)]
enum System {
    Hyperbolic { n: f64, sigma: f64 },
    Manifold { n: f64, big_n: f64, sigma: f64, a: f64 },
}

const SLACK_NAMES: [&str; 6] = [
    "alpha > 0",
    "2 sigma - alpha > 0",
    "theta < inf",
    "theta > 1",
    "integrability at infinity",
    "p <= inf (alpha <= 1)",
];

impl System {
    fn sigma(&self) -> f64 {
        match *self {
            System::Hyperbolic { sigma, .. } | System::Manifold { sigma, .. } => sigma,
        }
    }

    fn inv_theta(&self, alpha: f64) -> f64 {
        match *self {
            System::Hyperbolic { n, sigma } => 2.0 / n - (n - 2.0) / n * sigma - 2.0 * alpha / n,
            System::Manifold { n, sigma, a, .. } => {
                2.0 / n - 2.0 * sigma / a - alpha * (1.0 / n + 0.5 - 1.0 / a)
            }
        }
    }

    /// Slacks in the order of [`SLACK_NAMES`]; feasible iff all are positive
    /// (the last one may vanish).
    fn slacks(&self, alpha: f64) -> [f64; 6] {
        let sigma = self.sigma();
        let inv_theta = self.inv_theta(alpha);
        let integrability = match *self {
            System::Hyperbolic { n, sigma } => (n - 2.0) / n * sigma + alpha / n - alpha / (n - 1.0),
            System::Manifold { n, big_n, .. } => {
                2.0 / n - 2.0 / big_n - alpha * (0.5 / big_n + 1.0 / n) - inv_theta
            }
        };
        [alpha, 2.0 * sigma - alpha, inv_theta, 1.0 - inv_theta, integrability, 1.0 - alpha]
    }

    fn feasible(&self, alpha: f64) -> bool {
        let s = self.slacks(alpha);
        s[..5].iter().all(|&v| v > 0.0) && s[5] >= 0.0
    }

    fn margin(&self, alpha: f64) -> (f64, &'static str) {
        self.slacks(alpha)
            .into_iter()
            .zip(SLACK_NAMES)
            .fold((f64::INFINITY, ""), |best, (v, name)| if v < best.0 { (v, name) } else { best })
    }

    /// Best `α` and its margin, or the constraint violated as `α → 0`.
    fn solve(&self) -> std::result::Result<(f64, f64, f64, &'static str), (&'static str, f64)> {
        // the α -> 0 limit: every slack but the first must be positive
        let at_zero = self.slacks(0.0);
        if let Some(i) = (1..5).find(|&i| at_zero[i] <= 0.0) {
            return Err((SLACK_NAMES[i], at_zero[i]));
        }
        let mut lo = 0.0;
        let mut hi = (2.0 * self.sigma()).min(1.0);
        let alpha_sup = if self.feasible(hi) {
            hi
        } else {
            while hi - lo > ALPHA_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if self.feasible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        // every slack is affine in α, so the smallest one is maximised at an
        // endpoint or where two slacks cross; ties take the middle of the plateau
        let s0 = self.slacks(0.0);
        let slope: Vec<f64> = self.slacks(1.0).iter().zip(&s0).map(|(a, b)| a - b).collect();
        let mut candidates = vec![0.0, alpha_sup];
        for i in 0..6 {
            for j in i + 1..6 {
                let ds = slope[i] - slope[j];
                if ds != 0.0 {
                    let x = (s0[j] - s0[i]) / ds;
                    if x > 0.0 && x < alpha_sup {
                        candidates.push(x);
                    }
                }
            }
        }
        let best = candidates.iter().map(|&x| self.margin(x).0).fold(f64::NEG_INFINITY, f64::max);
        let tied = candidates.iter().filter(|&&x| self.margin(x).0 >= best - 1e-15 * best.abs().max(1.0));
        let (lo_tie, hi_tie) = tied.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let alpha = 0.5 * (lo_tie + hi_tie);
        let (margin, binding) = self.margin(alpha);
        Ok((alpha, alpha_sup, margin, binding))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("sigma must be positive and finite, got {sigma}")))
    }
}

fn check_dimension(n: u32) -> Result<()> {
    if n < 4 {
        Err(Error::Unsupported(format!("the exponent systems need n >= 4, got n = {n}")))
    } else {
        Ok(())
    }
}

fn build_solution(
    n: u32,
    k: Order,
    sigma: f64,
    a: Option<f64>,
    system: &System,
    (alpha, alpha_sup, margin, binding): (f64, f64, f64, &'static str),
) -> ExponentOutcome {
    if margin < MARGIN_TOL {
        return ExponentOutcome::Infeasible(Infeasibility::InfeasibleAtTolerance { margin, binding });
    }
    let nf = n as f64;
    let inv_p = 0.5 - 0.5 * alpha;
    let inv_q = 1.0 / sobolev_exponent(n) + alpha / nf;
    let inv_theta = system.inv_theta(alpha);
    let big_n = match k {
        Order::Infinite => None,
        Order::Finite(_) => ManifoldProfile::new(n, k).ok().and_then(|p| scattering_dimension(&p).finite()),
    };
    ExponentOutcome::Feasible(ExponentSolution {
        n,
        k,
        sigma,
        scattering_dimension: big_n,
        alpha,
        a,
        p: 1.0 / inv_p,
        q: 1.0 / inv_q,
        theta: 1.0 / inv_theta,
        inv_p,
        inv_q,
        inv_theta,
        margin,
        binding,
        alpha_sup,
    })
}

/// Solves the `H^n` system for `α`, `(p, q)` and `θ`.
pub fn solve_exponents_hyperbolic(n: u32, sigma: f64) -> Result<ExponentOutcome> {
    check_dimension(n)?;
    check_sigma(sigma)?;
    let system = System::Hyperbolic { n: n as f64, sigma };
    Ok(match system.solve() {
        Ok(sol) => build_solution(n, Order::Infinite, sigma, None, &system, sol),
        Err((violated, slack)) => ExponentOutcome::Infeasible(Infeasibility::Infeasible { violated, slack }),
    })
}

/// Solves the `M_k^n` system over `a ∈ [2, 2*]` and `α`, keeping the pair
/// with the largest margin.
pub fn solve_exponents_m(n: u32, k: u32, sigma: f64) -> Result<ExponentOutcome> {
    check_dimension(n)?;
    check_sigma(sigma)?;
    if k == 0 {
        return Err(Error::Unsupported(
            "the M_k^n exponent system needs k >= 1 (k = 0 is Euclidean space)".into(),
        ));
    }
    let profile = ManifoldProfile::finite(n, k)?;
    let big_n = match scattering_dimension(&profile) {
        ScatteringDimension::Finite(v) => v as f64,
        ScatteringDimension::Infinite => unreachable!("finite order"),
    };
    let nf = n as f64;
    let a_max = sobolev_exponent(n);
    let steps = ((a_max - 2.0) / A_GRID_STEP).floor() as usize;
    let grid = (0..=steps).map(|i| 2.0 + i as f64 * A_GRID_STEP).chain(
        // the upper endpoint is on the grid only for n = 4 and n = 6
        Some(a_max).filter(|&top| top - (2.0 + steps as f64 * A_GRID_STEP) > 1e-12),
    );

    let mut best: Option<(f64, System, (f64, f64, f64, &'static str))> = None;
    let mut closest_failure: Option<(&'static str, f64)> = None;
    for a in grid {
        // at α = 0 the window is a/N < σ < a/n
        if !(a / big_n < sigma && sigma < a / nf) {
            let (name, slack) = if sigma <= a / big_n {
                (SLACK_NAMES[4], 2.0 * sigma / a - 2.0 / big_n)
            } else {
                (SLACK_NAMES[2], 2.0 / nf - 2.0 * sigma / a)
            };
            if closest_failure.is_none_or(|(_, s)| slack > s) {
                closest_failure = Some((name, slack));
            }
            continue;
        }
        let system = System::Manifold { n: nf, big_n, sigma, a };
        match system.solve() {
            Ok(sol) => {
                if best.is_none_or(|(_, _, b)| sol.2 > b.2) {
                    best = Some((a, system, sol));
                }
            }
            Err((name, slack)) => {
                if closest_failure.is_none_or(|(_, s)| slack > s) {
                    closest_failure = Some((name, slack));
                }
            }
        }
    }
    Ok(match best {
        Some((a, system, sol)) => build_solution(n, Order::Finite(k), sigma, Some(a), &system, sol),
        None => {
            let (violated, slack) = closest_failure.expect("the a-grid is never empty");
            ExponentOutcome::Infeasible(Infeasibility::Infeasible { violated, slack })
        }
    })
}

/// Dispatches on the order: `k = ∞` uses the `H^n` system, `k >= 1` the
/// `M_k^n` one, and `k = 0` the Euclidean range `2/n < σ < 2/(n-2)`.
pub fn feasibility(profile: &ManifoldProfile, sigma: f64) -> Result<bool> {
    Ok(match profile.k {
        Order::Infinite => solve_exponents_hyperbolic(profile.n, sigma)?.is_feasible(),
        Order::Finite(0) => {
            check_sigma(sigma)?;
            let n = profile.n as f64;
            2.0 / n < sigma && sigma < 2.0 / (n - 2.0)
        }
        Order::Finite(k) => solve_exponents_m(profile.n, k, sigma)?.is_feasible(),
    })
}

/// Identities and inequalities a returned solution must satisfy, re-evaluated
/// from its fields alone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionAudit {
    pub admissible: bool,
    /// `|1/q' - (α/2 + (2σ-α)/s + 1/2* + 1/θ)|`, `s = 2*` or `a`.
    pub holder_residual: f64,
    /// `|1/p' - (α/2 + 1/2)|`.
    pub time_holder_residual: f64,
    pub strict_inequalities: bool,
}

impl SolutionAudit {
    pub fn passed(&self) -> bool {
        self.admissible && self.holder_residual <= 1e-12 && self.time_holder_residual <= 1e-12 && self.strict_inequalities
    }
}

impl ExponentSolution {
    pub fn audit(&self) -> SolutionAudit {
        let n = self.n as f64;
        let two_star = sobolev_exponent(self.n);
        let s = self.a.unwrap_or(two_star);
        let holder = self.alpha / 2.0 + (2.0 * self.sigma - self.alpha) / s + 1.0 / two_star + self.inv_theta;
        let holder_residual = ((1.0 - self.inv_q) - holder).abs();
        let time_holder_residual = ((1.0 - self.inv_p) - (self.alpha / 2.0 + 0.5)).abs();
        let integrability = match self.scattering_dimension {
            None => self.alpha / (n - 1.0) - self.alpha / 2.0 - (2.0 * self.sigma - self.alpha) / two_star < 0.0,
            Some(big_n) => {
                let big_n = big_n as f64;
                self.inv_theta < 2.0 / n - 2.0 / big_n - self.alpha * (0.5 / big_n + 1.0 / n)
            }
        };
        let a_in_range = self.a.is_none_or(|a| (2.0..=two_star).contains(&a));
        SolutionAudit {
            admissible: is_admissible(self.n, self.p, self.q),
            holder_residual,
            time_holder_residual,
            strict_inequalities: self.alpha > 0.0
                && self.alpha < 2.0 * self.sigma
                && self.theta > 1.0
                && self.theta.is_finite()
                && integrability
                && a_in_range,
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 1.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("bootstrap needs 1 < theta < inf, got {theta}")))
    }
}

/// `(θ ε₂)^{-1/(θ-1)}`, the largest admissible initial value.
pub fn bootstrap_initial_bound(theta: f64, eps2: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(eps2 > 0.0) {
        return Err(Error::Domain(format!("bootstrap needs eps2 > 0, got {eps2}")));
    }
    Ok((theta * eps2).powf(-1.0 / (theta - 1.0)))
}

/// `(1 - 1/θ)(θ ε₂)^{-1/(θ-1)}`: the bootstrap closes for `ε₁` below this.
pub fn bootstrap_threshold(theta: f64, eps2: f64) -> Result<f64> {
    Ok((1.0 - 1.0 / theta) * bootstrap_initial_bound(theta, eps2)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapCheck {
    pub threshold: f64,
    pub eps1_below_threshold: bool,
    /// `M(0) <= (θ ε₂)^{-1/(θ-1)}`.
    pub initial_ok: bool,
    /// `M(t) <= ε₁ + ε₂ M(t)^θ` at every sample.
    pub hypothesis_holds: bool,
    /// `θ/(θ-1) ε₁`.
    pub conclusion_bound: f64,
    /// `M(t) <= θ/(θ-1) ε₁` at every sample.
    pub conclusion_holds: bool,
}

impl BootstrapCheck {
    /// The lemma's implication: hypotheses imply the conclusion.
    pub fn consistent(&self) -> bool {
        !(self.eps1_below_threshold && self.initial_ok && self.hypothesis_holds) || self.conclusion_holds
    }
}

/// Checks the bootstrap hypotheses and conclusion on a sampled,
/// continuous, non-negative trajectory `M`.
pub fn bootstrap_check(series: &[f64], eps1: f64, eps2: f64, theta: f64) -> Result<BootstrapCheck> {
    let threshold = bootstrap_threshold(theta, eps2)?;
    let initial = bootstrap_initial_bound(theta, eps2)?;
    if let Some(bad) = series.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("bootstrap series must be non-negative and finite, found {bad}")));
    }
    let conclusion_bound = theta / (theta - 1.0) * eps1;
    Ok(BootstrapCheck {
        threshold,
        eps1_below_threshold: eps1 < threshold,
        initial_ok: series.first().is_none_or(|&m0| m0 <= initial),
        hypothesis_holds: series.iter().all(|&m| m <= eps1 + eps2 * m.powf(theta)),
        conclusion_bound,
        conclusion_holds: series.iter().all(|&m| m <= conclusion_bound),
    })
}
