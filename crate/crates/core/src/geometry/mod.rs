//! Geometry of the rotationally symmetric manifolds `M_k^n`.
//!
//! The metric is `dr^2 + phi(r)^2 dω^2` on the unit sphere bundle, where
//! `phi` is the sinh Taylor series truncated after the `r^{2k+1}` term.
//! `k = 0` is flat space (`phi = r`) and `k = ∞` is hyperbolic space
//! (`phi = sinh r`). Every quantity here is a pure function of
//! `(profile, r)`.
//!
//! Finite orders are evaluated as polynomials in `x = r^2` with compensated
//! Horner. The combinations that cancel catastrophically near the origin
//! (`(phi')^2 - phi phi''`, `phi' phi'' - phi phi'''`, `(phi'/phi)^2 - 1/r^2`)
//! are evaluated from their own positive-coefficient series instead.

mod certificate;
pub(crate) mod series;

pub use certificate::{
    asymptotic_check, positivity_certificate, AsymptoticCheck, CertificateReport, CheckOutcome,
    PointCertificate, IDENTITY_REL_TOL,
};

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use series::{comp_horner, inv_factorial, ln_factorial};

/// Above this radius hyperbolic quantities switch to exponentially scaled
/// closed forms.
const HYPERBOLIC_SWITCH: f64 = 30.0;

/// Terms of the sinh/cosh series used for hyperbolic profiles at `r <= 1`.
const HYPERBOLIC_SERIES_TERMS: u32 = 30;

/// Below this radius the Strichartz weight uses its Taylor series.
const WEIGHT_SERIES_RADIUS: f64 = 1e-2;

/// Radius below which the two-term Taylor expansion of `V` is offered.
pub const SMALL_R_POTENTIAL_RADIUS: f64 = 1e-2;

/// Largest supported finite order. The coefficient `1/(4k)!` of the
/// Wronskian series underflows beyond it, and `phi_80` already equals
/// `sinh` to double precision for `r` below about 60.
pub const MAX_FINITE_ORDER: u32 = 80;

/// Interpolation index: the truncation order of the sinh series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    Finite(u32),
    /// Hyperbolic space.
    Infinite,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(k) => write!(f, "{k}"),
            Order::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Order::Infinite);
        }
        s.parse::<u32>()
            .map(Order::Finite)
            .map_err(|_| Error::config("k", format!("expected a non-negative integer or \"inf\", got {s:?}")))
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(k) => serializer.serialize_u32(*k),
            Order::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(k) => u32::try_from(k)
                .map(Order::Finite)
                .map_err(|_| serde::de::Error::custom(format!("k must be a non-negative integer or \"inf\", got {k}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The pair `(n, k)` identifying `M_k^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManifoldProfile {
    pub n: u32,
    pub k: Order,
}

impl ManifoldProfile {
    pub fn new(n: u32, k: Order) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension n must be at least 2, got {n}")));
        }
        if let Order::Finite(k) = k {
            if k > MAX_FINITE_ORDER {
                return Err(Error::Unsupported(format!(
                    "finite order k = {k} exceeds {MAX_FINITE_ORDER}; use k = inf"
                )));
            }
        }
        Ok(ManifoldProfile { n, k })
    }

    pub fn euclidean(n: u32) -> Result<Self> {
        Self::new(n, Order::Finite(0))
    }

    pub fn hyperbolic(n: u32) -> Result<Self> {
        Self::new(n, Order::Infinite)
    }

    pub fn finite(n: u32, k: u32) -> Result<Self> {
        Self::new(n, Order::Finite(k))
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.k == Order::Infinite
    }

    /// `(n - 1) / 2`, the exponent of the Liouville factor.
    pub fn half_codim(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }

    /// `(n - 1)(n - 3) / 4`, the centrifugal coefficient.
    pub fn centrifugal(&self) -> f64 {
        let n = self.n as f64;
        (n - 1.0) * (n - 3.0) / 4.0
    }

    /// Area of the unit sphere `S^{n-1}`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.n)
    }
}

impl fmt::Display for ManifoldProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M(n={}, k={})", self.n, self.k)
    }
}

/// `|S^{n-1}| = 2 π^{n/2} / Γ(n/2)`.
pub fn sphere_area(n: u32) -> f64 {
    // Γ(n/2) for integer n: (n/2 - 1)! when n is even, (n-2)!!/2^{(n-1)/2} √π when odd
    let gamma_half_n = if n.is_multiple_of(2) {
        (1..n / 2).map(|i| i as f64).product::<f64>()
    } else {
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while a < n as f64 / 2.0 - 0.25 {
            g *= a;
            a += 1.0;
        }
        g
    };
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_n
}

/// Scattering dimension `N = (2k+1)(n-1) + 1`, infinite for hyperbolic space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScatteringDimension {
    Finite(u64),
    Infinite,
}

impl ScatteringDimension {
    /// The short-range borderline `2/N` (zero for hyperbolic space).
    pub fn borderline(&self) -> f64 {
        match self {
            ScatteringDimension::Finite(n) => 2.0 / *n as f64,
            ScatteringDimension::Infinite => 0.0,
        }
    }

    pub fn finite(&self) -> Option<u64> {
        match self {
            ScatteringDimension::Finite(n) => Some(*n),
            ScatteringDimension::Infinite => None,
        }
    }
}

pub fn scattering_dimension(profile: &ManifoldProfile) -> ScatteringDimension {
    match profile.k {
        Order::Finite(k) => ScatteringDimension::Finite((2 * k as u64 + 1) * (profile.n as u64 - 1) + 1),
        Order::Infinite => ScatteringDimension::Infinite,
    }
}

/// `phi` and its first three derivatives at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiDerivatives {
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
    pub d3phi: f64,
}

// Polynomials in x = r^2 for finite order k:
//   phi   = r P_k(x),      P_k(x) = sum_{j<=k} x^j / (2j+1)!
//   phi'  = Q_k(x),        Q_k(x) = sum_{j<=k} x^j / (2j)!
//   phi'' = r P_{k-1}(x),  phi''' = Q_{k-1}(x)
fn poly_p(k: u32, x: f64) -> f64 {
    comp_horner(k as usize, x, |j| inv_factorial(2 * j + 1))
}

fn poly_q(k: u32, x: f64) -> f64 {
    comp_horner(k as usize, x, |j| inv_factorial(2 * j))
}

/// `(Q_k - P_k)/x = sum_{j=1}^{k} 2j/(2j+1)! x^{j-1}`, zero for `k = 0`.
fn poly_s(k: u32, x: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    comp_horner(k as usize - 1, x, |i| {
        let j = i + 1;
        2.0 * j as f64 * inv_factorial(2 * j + 1)
    })
}

fn lower(k: u32) -> Option<u32> {
    k.checked_sub(1)
}

fn check_radius(r: f64) -> Result<()> {
    if !r.is_finite() {
        return Err(Error::Domain(format!("radius must be finite, got {r}")));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("radius must be non-negative, got {r}")));
    }
    Ok(())
}

fn check_positive_radius(r: f64, what: &str) -> Result<()> {
    check_radius(r)?;
    if r == 0.0 {
        return Err(Error::Domain(format!("{what} is singular at r = 0; use the small-r expansion")));
    }
    Ok(())
}

fn finite_or_range(value: f64, what: &str, profile: &ManifoldProfile, r: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Range(format!("{what} overflows for {profile} at r = {r}")))
    }
}

/// `phi, phi', phi'', phi'''` at `r >= 0`.
pub fn phi_eval(profile: &ManifoldProfile, r: f64) -> Result<PhiDerivatives> {
    check_radius(r)?;
    let d = match profile.k {
        Order::Finite(k) => {
            let x = r * r;
            let (d2phi, d3phi) = match lower(k) {
                Some(km1) => (r * poly_p(km1, x), poly_q(km1, x)),
                None => (0.0, 0.0),
            };
            PhiDerivatives {
                phi: r * poly_p(k, x),
                dphi: poly_q(k, x),
                d2phi,
                d3phi,
            }
        }
        Order::Infinite => {
            let (s, c) = if r <= HYPERBOLIC_SWITCH {
                (r.sinh(), r.cosh())
            } else {
                // e^r/2 (1 ∓ e^{-2r}); shifting by ln 2 first delays overflow
                let half = (r - LN_2).exp();
                let tail = (-2.0 * r).exp();
                (half * (1.0 - tail), half * (1.0 + tail))
            };
            PhiDerivatives {
                phi: s,
                dphi: c,
                d2phi: s,
                d3phi: c,
            }
        }
    };
    for v in [d.phi, d.dphi, d.d2phi, d.d3phi] {
        finite_or_range(v, "phi derivative", profile, r)?;
    }
    Ok(d)
}

/// `ln phi(r)` for `r > 0`, finite wherever `phi` itself would overflow.
pub fn ln_phi(profile: &ManifoldProfile, r: f64) -> Result<f64> {
    check_positive_radius(r, "ln phi")?;
    Ok(r.ln() + ln_phi_over_r(profile, r))
}

/// `ln(phi(r)/r)`, with the removable singularity at the origin.
fn ln_phi_over_r(profile: &ManifoldProfile, r: f64) -> f64 {
    if r <= WEIGHT_SERIES_RADIUS {
        // phi/r - 1 = sum_{j=1}^{k} x^j/(2j+1)!, summed until negligible
        let x = r * r;
        let kmax = match profile.k {
            Order::Finite(k) => k,
            Order::Infinite => u32::MAX,
        };
        let mut excess = 0.0;
        let mut term = 1.0;
        let mut j = 1u32;
        while j <= kmax {
            term *= x / ((2 * j) as f64 * (2 * j + 1) as f64);
            excess += term;
            if term <= 1e-17 * excess {
                break;
            }
            j += 1;
        }
        return excess.ln_1p();
    }
    match profile.k {
        Order::Finite(k) => {
            let p = poly_p(k, r * r);
            if p.is_finite() {
                p.ln()
            } else {
                // log-sum-exp over the terms x^j/(2j+1)!
                let lr = r.ln();
                let logs: Vec<f64> = (0..=k as usize)
                    .map(|j| 2.0 * j as f64 * lr - ln_factorial(2 * j + 1))
                    .collect();
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
            }
        }
        Order::Infinite => {
            if r <= HYPERBOLIC_SWITCH {
                (r.sinh() / r).ln()
            } else {
                r + (-(-2.0 * r).exp_m1()).ln() - LN_2 - r.ln()
            }
        }
    }
}

/// `ln w_n(r) = (n-1)/2 ln(phi(r)/r)`; zero at the origin.
pub fn ln_strichartz_weight(profile: &ManifoldProfile, r: f64) -> Result<f64> {
    check_radius(r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(profile.half_codim() * ln_phi_over_r(profile, r))
}

/// Strichartz weight `w_n(r) = (phi(r)/r)^{(n-1)/2}`, with `w_n(0) = 1`.
pub fn strichartz_weight(profile: &ManifoldProfile, r: f64) -> Result<f64> {
    let w = ln_strichartz_weight(profile, r)?.exp();
    finite_or_range(w, "Strichartz weight", profile, r)
}

/// `(phi')^2 - phi phi'' = 1 + sum_j c_j x^{k+j+1}/(2k+2j+2)` for finite `k >= 1`.
pub(crate) fn wronskian_a(k: u32, r: f64) -> f64 {
    let x = r * r;
    let tail = comp_horner(k as usize, x, |j| identity_coefficient(k, j) / (2 * k as usize + 2 * j + 2) as f64);
    1.0 + x.powi(k as i32 + 1) * tail
}

/// `phi' phi'' - phi phi''' = sum_{j=0}^{k} c_j r^{2k+2j+1}` for finite `k >= 1`.
pub(crate) fn wronskian_b(k: u32, r: f64) -> f64 {
    let x = r * r;
    let s = comp_horner(k as usize, x, |j| identity_coefficient(k, j));
    r * x.powi(k as i32) * s
}

/// `c_j = (1/((2j)!(2k)!)) (1/(2j+1) - 1/(2k+1))`.
pub(crate) fn identity_coefficient(k: u32, j: usize) -> f64 {
    let k = k as usize;
    inv_factorial(2 * j) * inv_factorial(2 * k) * (1.0 / (2 * j + 1) as f64 - 1.0 / (2 * k + 1) as f64)
}

/// `1/sinh^2 r` without overflow of `sinh` at large `r`.
fn csch_sq(r: f64) -> f64 {
    if r <= HYPERBOLIC_SWITCH {
        let s = r.sinh();
        1.0 / (s * s)
    } else {
        let e = (-2.0 * r).exp();
        4.0 * e / ((1.0 - e) * (1.0 - e))
    }
}

/// Laplacian and negative bi-Laplacian of the distance function `a(x) = r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MorawetzWeights {
    /// `Δa = (n-1) phi'/phi`.
    pub lap_a: f64,
    /// `-Δ²a`.
    pub neg_bilap_a: f64,
}

/// `Δa` and `-Δ²a` at `r > 0`.
pub fn morawetz_weights(profile: &ManifoldProfile, r: f64) -> Result<MorawetzWeights> {
    check_positive_radius(r, "Morawetz weight")?;
    let n = profile.n as f64;
    let w = match profile.k {
        Order::Finite(0) => MorawetzWeights {
            lap_a: (n - 1.0) / r,
            neg_bilap_a: (n - 1.0) * (n - 3.0) / (r * r * r),
        },
        Order::Finite(k) => {
            let d = phi_eval(profile, r)?;
            let a = wronskian_a(k, r);
            let b = wronskian_b(k, r);
            // -(n-1)(phi^2 phi''' + (n-4) phi phi' phi'' - (n-3) phi'^3)/phi^3, regrouped
            let ratio = d.dphi / d.phi;
            let neg_bilap_a = (n - 1.0) * ((n - 3.0) * ratio * a + b) / (d.phi * d.phi);
            MorawetzWeights {
                lap_a: (n - 1.0) * ratio,
                neg_bilap_a,
            }
        }
        Order::Infinite => {
            let coth = 1.0 / r.tanh();
            MorawetzWeights {
                lap_a: (n - 1.0) * coth,
                neg_bilap_a: (n - 1.0) * (n - 3.0) * coth * csch_sq(r),
            }
        }
    };
    finite_or_range(w.lap_a, "Δa", profile, r)?;
    finite_or_range(w.neg_bilap_a, "-Δ²a", profile, r)?;
    Ok(w)
}

/// The Morawetz integrand weight. On `H^n` this is `cosh r/sinh^3 r` for
/// every `n`; for finite `k` it is `-Δ²a/((n-1)(n-3))`, which behaves like
/// `1/r^3` at the origin. For finite `k` and `n < 4` the normalisation
/// degenerates and `-Δ²a/(n-1)` is returned instead (see
/// [`morawetz_kernel_normalized`]).
pub fn morawetz_kernel(profile: &ManifoldProfile, r: f64) -> Result<f64> {
    check_positive_radius(r, "Morawetz kernel")?;
    match profile.k {
        Order::Infinite => Ok(csch_sq(r) / r.tanh()),
        Order::Finite(_) => {
            let n = profile.n as f64;
            let raw = morawetz_weights(profile, r)?.neg_bilap_a;
            Ok(if morawetz_kernel_normalized(profile) { raw / ((n - 1.0) * (n - 3.0)) } else { raw / (n - 1.0) })
        }
    }
}

/// Whether [`morawetz_kernel`] carries the `1/((n-1)(n-3))` normalisation.
pub fn morawetz_kernel_normalized(profile: &ManifoldProfile) -> bool {
    profile.is_hyperbolic() || profile.n >= 4
}

/// Both forms of the radial potential at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectivePotential {
    /// Potential seen by `ũ = u (phi/r)^{(n-1)/2}` against the flat radial Laplacian.
    pub v: f64,
    /// Potential seen by `w = phi^{(n-1)/2} u` on the half-line:
    /// `(n-1)/2 phi''/phi + (n-1)(n-3)/4 (phi'/phi)^2`.
    pub v_eff: f64,
    /// `r^2 V`, bounded as `r → ∞` for finite `k`.
    pub r2_v: f64,
}

/// Series data `(P, Q, R, S)` at `x = r^2`; see `poly_p` etc.
struct SeriesValues {
    p: f64,
    q: f64,
    r: f64,
    s: f64,
}

fn series_values(k: u32, x: f64) -> SeriesValues {
    SeriesValues {
        p: poly_p(k, x),
        q: poly_q(k, x),
        r: lower(k).map_or(0.0, |km1| poly_p(km1, x)),
        s: poly_s(k, x),
    }
}

/// `V` and `V_eff` at `r > 0`.
pub fn effective_potential(profile: &ManifoldProfile, r: f64) -> Result<EffectivePotential> {
    check_positive_radius(r, "effective potential")?;
    let half = profile.half_codim();
    let cf = profile.centrifugal();
    let series_k = match profile.k {
        Order::Finite(k) => Some(k),
        Order::Infinite if r <= 1.0 => Some(HYPERBOLIC_SERIES_TERMS),
        Order::Infinite => None,
    };
    let (v, v_eff) = match series_k {
        Some(k) => {
            let sv = series_values(k, r * r);
            let curvature = half * sv.r / sv.p;
            let ratio = sv.q / (r * sv.p);
            let v = curvature + cf * sv.s * (sv.q + sv.p) / (sv.p * sv.p);
            (v, curvature + cf * ratio * ratio)
        }
        None => {
            let coth = 1.0 / r.tanh();
            let coth_sq = coth * coth;
            (half + cf * (coth_sq - 1.0 / (r * r)), half + cf * coth_sq)
        }
    };
    let v = finite_or_range(v, "V", profile, r)?;
    let v_eff = finite_or_range(v_eff, "V_eff", profile, r)?;
    Ok(EffectivePotential { v, v_eff, r2_v: r * r * v })
}

/// Two-term Taylor data `(V(0), V2)` with `V(r) = V(0) + V2 r^2 + O(r^4)`.
pub fn potential_taylor(profile: &ManifoldProfile) -> (f64, f64) {
    let k = match profile.k {
        Order::Finite(k) => k,
        Order::Infinite => HYPERBOLIC_SERIES_TERMS,
    };
    // leading two coefficients (in x) of a polynomial of degree `deg`
    let lead = |deg: Option<u32>, coef: &dyn Fn(usize) -> f64| -> (f64, f64) {
        match deg {
            None => (0.0, 0.0),
            Some(0) => (coef(0), 0.0),
            Some(_) => (coef(0), coef(1)),
        }
    };
    let p = lead(Some(k), &|j| inv_factorial(2 * j + 1));
    let q = lead(Some(k), &|j| inv_factorial(2 * j));
    let rr = lead(lower(k), &|j| inv_factorial(2 * j + 1));
    let s = lead(lower(k), &|i| 2.0 * (i + 1) as f64 * inv_factorial(2 * i + 3));
    // truncated power-series algebra to first order in x
    let div = |a: (f64, f64), b: (f64, f64)| (a.0 / b.0, (a.1 * b.0 - a.0 * b.1) / (b.0 * b.0));
    let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0, a.0 * b.1 + a.1 * b.0);
    let curvature = div(rr, p);
    let centrifugal = div(mul(s, (q.0 + p.0, q.1 + p.1)), mul(p, p));
    let half = profile.half_codim();
    let cf = profile.centrifugal();
    (
        half * curvature.0 + cf * centrifugal.0,
        half * curvature.1 + cf * centrifugal.1,
    )
}

/// Small-radius expansion of `V`, valid for `r < SMALL_R_POTENTIAL_RADIUS`.
pub fn small_r_potential(profile: &ManifoldProfile, r: f64) -> Result<f64> {
    check_radius(r)?;
    if r >= SMALL_R_POTENTIAL_RADIUS {
        return Err(Error::Domain(format!(
            "small-r expansion of V is only offered for r < {SMALL_R_POTENTIAL_RADIUS}, got {r}"
        )));
    }
    let (v0, v2) = potential_taylor(profile);
    Ok(v0 + v2 * r * r)
}

/// Every geometric quantity at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometryAtPoint {
    pub r: f64,
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
    pub d3phi: f64,
    pub w: f64,
    pub lap_a: f64,
    pub neg_bilap_a: f64,
    pub v: f64,
    pub v_eff: f64,
}

pub fn geometry_at(profile: &ManifoldProfile, r: f64) -> Result<GeometryAtPoint> {
    let d = phi_eval(profile, r)?;
    let mw = morawetz_weights(profile, r)?;
    let pot = effective_potential(profile, r)?;
    Ok(GeometryAtPoint {
        r,
        phi: d.phi,
        dphi: d.dphi,
        d2phi: d.d2phi,
        d3phi: d.d3phi,
        w: strichartz_weight(profile, r)?,
        lap_a: mw.lap_a,
        neg_bilap_a: mw.neg_bilap_a,
        v: pot.v,
        v_eff: pot.v_eff,
    })
}
