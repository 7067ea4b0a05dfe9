//! Pointwise certificate for the positivity of `-Δ²a` on `M_k^n`, `1 <= k < ∞`.
//!
//! Check (b) and the identity check (d) evaluate `phi' phi'' - phi phi'''`
//! through the substitution `phi'' = phi - r^{2k+1}/(2k+1)!`,
//! `phi''' = phi' - r^{2k}/(2k)!`, which removes the `phi phi'` product
//! exactly and is independent of the double-sum series used by
//! [`morawetz_weights`](super::morawetz_weights).

use serde::Serialize;

use super::series::inv_factorial;
use super::{morawetz_weights, phi_eval, wronskian_b, ManifoldProfile, Order};
use crate::error::{Error, Result};

/// Relative tolerance for the double-sum identity (d).
pub const IDENTITY_REL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    /// Positive iff the check passes; its size is the slack.
    pub margin: f64,
}

impl CheckOutcome {
    fn from_margin(margin: f64) -> Self {
        CheckOutcome {
            passed: margin > 0.0,
            margin,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointCertificate {
    pub r: f64,
    /// (a) `phi'((phi')^2 - phi phi'') > 1`.
    pub gradient_bound: CheckOutcome,
    /// (b) `phi (phi' phi'' - phi phi''') > 0`.
    pub convexity: CheckOutcome,
    /// (c) `-Δ²a > 0`.
    pub bilaplacian: CheckOutcome,
    /// (d) `phi' phi'' - phi phi'''` equals the double sum to `IDENTITY_REL_TOL`.
    pub identity: CheckOutcome,
}

impl PointCertificate {
    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    pub fn checks(&self) -> [CheckOutcome; 4] {
        [self.gradient_bound, self.convexity, self.bilaplacian, self.identity]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub profile: ManifoldProfile,
    pub points: Vec<PointCertificate>,
    /// Smallest margin per check (a)–(d); `+inf` for an empty grid.
    pub worst_margins: [f64; 4],
    pub all_passed: bool,
}

/// Runs checks (a)–(d) at every radius of `r_grid`.
pub fn positivity_certificate(profile: &ManifoldProfile, r_grid: &[f64]) -> Result<CertificateReport> {
    let k = match profile.k {
        Order::Finite(k) if k >= 1 => k,
        other => {
            return Err(Error::Unsupported(format!(
                "positivity certificate needs a finite order k >= 1, got k = {other}"
            )))
        }
    };
    if let Some(&bad) = r_grid.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Domain(format!("certificate radii must be positive and finite, got {bad}")));
    }

    let mut points = Vec::with_capacity(r_grid.len());
    let mut worst = [f64::INFINITY; 4];
    for &r in r_grid {
        let d = phi_eval(profile, r)?;
        let a_direct = d.dphi * d.dphi - d.phi * d.d2phi;
        let top = r.powi(2 * k as i32);
        let b_substituted = d.phi * top * inv_factorial(2 * k as usize)
            - d.dphi * top * r * inv_factorial(2 * k as usize + 1);
        let b_series = wronskian_b(k, r);
        let rel = ((b_substituted - b_series) / b_series).abs();
        let cert = PointCertificate {
            r,
            gradient_bound: CheckOutcome::from_margin(d.dphi * a_direct - 1.0),
            convexity: CheckOutcome::from_margin(d.phi * b_substituted),
            bilaplacian: CheckOutcome::from_margin(morawetz_weights(profile, r)?.neg_bilap_a),
            identity: CheckOutcome::from_margin(IDENTITY_REL_TOL - rel),
        };
        for (w, c) in worst.iter_mut().zip(cert.checks()) {
            *w = w.min(c.margin);
        }
        points.push(cert);
    }
    let all_passed = points.iter().all(PointCertificate::passed);
    Ok(CertificateReport {
        profile: *profile,
        points,
        worst_margins: worst,
        all_passed,
    })
}

/// Comparison of `r^3 (-Δ²a)` with its limits at the origin and at infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticCheck {
    pub r_small: f64,
    /// `(n-1)(n-3)`.
    pub small_target: f64,
    pub small_value: f64,
    pub small_rel_err: f64,
    pub r_large: f64,
    /// `(n-1)(2k+1)(2k(n-1)+n-3)`.
    pub large_target: f64,
    pub large_value: f64,
    pub large_rel_err: f64,
    pub tolerance: f64,
    pub small_passed: bool,
    pub large_passed: bool,
}

pub fn asymptotic_check(
    profile: &ManifoldProfile,
    r_small: f64,
    r_large: f64,
    tolerance: f64,
) -> Result<AsymptoticCheck> {
    let k = match profile.k {
        Order::Finite(k) => k as f64,
        Order::Infinite => {
            return Err(Error::Unsupported(
                "the r^-3 asymptotics of -Δ²a hold for finite k only".into(),
            ))
        }
    };
    let n = profile.n as f64;
    let small_target = (n - 1.0) * (n - 3.0);
    let large_target = (n - 1.0) * (2.0 * k + 1.0) * (2.0 * k * (n - 1.0) + n - 3.0);
    let small_value = r_small.powi(3) * morawetz_weights(profile, r_small)?.neg_bilap_a;
    let large_value = r_large.powi(3) * morawetz_weights(profile, r_large)?.neg_bilap_a;
    let rel = |v: f64, t: f64| ((v - t) / t).abs();
    let small_rel_err = rel(small_value, small_target);
    let large_rel_err = rel(large_value, large_target);
    Ok(AsymptoticCheck {
        r_small,
        small_target,
        small_value,
        small_rel_err,
        r_large,
        large_target,
        large_value,
        large_rel_err,
        tolerance,
        small_passed: small_rel_err <= tolerance,
        large_passed: large_rel_err <= tolerance,
    })
}
