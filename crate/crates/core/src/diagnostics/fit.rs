//! Ordinary least squares for straight lines and power laws.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// A least-squares line `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `NaN` with fewer than three points.
    pub slope_stderr: f64,
    /// Two-sided 95% Student-t interval for the slope.
    pub slope_ci95: (f64, f64),
    /// Root-mean-square residual.
    pub residual_rms: f64,
    pub points: usize,
    /// Range of the abscissa actually fitted, in the caller's units.
    pub window: (f64, f64),
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!("fit needs paired samples, got {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain(format!("fit needs at least 2 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("fit samples must be finite".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("fit abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let (slope_stderr, slope_ci95) = if n > 2 {
        let se = (ssr / (nf - 2.0) / sxx).sqrt();
        let q = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map_err(|e| Error::Domain(e.to_string()))?
            .inverse_cdf(0.975);
        (se, (slope - q * se, slope + q * se))
    } else {
        (f64::NAN, (f64::NAN, f64::NAN))
    };
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        slope_ci95,
        residual_rms: (ssr / nf).sqrt(),
        points: n,
        window: (lo, hi),
    })
}

/// Fits `y ≈ C t^{slope}` in log-log coordinates. Samples must be positive;
/// the reported window is in `t`, not `ln t`.
pub fn power_law_fit(t: &[f64], y: &[f64]) -> Result<LinearFit> {
    if t.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("power-law fit needs positive samples".into()));
    }
    let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut fit = linear_fit(&lt, &ly)?;
    fit.window = (fit.window.0.exp(), fit.window.1.exp());
    Ok(fit)
}
