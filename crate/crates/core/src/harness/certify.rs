//! The geometry certificate over an `(n, k, r)` grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::geometry::{asymptotic_check, positivity_certificate, AsymptoticCheck, ManifoldProfile};

/// Grid of the certificate: `points` log-spaced radii in `[r_min, r_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryGrid {
    pub n: Vec<u32>,
    pub k: Vec<u32>,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    /// Relative tolerance of the asymptotic constants at `r_min` and `r_max`.
    pub asymptotic_tol: f64,
}

impl Default for GeometryGrid {
    fn default() -> Self {
        GeometryGrid { n: (4..=8).collect(), k: (1..=6).collect(), r_min: 1e-3, r_max: 50.0, points: 200, asymptotic_tol: 0.01 }
    }
}

impl GeometryGrid {
    pub fn from_file(path: &Path) -> Result<Self> {
        toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::config("grid", e.message().to_string()))
    }

    pub fn radii(&self) -> Result<Vec<f64>> {
        if !(self.r_min > 0.0 && self.r_max >= self.r_min && self.r_max.is_finite()) {
            return Err(Error::config("grid", "needs 0 < r_min <= r_max < inf"));
        }
        Ok(match self.points {
            0 => Vec::new(),
            1 => vec![self.r_min],
            p => {
                let (a, b) = (self.r_min.ln(), self.r_max.ln());
                (0..p).map(|i| (a + (b - a) * i as f64 / (p - 1) as f64).exp()).collect()
            }
        })
    }
}

/// Certificate of one `(n, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileCertificate {
    pub n: u32,
    pub k: u32,
    /// Pass flag of checks (a)-(d) at each radius.
    pub point_passed: Vec<bool>,
    pub worst_margins: [f64; 4],
    pub positivity_passed: bool,
    /// `None` for `n = 3`, where the small-r constant `(n-1)(n-3)` vanishes.
    pub asymptotic: Option<AsymptoticCheck>,
    /// `n = 3`: the bi-Laplacian margin degenerates at large `r`; reported
    /// for information and excluded from the verdict.
    pub informational: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryFailure {
    pub n: u32,
    pub k: u32,
    /// Radius of a failing pointwise check, or the radius of a failing
    /// asymptotic comparison.
    pub r: f64,
    pub what: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryReport {
    pub schema_version: &'static str,
    pub grid: GeometryGrid,
    pub radii: Vec<f64>,
    pub profiles: Vec<ProfileCertificate>,
    pub failures: Vec<GeometryFailure>,
    pub warnings: Vec<String>,
    pub all_passed: bool,
}

const CHECK_NAMES: [&str; 4] = ["gradient_bound", "convexity", "bilaplacian", "identity"];

pub fn verify_geometry(grid: &GeometryGrid) -> Result<GeometryReport> {
    let radii = grid.radii()?;
    let mut profiles = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    if radii.is_empty() || grid.n.is_empty() || grid.k.is_empty() {
        warnings.push("empty certificate grid: nothing to check".into());
    }
    for &n in &grid.n {
        for &k in &grid.k {
            let profile = ManifoldProfile::finite(n, k).map_err(|e| Error::config("grid", e.to_string()))?;
            let informational = n == 3;
            let cert = positivity_certificate(&profile, &radii).map_err(|e| Error::config("grid", e.to_string()))?;
            let asymptotic = if informational || radii.is_empty() {
                None
            } else {
                Some(asymptotic_check(&profile, grid.r_min, grid.r_max, grid.asymptotic_tol)?)
            };
            let mut point_passed = Vec::with_capacity(cert.points.len());
            for p in &cert.points {
                point_passed.push(p.passed());
                for (name, c) in CHECK_NAMES.iter().zip(p.checks()) {
                    if !c.passed {
                        if informational && *name == "bilaplacian" {
                            continue;
                        }
                        failures.push(GeometryFailure { n, k, r: p.r, what: format!("{name} margin {:e}", c.margin) });
                    }
                }
            }
            if let Some(a) = &asymptotic {
                if !a.small_passed {
                    failures.push(GeometryFailure {
                        n,
                        k,
                        r: a.r_small,
                        what: format!("small-r constant {} vs {} (rel {:.3e})", a.small_value, a.small_target, a.small_rel_err),
                    });
                }
                if !a.large_passed {
                    failures.push(GeometryFailure {
                        n,
                        k,
                        r: a.r_large,
                        what: format!("large-r constant {} vs {} (rel {:.3e})", a.large_value, a.large_target, a.large_rel_err),
                    });
                }
            }
            if informational {
                warnings.push(format!(
                    "n = 3, k = {k}: worst bi-Laplacian margin {:e} (informational)",
                    cert.worst_margins[2]
                ));
            }
            let passed = !failures.iter().any(|f| f.n == n && f.k == k);
            profiles.push(ProfileCertificate {
                n,
                k,
                point_passed,
                worst_margins: cert.worst_margins,
                positivity_passed: cert.all_passed,
                asymptotic,
                informational,
                passed,
            });
        }
    }
    Ok(GeometryReport {
        schema_version: SCHEMA_VERSION,
        grid: grid.clone(),
        radii,
        all_passed: failures.is_empty(),
        profiles,
        failures,
        warnings,
    })
}
