//! Experiment orchestration: configuration, single runs, sweeps, the
//! geometry certificate, and the exit-code convention of the CLI.
//!
//! Exit codes: `0` success, `1` invariant violation or I/O failure (or, for
//! sweeps, every point failed), `2` invalid configuration, `3` boundary-leak
//! abort, `4` numerical failure.

pub mod certify;
pub mod config;
pub mod run;
pub mod sweep;


use serde::Serialize;

pub use certify::{verify_geometry, GeometryGrid, GeometryReport};
pub use config::{DataConfig, DiagnosticsConfig, ExperimentConfig, GridConfig, ProfileConfig, TimeConfig};
pub use run::{prepare, run, RunReport, RunStatus, RunSummary};
pub use sweep::{sweep, SweepConfig, SweepRow};

use crate::error::{Error, Result};
use crate::exponents::{feasibility, solve_exponents_hyperbolic, solve_exponents_m, ExponentOutcome};
use crate::geometry::{scattering_dimension, ManifoldProfile, Order};

/// Version tag of every JSON artifact.
pub const SCHEMA_VERSION: &str = "radscat/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_LEAK: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Ok => EXIT_OK,
        RunStatus::InvariantViolation => EXIT_FAILURE,
        RunStatus::LeakAbort => EXIT_LEAK,
        RunStatus::NumericalFailure => EXIT_NUMERICAL,
    }
}

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Domain(_) | Error::Range(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::DomainTooSmall { .. } => EXIT_LEAK,
        Error::Numerical { .. } => EXIT_NUMERICAL,
        Error::Io(_) | Error::Json(_) => EXIT_FAILURE,
    }
}

/// Output of the `exponents` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentsReport {
    pub schema_version: &'static str,
    pub n: u32,
    pub k: Order,
    pub sigma: f64,
    /// `2/N`, the short-range threshold.
    pub borderline: f64,
    pub feasible: bool,
    /// The solved system; absent for `k = 0`, where the range is explicit.
    pub outcome: Option<ExponentOutcome>,
}

pub fn exponents_report(n: u32, k: Order, sigma: f64) -> Result<ExponentsReport> {
    let profile = ManifoldProfile::new(n, k)?;
    let outcome = match k {
        Order::Infinite => Some(solve_exponents_hyperbolic(n, sigma)?),
        Order::Finite(0) => None,
        Order::Finite(k) => Some(solve_exponents_m(n, k, sigma)?),
    };
    Ok(ExponentsReport {
        schema_version: SCHEMA_VERSION,
        n,
        k,
        sigma,
        borderline: scattering_dimension(&profile).borderline(),
        feasible: feasibility(&profile, sigma)?,
        outcome,
    })
}
