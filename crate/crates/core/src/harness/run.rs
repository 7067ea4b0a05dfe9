//! A single experiment: evolve, diagnose, write artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::{exit_code, SCHEMA_VERSION};
use crate::diagnostics::{DecayExponent, Diagnostics, DiagnosticsReport, SERIES_CSV_HEADER};
use crate::discretization::io::write_checkpoint;
use crate::discretization::RadialGrid;
use crate::error::{Error, Result};
use crate::evolution::{required_radius, Integrator};

/// Per-run scalars collected by sweeps.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    /// Exponent of the power-law fit of `defect(T, 2T)` against `T`.
    pub defect_decay_rate: Option<f64>,
    /// Last dyadic ratio `defect(T/2, T)/defect(T, 2T)`.
    pub defect_ratio: Option<f64>,
    pub beta_fit: Option<f64>,
    pub morawetz_saturated: Option<bool>,
    pub morawetz_constant: Option<f64>,
    pub virial_constant: Option<f64>,
    pub lambda_fit: Option<f64>,
    pub mass_drift: f64,
    pub energy_drift: f64,
}

impl RunSummary {
    pub fn from_report(r: &DiagnosticsReport) -> Self {
        RunSummary {
            defect_decay_rate: r.scattering.as_ref().and_then(|s| s.decay_fit.map(|f| f.slope)),
            defect_ratio: r.scattering.as_ref().and_then(|s| s.dyadic_ratios.last().copied()),
            beta_fit: r.longrange.as_ref().and_then(|l| match l.exponent {
                DecayExponent::Fitted { beta, .. } => Some(beta),
                DecayExponent::Undetermined => None,
            }),
            morawetz_saturated: r.morawetz.as_ref().map(|m| m.saturated),
            morawetz_constant: r.morawetz.as_ref().map(|m| m.bound_constant),
            virial_constant: r.virial.as_ref().map(|v| v.constant),
            lambda_fit: r.phase.as_ref().map(|p| p.lambda_fit),
            mass_drift: r.conservation.mass_drift,
            energy_drift: r.conservation.energy_drift,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    InvariantViolation,
    LeakAbort,
    NumericalFailure,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: &'static str,
    pub status: RunStatus,
    pub exit_code: i32,
    /// Message of the error that stopped the run early.
    pub error: Option<String>,
    pub work_estimate: f64,
    pub summary: RunSummary,
    pub diagnostics: DiagnosticsReport,
}

/// Checks the config and the domain-sizing rule without running anything.
pub fn prepare(config: ExperimentConfig) -> Result<(ExperimentConfig, Arc<RadialGrid>)> {
    let config = config.resolve()?;
    let work = config.work_estimate();
    if work > config.max_work {
        return Err(Error::config(
            "max_work",
            format!("estimated work {work:.3e} (nodes x steps) exceeds the ceiling {:.3e}", config.max_work),
        ));
    }
    let profile = config.manifold()?;
    let r_max = config.r_max();
    let grid = Arc::new(
        RadialGrid::new(profile, r_max, config.grid.m).map_err(|e| Error::config("grid", e.to_string()))?,
    );
    let data = config.data.initial_data(config.seed);
    let state = data.state(grid.clone()).map_err(|e| Error::config("data", e.to_string()))?;
    let cap = config.grid.xi_cap.min(std::f64::consts::PI / grid.h());
    let needed = required_radius(&state, data.support_radius(), config.time.t_final, cap);
    if r_max < needed {
        return Err(Error::config(
            "grid.r_max",
            format!(
                "r_max = {r_max} is below the domain-sizing bound r_data + 2 c t_final = {needed:.3} for this data and t_final = {}",
                config.time.t_final
            ),
        ));
    }
    Ok((config, grid))
}

/// Runs one experiment and writes `report.json`, `series.csv`,
/// `profile.csv` and checkpoints under `out`. Config errors are returned;
/// failures during the run are recorded in the report.
pub fn run(config: ExperimentConfig, out: &Path) -> Result<RunReport> {
    let (config, grid) = prepare(config)?;
    fs::create_dir_all(out)?;
    let icfg = config.integrator();
    let mut diag = Diagnostics::new(grid.clone(), &icfg, config.diagnostics_options())?;
    let mut integ = Integrator::new(grid.clone(), icfg)?;
    let state = config.data.initial_data(config.seed).state(grid)?;
    let checkpoint_dir = out.join("checkpoints");
    if config.time.checkpoint_every.is_some() {
        fs::create_dir_all(&checkpoint_dir)?;
    }
    let every = config.time.checkpoint_every;
    let outcome = integ.evolve(state, config.time.t_final, config.time.sample_every, |s| {
        diag.observe(s)?;
        if let Some(c) = every {
            let k = (s.t / c).round();
            if k > 0.0 && (k * c - s.t).abs() <= 0.5 * config.time.dt {
                write_checkpoint(&checkpoint_path(&checkpoint_dir, s.t), s)?;
            }
        }
        Ok(())
    });
    let (status, error) = match outcome {
        Ok(last) => {
            fs::create_dir_all(&checkpoint_dir)?;
            write_checkpoint(&checkpoint_dir.join("final.bin"), &last)?;
            (RunStatus::Ok, None)
        }
        Err(e @ (Error::Io(_) | Error::Json(_) | Error::Config { .. })) => return Err(e),
        Err(e @ Error::DomainTooSmall { .. }) => (RunStatus::LeakAbort, Some(e.to_string())),
        Err(e) => (RunStatus::NumericalFailure, Some(e.to_string())),
    };
    let mut report = diag.finish();
    report.config = Some(serde_json::to_value(&config)?);
    let status = if status == RunStatus::Ok && !report.invariant_violations.is_empty() {
        RunStatus::InvariantViolation
    } else {
        status
    };
    let run_report = RunReport {
        schema_version: SCHEMA_VERSION,
        status,
        exit_code: exit_code(status),
        error,
        work_estimate: config.work_estimate(),
        summary: RunSummary::from_report(&report),
        diagnostics: report,
    };
    write_artifacts(&run_report, out)?;
    Ok(run_report)
}

fn checkpoint_path(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("t{t:012.4}.bin"))
}

/// Header of `profile.csv`.
pub const PROFILE_CSV_HEADER: &str = "t,rho,F";

pub fn write_artifacts(report: &RunReport, out: &Path) -> Result<()> {
    let mut json = BufWriter::new(File::create(out.join("report.json"))?);
    serde_json::to_writer_pretty(&mut json, report)?;
    json.write_all(b"\n")?;
    json.flush()?;

    let mut csv = BufWriter::new(File::create(out.join("series.csv"))?);
    writeln!(csv, "{SERIES_CSV_HEADER}")?;
    for row in &report.diagnostics.series {
        writeln!(csv, "{}", row.csv_line())?;
    }
    csv.flush()?;

    let mut csv = BufWriter::new(File::create(out.join("profile.csv"))?);
    writeln!(csv, "{PROFILE_CSV_HEADER}")?;
    for snap in &report.diagnostics.profiles {
        for (p, f) in snap.rho.iter().zip(&snap.f) {
            writeln!(csv, "{:e},{:e},{:e}", snap.t, p, f)?;
        }
    }
    csv.flush()?;
    Ok(())
}
