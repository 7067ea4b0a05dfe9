//! Parameter sweeps over `(n, k, σ)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run, RunSummary};
use super::{error_exit_code, exit_code};
use crate::error::{Error, Result};
use crate::exponents::feasibility;
use crate::geometry::{ManifoldProfile, Order};

/// Axes of the sweep and the per-point template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: Vec<u32>,
    pub k: Vec<Order>,
    pub sigma: Vec<f64>,
    /// Every [`ExperimentConfig`] key except `profile` and `sigma`.
    #[serde(default)]
    pub template: toml::Table,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("sweep", e.message().to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The grid points in sweep order `(n, k, σ)`.
    pub fn points(&self) -> Vec<(u32, Order, f64)> {
        let mut v = Vec::new();
        for &n in &self.n {
            for &k in &self.k {
                for &s in &self.sigma {
                    v.push((n, k, s));
                }
            }
        }
        v
    }

    /// The experiment config of one point.
    pub fn point_config(&self, n: u32, k: Order, sigma: f64) -> Result<ExperimentConfig> {
        for key in ["profile", "sigma"] {
            if self.template.contains_key(key) {
                return Err(Error::config(format!("template.{key}"), "is set by the sweep axes"));
            }
        }
        let mut table = self.template.clone();
        let mut profile = toml::Table::new();
        profile.insert("n".into(), toml::Value::Integer(n as i64));
        profile.insert(
            "k".into(),
            match k {
                Order::Finite(k) => toml::Value::Integer(k as i64),
                Order::Infinite => toml::Value::String("inf".into()),
            },
        );
        table.insert("profile".into(), toml::Value::Table(profile));
        table.insert("sigma".into(), toml::Value::Float(sigma));
        ExperimentConfig::deserialize(table).map_err(|e| Error::config("template", e.message().to_string()))
    }
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub k: Order,
    pub sigma: f64,
    /// Verdict of the exponent solver, independent of the simulation.
    pub feasible: Option<bool>,
    pub exit_code: i32,
    pub status: String,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Header of `summary.csv`.
pub const SWEEP_CSV_HEADER: &str = "n,k,sigma,feasible,exit_code,status,defect_decay_rate,defect_ratio,beta_fit,morawetz_saturated,morawetz_constant,virial_constant,error";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        fn o<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let s = self.summary.as_ref();
        let error = self.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
            self.n,
            self.k,
            self.sigma,
            o(self.feasible),
            self.exit_code,
            self.status,
            o(s.and_then(|s| s.defect_decay_rate)),
            o(s.and_then(|s| s.defect_ratio)),
            o(s.and_then(|s| s.beta_fit)),
            o(s.and_then(|s| s.morawetz_saturated)),
            o(s.and_then(|s| s.morawetz_constant)),
            o(s.and_then(|s| s.virial_constant)),
            error
        )
    }
}

fn point_dir(n: u32, k: Order, sigma: f64) -> String {
    format!("n{n}_k{k}_sigma{sigma}")
}

fn run_point(cfg: &SweepConfig, out: &Path, n: u32, k: Order, sigma: f64) -> SweepRow {
    let feasible = ManifoldProfile::new(n, k).and_then(|p| feasibility(&p, sigma)).ok();
    let result = cfg
        .point_config(n, k, sigma)
        .and_then(|c| run(c, &out.join("points").join(point_dir(n, k, sigma))));
    match result {
        Ok(report) => SweepRow {
            n,
            k,
            sigma,
            feasible,
            exit_code: exit_code(report.status),
            status: serde_json::to_value(report.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            summary: Some(report.summary),
            error: report.error,
        },
        Err(e) => SweepRow {
            n,
            k,
            sigma,
            feasible,
            exit_code: error_exit_code(&e),
            status: "rejected".into(),
            summary: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every point on a pool of `workers` threads and writes
/// `summary.csv` sorted by `(n, k, σ)`. Individual failures are recorded
/// in their rows.
pub fn sweep(cfg: &SweepConfig, out: &Path, workers: usize) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let points = cfg.points();
    let mut rows: Vec<SweepRow> =
        pool.install(|| points.par_iter().map(|&(n, k, s)| run_point(cfg, out, n, k, s)).collect());
    rows.sort_by(|a, b| (a.n, a.k).cmp(&(b.n, b.k)).then(a.sigma.total_cmp(&b.sigma)));
    let mut csv = BufWriter::new(File::create(out.join("summary.csv"))?);
    writeln!(csv, "{SWEEP_CSV_HEADER}")?;
    for r in &rows {
        writeln!(csv, "{}", r.csv_line())?;
    }
    csv.flush()?;
    Ok(rows)
}
