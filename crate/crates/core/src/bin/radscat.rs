use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};

use radscat::error::Error;
use radscat::geometry::Order;
use radscat::harness::{
    error_exit_code, exponents_report, run, sweep, verify_geometry, ExperimentConfig, GeometryGrid, SweepConfig,
    EXIT_FAILURE, EXIT_OK,
};

#[derive(Parser)]
#[command(name = "radscat", version, about = "Radial NLS scattering experiments on model manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Falls back to `output_dir` of the config.
        #[arg(long, env = "RADSCAT_OUT")]
        out: Option<PathBuf>,
    },
    /// Run every (n, k, sigma) point of a sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "RADSCAT_OUT")]
        out: PathBuf,
        #[arg(long, env = "RADSCAT_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Certify the profile inequalities over an (n, k, r) grid.
    VerifyGeometry {
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Write the JSON certificate here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the exponent system for one (n, k, sigma).
    Exponents {
        #[arg(long)]
        n: u32,
        /// A non-negative integer or `inf`.
        #[arg(long)]
        k: Order,
        #[arg(long)]
        sigma: f64,
    },
}

fn emit(json: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, format!("{json}\n"))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::config("output_dir", "no output directory: pass --out or set RADSCAT_OUT"))?;
            let report = run(cfg, &out)?;
            if let Some(e) = &report.error {
                error!("run stopped early: {e}");
            }
            for w in &report.diagnostics.warnings {
                warn!("{w}");
            }
            for v in &report.diagnostics.invariant_violations {
                error!("invariant violation: {v}");
            }
            info!("status {:?}, artifacts in {}", report.status, out.display());
            Ok(report.exit_code)
        }
        Command::Sweep { config, out, workers } => {
            let cfg = SweepConfig::from_file(&config)?;
            let rows = sweep(&cfg, &out, workers)?;
            let failed = rows.iter().filter(|r| r.exit_code != EXIT_OK).count();
            info!("{} points, {failed} failed, summary in {}", rows.len(), out.join("summary.csv").display());
            Ok(if !rows.is_empty() && failed == rows.len() { EXIT_FAILURE } else { EXIT_OK })
        }
        Command::VerifyGeometry { grid, out } => {
            let grid = match grid {
                Some(p) => GeometryGrid::from_file(&p)?,
                None => GeometryGrid::default(),
            };
            let report = verify_geometry(&grid)?;
            for w in &report.warnings {
                warn!("{w}");
            }
            emit(&serde_json::to_string_pretty(&report)?, out.as_deref())?;
            Ok(if report.all_passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Exponents { n, k, sigma } => {
            let report = exponents_report(n, k, sigma)?;
            emit(&serde_json::to_string_pretty(&report)?, None)?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
