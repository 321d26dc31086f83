//! Config-driven runner for the grushin-core experiments.
//!
//! An experiment is a TOML file naming one of the catalog entries, a grid,
//! a quadrature and an optional test family. Running it produces
//! `results.csv`, one CSV per data table and `summary.json`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;

pub mod catalog;
pub mod config;
pub mod experiments;
pub mod report;

pub use catalog::ExperimentId;
pub use config::{ConfigError, ExperimentConfig};
pub use report::Report;

/// Output directory: `--out`, else the config's `out_dir`, else `out/<id>`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.id()))
}

/// Runs `cfg` and writes every artifact into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<Report> {
    let start = Instant::now();
    let report = experiments::run(cfg)?;
    let config = serde_json::to_value(cfg)?;
    report::write_all(dir, &report, config, start.elapsed().as_secs_f64())?;
    Ok(report)
}
