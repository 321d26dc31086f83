//! The eight experiments. Each one reads its own `[params]` table, runs the
//! core routines and reports one row per checked quantity.

use std::sync::Arc;

use anyhow::Result;
use grushin_core::functions::Bump;
use grushin_core::grid::{rasterize, Grid, GridSpec, SetMask, SetSpec, SingleField};
use grushin_core::metric::cc_distance;
use grushin_core::operator::{eigendecompose, CoefficientRule, Count, GrushinOperator, Method, SpectralData};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::ExperimentId;
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::Report;

mod besov_equivalence;
mod besov_limits;
mod isoperimetric;
mod kernel;
mod metric_volumes;
mod perimeter_coarea;
mod semigroup;
mod sobolev_hls;

/// Grid, operator and full spectrum for one grid spec.
pub struct Lab {
    pub grid: Arc<Grid>,
    pub op: GrushinOperator,
    pub sd: SpectralData,
}

impl Lab {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        let grid = Arc::new(Grid::new(spec.clone())?);
        let op = GrushinOperator::assemble(grid.clone(), CoefficientRule::CellAverage);
        let sd = eigendecompose(&op, Count::All, Method::Separable)?;
        Ok(Lab { grid, op, sd })
    }
}

/// The same spec with `points` nodes on every axis.
pub fn with_points(spec: &GridSpec, points: usize) -> GridSpec {
    GridSpec {
        points: vec![points; spec.n()],
        ..spec.clone()
    }
}

pub fn bumps_or_default(cfg: &ExperimentConfig) -> Vec<Bump> {
    let b = cfg.bumps();
    if b.is_empty() {
        grushin_core::functions::default_bump_family()
    } else {
        b
    }
}

/// A sum of three random Gaussian bumps with signed amplitudes.
pub fn random_smooth(g: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u = vec![0.0; g.len()];
    for _ in 0..3 {
        let b = Bump {
            center: (0..g.n_axes()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            width: rng.random_range(0.25..0.6),
            amplitude: rng.random_range(-1.0..1.0),
        };
        for (a, v) in u.iter_mut().zip(b.sample(g)) {
            *a += v;
        }
    }
    u
}

/// Rasterizes any set kind; metric balls get their distance field here.
pub fn rasterize_any(set: &SetSpec, grid: &Grid) -> Result<SetMask> {
    let norm = set.normalized(grid.m(), grid.alpha());
    if let SetSpec::MetricBall { center, .. } = &norm {
        let field = cc_distance(grid, grid.nearest_node(center))?;
        return Ok(rasterize(&norm, grid, Some(&SingleField(&field.values)))?);
    }
    Ok(rasterize(&norm, grid, None)?)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `max / min` of a positive sample; infinite if any entry is not positive.
pub fn band(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

pub fn validate_params(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    match cfg.experiment {
        ExperimentId::SemigroupChecks => semigroup::Params::load(cfg).map(drop),
        ExperimentId::KernelBounds => kernel::Params::load(cfg).map(drop),
        ExperimentId::MetricVolumes => metric_volumes::Params::load(cfg).map(drop),
        ExperimentId::BesovEquivalence => besov_equivalence::Params::load(cfg).map(drop),
        ExperimentId::BesovLimits => besov_limits::Params::load(cfg).map(drop),
        ExperimentId::PerimeterCoarea => perimeter_coarea::Params::load(cfg).map(drop),
        ExperimentId::IsoperimetricScan => isoperimetric::Params::load(cfg).map(drop),
        ExperimentId::SobolevHls => sobolev_hls::Params::load(cfg).map(drop),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(cfg.experiment.id());
    match cfg.experiment {
        ExperimentId::SemigroupChecks => semigroup::run(cfg, &mut report)?,
        ExperimentId::KernelBounds => kernel::run(cfg, &mut report)?,
        ExperimentId::MetricVolumes => metric_volumes::run(cfg, &mut report)?,
        ExperimentId::BesovEquivalence => besov_equivalence::run(cfg, &mut report)?,
        ExperimentId::BesovLimits => besov_limits::run(cfg, &mut report)?,
        ExperimentId::PerimeterCoarea => perimeter_coarea::run(cfg, &mut report)?,
        ExperimentId::IsoperimetricScan => isoperimetric::run(cfg, &mut report)?,
        ExperimentId::SobolevHls => sobolev_hls::run(cfg, &mut report)?,
    }
    Ok(report)
}
