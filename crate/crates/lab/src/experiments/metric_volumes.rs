use anyhow::Result;
use grushin_core::grid::{Grid, GridSpec};
use grushin_core::metric::{ball_volume, cc_distance, cc_distances, volume_scaling_fit, VolumeModel};
use grushin_core::quadrature::log_space;
use serde::{Deserialize, Serialize};

use super::band;
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub euclid_source: Vec<f64>,
    /// Centers (x, 0) of the volume-model probes.
    pub x_centers: Vec<f64>,
    pub radii: [f64; 2],
    pub radius_count: usize,
    pub band_bound: f64,
    pub doubling_bound: f64,
    /// Metric-only grid around the origin that resolves the r² vertical scale.
    pub slope_half_width: Vec<f64>,
    pub slope_points: Vec<usize>,
    pub slope_radii: [f64; 2],
    pub slope_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            euclid_source: vec![0.3, -0.2],
            x_centers: vec![0.0, 0.5, 1.0],
            radii: [0.1, 0.8],
            radius_count: 12,
            band_bound: 20.0,
            doubling_bound: 16.0,
            slope_half_width: vec![1.5, 0.75],
            slope_points: vec![257, 257],
            slope_radii: [0.2, 0.6],
            slope_tolerance: 0.05,
        }
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        if cfg.grid.m != 1 || cfg.grid.k != 1 {
            return Err(ConfigError::new("grid", "metric-volumes probes the plane: needs m = k = 1"));
        }
        if p.euclid_source.len() != 2 {
            return Err(ConfigError::new("params.euclid_source", "needs 2 coordinates"));
        }
        for (key, [a, b]) in [("radii", p.radii), ("slope_radii", p.slope_radii)] {
            if !(a > 0.0 && b > a) {
                return Err(ConfigError::new(format!("params.{key}"), "need 0 < r0 < r1"));
            }
        }
        if p.radius_count < 3 {
            return Err(ConfigError::new("params.radius_count", "must be >= 3"));
        }
        slope_spec(cfg, &p).validate().map_err(|e| match e {
            grushin_core::Error::Config { key, message } => {
                ConfigError::new(key.replace("grid.half_width", "params.slope_half_width").replace("grid.points", "params.slope_points"), message)
            }
            other => ConfigError::new("params", other.to_string()),
        })?;
        Ok(p)
    }
}

fn slope_spec(cfg: &ExperimentConfig, p: &Params) -> GridSpec {
    GridSpec {
        half_width: p.slope_half_width.clone(),
        points: p.slope_points.clone(),
        ..cfg.grid.clone()
    }
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;

    rep.section("metric-volume", "CC distance, volume model, volume growth and doubling");
    let flat = Grid::new(cfg.grid.with_alpha(0.0))?;
    let h = flat.max_spacing();
    let src = flat.nearest_node(&p.euclid_source);
    let f = cc_distance(&flat, src)?;
    let o = flat.coords(src);
    let err = (0..flat.len())
        .map(|n| {
            let c = flat.coords(n);
            let e = ((c[0] - o[0]).powi(2) + (c[1] - o[1]).powi(2)).sqrt();
            (f.values[n] - e).abs()
        })
        .fold(0.0, f64::max);
    rep.push("alpha=0 max distance error", format!("h={h:.6}"), err, h, Tag::Oracle, Tolerance::AtMost);

    let g = Grid::new(cfg.grid.clone())?;
    let nodes: Vec<usize> = p.x_centers.iter().map(|x| g.nearest_node(&[*x, 0.0])).collect();
    let fields = cc_distances(&g, &nodes)?;
    let radii = log_space(p.radii[0], p.radii[1], p.radius_count);
    let mut table = Table::new("ball_volumes", &["x_center", "r", "volume", "model", "ratio", "doubling"]);
    let mut ratios = Vec::new();
    let mut doubling: f64 = 0.0;
    for ((x, f), &node) in p.x_centers.iter().zip(&fields).zip(&nodes) {
        for &r in &radii {
            let v = ball_volume(&g, f, r);
            let v2 = ball_volume(&g, f, 2.0 * r);
            if v.touches_boundary || v2.touches_boundary {
                rep.warn(format!("ball at x={x}, r={r} touches the box boundary"));
            }
            let model = VolumeModel.at_node(&g, node, r);
            ratios.push(v.volume / model);
            doubling = doubling.max(v2.volume / v.volume);
            table.push(&format!("{x}"), &[r, v.volume, model, v.volume / model, v2.volume / v.volume]);
        }
    }
    rep.tables.push(table);
    let par = format!("x={:?};r=[{},{}]", p.x_centers, p.radii[0], p.radii[1]);
    rep.push("ball/model ratio band", &*par, band(&ratios), p.band_bound, Tag::Oracle, Tolerance::AtMost);
    rep.push("max doubling ratio", &*par, doubling, p.doubling_bound, Tag::Theory, Tolerance::AtMost);

    let fine = Grid::new(slope_spec(cfg, &p))?;
    let f0 = cc_distance(&fine, fine.nearest_node(&[0.0, 0.0]))?;
    let slope = volume_scaling_fit(&fine, &f0, &log_space(p.slope_radii[0], p.slope_radii[1], 9));
    let par = format!("x=0;r=[{},{}];points={:?}", p.slope_radii[0], p.slope_radii[1], p.slope_points);
    rep.push("volume scaling slope", par, slope, g.hom_dimension(), Tag::Theory, Tolerance::Rel(p.slope_tolerance));
    Ok(())
}
