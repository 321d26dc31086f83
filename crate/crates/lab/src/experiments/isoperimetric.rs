use anyhow::Result;
use grushin_core::grid::{SetMask, SetSpec};
use grushin_core::perimeter::{isoperimetric_scan, sobolev_route_check, truncation_warning, IsoScan};
use grushin_core::quadrature::log_space;
use serde::{Deserialize, Serialize};

use super::{rasterize_any, with_points, Lab};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub powers: Vec<f64>,
    /// Times `[t0, t1]` and count of the grid used for the L^s and limit perimeters.
    pub times: [f64; 2],
    pub time_count: usize,
    /// Family label of the set carried along the dilation ladder.
    pub ladder_set: String,
    pub ladder: Vec<f64>,
    pub ladder_tolerance: f64,
    pub coarse_points: usize,
    pub refinement_tolerance: f64,
    /// Nested family labels, outermost first, summed into the staircase.
    pub route_sets: Vec<String>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            powers: vec![0.1, 0.25, 0.4],
            times: [1e-5, 1e2],
            time_count: 57,
            ladder_set: "box_a".into(),
            ladder: vec![1.0, 1.25, 1.5, 2.0],
            ladder_tolerance: 0.05,
            coarse_points: 48,
            refinement_tolerance: 0.1,
            route_sets: vec!["box_a".into(), "small".into()],
        }
    }
}

fn boxed(c: [f64; 2], h: [f64; 2]) -> SetSpec {
    SetSpec::EuclideanBox {
        center: c.to_vec(),
        half_sides: h.to_vec(),
    }
}

fn ball(x: f64) -> SetSpec {
    SetSpec::MetricBall {
        center: vec![x, 0.0],
        radius: 0.6,
    }
}

fn default_family() -> Vec<(String, SetSpec)> {
    vec![
        ("box_a".into(), boxed([0.0, 0.0], [0.5, 0.5])),
        ("box_b".into(), boxed([0.0, 0.0], [0.8, 0.3])),
        ("box_c".into(), boxed([0.0, 0.0], [0.3, 0.9])),
        ("small".into(), boxed([0.0, 0.0], [0.3, 0.3])),
        ("ball_0".into(), ball(0.0)),
        ("ball_0.5".into(), ball(0.5)),
        ("ball_1".into(), ball(1.0)),
    ]
}

fn family(cfg: &ExperimentConfig) -> Vec<(String, SetSpec)> {
    let sets = cfg.sets();
    if sets.is_empty() {
        default_family()
    } else {
        sets
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        if let Some(i) = p.powers.iter().position(|s| !(*s > 0.0 && *s < 0.5)) {
            return Err(ConfigError::new(format!("params.powers[{i}]"), "must lie in (0, 1/2)"));
        }
        if !(p.times[0] > 0.0 && p.times[1] > p.times[0]) || p.time_count < 3 {
            return Err(ConfigError::new("params.times", "need 0 < t0 < t1 and time_count >= 3"));
        }
        if p.ladder.first() != Some(&1.0) || p.ladder.iter().any(|l| !(*l > 0.0)) {
            return Err(ConfigError::new("params.ladder", "must start at 1 and stay positive"));
        }
        if p.coarse_points < 3 {
            return Err(ConfigError::new("params.coarse_points", "must be >= 3"));
        }
        let labels: Vec<String> = family(cfg).into_iter().map(|(l, _)| l).collect();
        for (i, l) in p.route_sets.iter().enumerate() {
            if !labels.contains(l) {
                return Err(ConfigError::new(format!("params.route_sets[{i}]"), format!("no family set labelled `{l}`")));
            }
        }
        if !labels.contains(&p.ladder_set) {
            return Err(ConfigError::new("params.ladder_set", format!("no family set labelled `{}`", p.ladder_set)));
        }
        Ok(p)
    }
}

fn masks(lab: &Lab, specs: &[(String, SetSpec)]) -> Result<Vec<(String, SetMask)>> {
    specs.iter().map(|(l, s)| Ok((l.clone(), rasterize_any(s, &lab.grid)?))).collect()
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;
    let quad = &cfg.quadrature;
    let ts = log_space(p.times[0], p.times[1], p.time_count);
    let specs = family(cfg);
    let lab = Lab::new(&cfg.grid)?;
    let sets = masks(&lab, &specs)?;
    for (label, m) in &sets {
        if let Some(w) = truncation_warning(&lab.grid, m) {
            rep.warn(format!("{label}: {w}"));
        }
    }
    let coarse_lab = Lab::new(&with_points(&cfg.grid, p.coarse_points))?;
    let coarse_sets = masks(&coarse_lab, &specs)?;
    let scans: Vec<IsoScan> = p.powers.iter().map(|&s| isoperimetric_scan(&lab.sd, &sets, s, quad, &ts)).collect::<Result<_, _>>()?;

    rep.section("isoperimetric-ratios", "fractional isoperimetric inequality");
    let mut table = Table::new("isoperimetric", &["set", "s", "measure", "p_star", "p_ls", "p_inf", "ratio_star", "ratio_ls", "ratio_inf"]);
    for scan in &scans {
        for r in &scan.rows {
            table.push(&r.label, &[scan.s, r.measure, r.p_star, r.p_ls, r.p_inf, r.ratio_star, r.ratio_ls, r.ratio_inf]);
        }
        for (name, v) in [("star", scan.min_star), ("ls", scan.min_ls), ("inf", scan.min_inf)] {
            rep.push(format!("family min ratio ({name})"), format!("s={}", scan.s), v, 0.0, Tag::Theory, Tolerance::Above);
        }
    }
    rep.tables.push(table);

    rep.section("isoperimetric-refinement", "fractional isoperimetric inequality");
    for (scan, &s) in scans.iter().zip(&p.powers) {
        let coarse = isoperimetric_scan(&coarse_lab.sd, &coarse_sets, s, quad, &ts)?;
        let par = format!("s={s};points={}->{}", p.coarse_points, cfg.grid.points[0]);
        rep.push("family min ratio fine / coarse", par, scan.min_star / coarse.min_star, 1.0, Tag::Oracle, Tolerance::Rel(p.refinement_tolerance));
    }

    rep.section("isoperimetric-dilation", "dilation invariance of the isoperimetric ratio");
    let inner = specs.iter().find(|(l, _)| *l == p.ladder_set).map(|(_, s)| s.clone()).expect("validated");
    let mut table = Table::new("dilation_ladder", &["set", "lambda", "s", "ratio_star", "ratio_ls"]);
    for &lambda in &p.ladder[1..] {
        let dl = Lab::new(&cfg.grid.dilated(lambda))?;
        let set = vec![(p.ladder_set.clone(), rasterize_any(&SetSpec::dilate(lambda, inner.clone()), &dl.grid)?)];
        let base = vec![sets.iter().find(|(l, _)| *l == p.ladder_set).cloned().expect("validated")];
        let dts: Vec<f64> = ts.iter().map(|t| t * lambda * lambda).collect();
        for &s in &p.powers {
            let a = isoperimetric_scan(&lab.sd, &base, s, quad, &ts)?;
            let b = isoperimetric_scan(&dl.sd, &set, s, quad, &dts)?;
            table.push(&p.ladder_set, &[lambda, s, b.rows[0].ratio_star, b.rows[0].ratio_ls]);
            let par = format!("set={};lambda={lambda};s={s}", p.ladder_set);
            rep.push("ratio at lambda / ratio at 1", par, b.rows[0].ratio_star / a.rows[0].ratio_star, 1.0, Tag::Theory, Tolerance::Rel(p.ladder_tolerance));
        }
    }
    rep.tables.push(table);

    rep.section("sobolev-route", "Sobolev inequality via coarea");
    let nested: Vec<&SetMask> = p
        .route_sets
        .iter()
        .map(|l| &sets.iter().find(|(k, _)| k == l).expect("validated").1)
        .collect();
    for scan in &scans {
        let r = sobolev_route_check(&lab.sd, &nested, scan.s, quad, scan.min_star)?;
        let par = format!("s={};sets={:?}", scan.s, p.route_sets);
        rep.push("norm / perimeter bound", par, r.norm / r.bound, 1.0, Tag::Theory, Tolerance::AtMost);
    }
    Ok(())
}
