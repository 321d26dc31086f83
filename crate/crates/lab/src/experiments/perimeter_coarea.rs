use anyhow::Result;
use grushin_core::functions::Bump;
use grushin_core::grid::{SetMask, SetSpec};
use grushin_core::perimeter::*;
use serde::{Deserialize, Serialize};

use super::{rasterize_any, Lab};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub powers: Vec<f64>,
    pub identity_tolerance: f64,
    /// Mollifier widths in units of twice the largest mesh width, descending.
    pub mollifier_widths: Vec<f64>,
    pub staircase_heights: Vec<f64>,
    pub coarea_bins: usize,
    pub coarea_bump: Bump,
    pub binned_tolerance: f64,
    pub small_s: Vec<f64>,
    pub small_s_half_side: f64,
    pub small_s_tolerance: f64,
    pub half_s: Vec<f64>,
    /// `t_res` of the s -> 1/2 bracket in units of the squared mesh width.
    pub half_resolution: f64,
    pub half_slack: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            powers: vec![0.1, 0.25, 0.4],
            identity_tolerance: 1e-8,
            mollifier_widths: vec![8.0, 4.0, 2.0, 1.0],
            staircase_heights: vec![0.5, 1.0, 0.25],
            coarea_bins: 64,
            coarea_bump: Bump::new(vec![0.0, 0.0], 0.55),
            binned_tolerance: 0.01,
            small_s: vec![0.2, 0.1, 0.05],
            small_s_half_side: 0.5,
            small_s_tolerance: 0.1,
            half_s: vec![0.3, 0.4, 0.45, 0.48],
            half_resolution: 4.0,
            half_slack: 0.1,
        }
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        for (key, v) in [("powers", &p.powers), ("small_s", &p.small_s), ("half_s", &p.half_s)] {
            if let Some(i) = v.iter().position(|s| !(*s > 0.0 && *s < 0.5)) {
                return Err(ConfigError::new(format!("params.{key}[{i}]"), "must lie in (0, 1/2)"));
            }
        }
        if p.mollifier_widths.is_empty() || p.mollifier_widths.windows(2).any(|w| w[1] >= w[0]) || p.mollifier_widths.iter().any(|w| *w < 1.0) {
            return Err(ConfigError::new("params.mollifier_widths", "must be descending and >= 1"));
        }
        if p.staircase_heights.iter().any(|h| !(*h > 0.0)) {
            return Err(ConfigError::new("params.staircase_heights", "must be positive"));
        }
        if p.coarea_bins == 0 {
            return Err(ConfigError::new("params.coarea_bins", "must be positive"));
        }
        p.coarea_bump.validate("params.coarea_bump", cfg.grid.n())?;
        if !(p.small_s_half_side > 0.0) || !(p.half_resolution > 0.0) {
            return Err(ConfigError::new("params.small_s_half_side", "need positive sizes"));
        }
        let given = cfg.sets().len();
        if given > 0 && given < p.staircase_heights.len() {
            return Err(ConfigError::new("family", "needs at least as many sets as staircase heights"));
        }
        Ok(p)
    }
}

fn boxed(c: [f64; 2], h: [f64; 2]) -> SetSpec {
    SetSpec::EuclideanBox {
        center: c.to_vec(),
        half_sides: h.to_vec(),
    }
}

/// Nested boxes, outermost first.
fn default_sets() -> Vec<(String, SetSpec)> {
    vec![
        ("outer".into(), boxed([0.0, 0.1], [1.0, 0.8])),
        ("middle".into(), boxed([0.1, 0.0], [0.6, 0.5])),
        ("inner".into(), boxed([0.0, 0.0], [0.3, 0.3])),
    ]
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;
    let lab = Lab::new(&cfg.grid)?;
    let (g, sd) = (&lab.grid, &lab.sd);
    let quad = &cfg.quadrature;
    let specs = if cfg.sets().is_empty() { default_sets() } else { cfg.sets() };
    let sets: Vec<(String, SetMask)> = specs
        .iter()
        .map(|(l, s)| Ok((l.clone(), rasterize_any(s, g)?)))
        .collect::<Result<_>>()?;
    for (label, m) in &sets {
        if let Some(w) = truncation_warning(g, m) {
            rep.warn(format!("{label}: {w}"));
        }
    }

    rep.section("perimeter-identity", "perimeter identity under a shared quadrature");
    let mut table = Table::new("perimeter_identity", &["set", "s", "lhs", "shared", "spectral", "rel_shared", "rel_spectral"]);
    for (label, m) in &sets {
        for &s in &p.powers {
            let id = perimeter_identity(sd, m, s, quad)?;
            table.push(label, &[s, id.lhs, id.shared, id.spectral, id.rel_shared, id.rel_spectral]);
            rep.push("relative identity defect", format!("set={label};s={s}"), id.rel_shared, p.identity_tolerance, Tag::Theory, Tolerance::AtMost);
        }
    }
    rep.tables.push(table);

    rep.section("perimeter-ordering", "perimeter ordering via mollification");
    let unit = 2.0 * g.max_spacing();
    let widths: Vec<f64> = p.mollifier_widths.iter().map(|w| w * unit).collect();
    let mut table = Table::new("mollification", &["set", "s", "width", "value", "unmollified", "star_bound"]);
    for (label, m) in &sets {
        for &s in &p.powers {
            let r = perimeter_via_mollification(sd, m, s, &widths, quad)?;
            for (w, v) in r.widths.iter().zip(&r.values) {
                table.push(label, &[s, *w, *v, r.unmollified, r.star_bound]);
            }
            let par = format!("set={label};s={s}");
            let top = r.values.iter().cloned().fold(0.0, f64::max);
            rep.push("mollified / unmollified", &*par, top / r.unmollified, 1.0 + 1e-8, Tag::Theory, Tolerance::AtMost);
            rep.push("estimate / star bound", &*par, r.estimate / r.star_bound, 1.0 + 1e-6, Tag::Theory, Tolerance::AtMost);
            rep.push("monotone as width shrinks", &*par, r.monotone as u8 as f64, 1.0, Tag::Theory, Tolerance::AtLeast);
        }
    }
    rep.tables.push(table);

    rep.section("coarea", "coarea formula");
    let s_mid = p.powers[p.powers.len() / 2];
    let single = coarea_defect(sd, &sets[0].1.as_field(), s_mid, quad)?;
    rep.push("indicator defect", format!("set={};s={s_mid}", sets[0].0), single.defect, 0.0, Tag::Trivial, Tolerance::Abs(0.0));
    let mut stair = vec![0.0; g.len()];
    for ((_, m), h) in sets.iter().zip(&p.staircase_heights) {
        for (v, &b) in stair.iter_mut().zip(&m.indicator) {
            if b {
                *v += h;
            }
        }
    }
    let levels = p.staircase_heights.len().min(sets.len());
    for &s in &p.powers {
        let r = coarea_defect(sd, &stair, s, quad)?;
        rep.push("staircase defect", format!("levels={levels};s={s}"), r.defect, 1e-10, Tag::Theory, Tolerance::AtMost);
    }
    let bump = p.coarea_bump.sample(g);
    for &s in &p.powers {
        let r = coarea_defect_binned(sd, &bump, s, quad, p.coarea_bins)?;
        let par = format!("bins={};s={s}", p.coarea_bins);
        rep.push("binned bump defect", par, r.defect, p.binned_tolerance, Tag::Oracle, Tolerance::AtMost);
    }

    rep.section("small-s-limit", "small-s perimeter limit");
    let h = p.small_s_half_side;
    let unit_box = rasterize_any(&SetSpec::EuclideanBox { center: vec![0.0; g.n_axes()], half_sides: vec![h; g.n_axes()] }, g)?;
    let scan = small_s_limit_scan(sd, &unit_box, &p.small_s, quad)?;
    let mut table = Table::new("small_s", &["set", "s", "s_times_perimeter"]);
    for (s, v) in scan.s.iter().zip(&scan.values) {
        table.push("box", &[*s, *v]);
    }
    rep.tables.push(table);
    let par = format!("half_side={h};s={:?}", p.small_s);
    rep.push("extrapolated s P* vs 2|E|", par, scan.extrapolated, scan.target, Tag::Theory, Tolerance::Rel(p.small_s_tolerance));

    rep.section("half-limit", "s -> 1/2 perimeter bracket");
    let t_res = p.half_resolution * g.max_spacing().powi(2);
    let half = half_limit_bracket(sd, &sets[1.min(sets.len() - 1)].1, &p.half_s, t_res, quad)?;
    let sw = &half.sandwich;
    let low = (0..sw.values.len()).map(|i| sw.values[i] / sw.lower[i]).fold(f64::INFINITY, f64::min);
    let high = (0..sw.values.len()).map(|i| sw.values[i] / sw.upper[i]).fold(0.0, f64::max);
    let par = format!("t_res={t_res:.6e};s={:?}", p.half_s);
    rep.push("min value / lower bound", &*par, low, 1.0 - p.half_slack, Tag::Theory, Tolerance::AtLeast);
    rep.push("max value / upper bound", &*par, high, 1.0 + p.half_slack, Tag::Theory, Tolerance::AtMost);
    Ok(())
}
