use anyhow::Result;
use grushin_core::functions::Bump;
use grushin_core::quadrature::log_space;
use grushin_core::sobolev::*;
use serde::{Deserialize, Serialize};

use super::{bumps_or_default, with_points, Lab};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub s: f64,
    /// `(α̃, p)` pairs of the HLS scan.
    pub hls_pairs: Vec<[f64; 2]>,
    pub coarse_points: usize,
    pub refinement_tolerance: f64,
    pub refinement_bumps: usize,
    pub dilation_bump: Bump,
    pub dilations: Vec<f64>,
    pub dilation_tolerance: f64,
    pub pointwise_bumps: usize,
    pub pointwise_tolerance: f64,
    pub pointwise_times: [f64; 2],
    pub pointwise_time_count: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            s: 0.5,
            hls_pairs: vec![[0.5, 1.0], [1.0, 1.0], [1.0, 2.0], [2.0, 1.2]],
            coarse_points: 48,
            refinement_tolerance: 0.2,
            refinement_bumps: 3,
            dilation_bump: Bump::new(vec![0.2, 0.1], 0.4),
            dilations: vec![0.7, 1.4],
            dilation_tolerance: 0.05,
            pointwise_bumps: 4,
            pointwise_tolerance: 1e-3,
            pointwise_times: [1e-3, 1e2],
            pointwise_time_count: 41,
        }
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        let q = cfg.grid.hom_dimension();
        if !(p.s > 0.0 && p.s < 1.0) || 2.0 * p.s * 2.0 >= q {
            return Err(ConfigError::new("params.s", "need 0 < s < 1 and 4s < Q so that p = 2 is admissible"));
        }
        for (i, [at, pw]) in p.hls_pairs.iter().enumerate() {
            if !(*at > 0.0 && *at < q && *pw >= 1.0 && *pw < q / at) {
                return Err(ConfigError::new(format!("params.hls_pairs[{i}]"), "need 0 < a < Q and 1 <= p < Q/a"));
            }
        }
        if p.coarse_points < 3 || p.refinement_bumps == 0 || p.pointwise_bumps == 0 {
            return Err(ConfigError::new("params", "need coarse_points >= 3 and nonempty bump counts"));
        }
        if p.dilations.iter().any(|l| !(*l > 0.0)) {
            return Err(ConfigError::new("params.dilations", "must be positive"));
        }
        p.dilation_bump.validate("params.dilation_bump", cfg.grid.n())?;
        if !(p.pointwise_times[0] > 0.0 && p.pointwise_times[1] > p.pointwise_times[0]) || p.pointwise_time_count < 3 {
            return Err(ConfigError::new("params.pointwise_times", "need 0 < t0 < t1 and >= 3 times"));
        }
        Ok(p)
    }
}

/// Family minimum when every ratio is finite, NaN otherwise, so that a
/// `> 0` check also rules out blow-up.
fn finite_min(values: &[f64]) -> f64 {
    if values.iter().all(|v| v.is_finite()) {
        family_stats(values).min
    } else {
        f64::NAN
    }
}

/// The checked value of a Sobolev report: weak at p = 1, strong otherwise.
fn checked(r: &EmbeddingReport) -> f64 {
    if r.p == 1.0 {
        r.weak_ratio
    } else {
        r.ratio
    }
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;
    let lab = Lab::new(&cfg.grid)?;
    let g = &lab.grid;
    let bumps = bumps_or_default(cfg);
    let cases = [(p.s, 2.0), (p.s, 1.0)];

    rep.section("sobolev-embedding", "fractional Sobolev inequality");
    let mut table = Table::new("sobolev_ratios", &["bump", "s", "p", "q", "ratio", "weak_ratio", "weak_ratio_grid"]);
    let mut worst_order: f64 = 0.0;
    for &(s, pw) in &cases {
        let mut values = Vec::new();
        for (i, b) in bumps.iter().enumerate() {
            let r = sobolev_ratio(&lab.sd, &b.sample(g), s, pw)?;
            table.push(&i.to_string(), &[s, pw, r.q, r.ratio, r.weak_ratio, r.weak_ratio_grid]);
            worst_order = worst_order.max(r.weak_ratio / r.ratio);
            values.push(checked(&r));
        }
        let kind = if pw == 1.0 { "weak" } else { "strong" };
        let par = format!("s={s};p={pw};bumps={}", bumps.len());
        rep.push(format!("min {kind} ratio, all finite"), par, finite_min(&values), 0.0, Tag::Theory, Tolerance::Above);
    }
    rep.push("max weak / strong", format!("s={}", p.s), worst_order, 1.0 + 1e-12, Tag::Trivial, Tolerance::AtMost);
    rep.tables.push(table);

    rep.section("sobolev-refinement", "fractional Sobolev inequality");
    let coarse = Lab::new(&with_points(&cfg.grid, p.coarse_points))?;
    for &(s, pw) in &cases {
        for (i, b) in bumps.iter().take(p.refinement_bumps).enumerate() {
            let a = sobolev_ratio(&coarse.sd, &b.sample(&coarse.grid), s, pw)?;
            let f = sobolev_ratio(&lab.sd, &b.sample(g), s, pw)?;
            let par = format!("bump={i};s={s};p={pw};points={}->{}", p.coarse_points, cfg.grid.points[0]);
            rep.push("fine / coarse ratio", par, checked(&f) / checked(&a), 1.0, Tag::Oracle, Tolerance::Rel(p.refinement_tolerance));
        }
    }

    rep.section("sobolev-dilation", "dilation invariance of the Sobolev ratio");
    let m = cfg.grid.m;
    let alpha = cfg.grid.alpha;
    let u1 = p.dilation_bump.sample(g);
    for &lambda in &p.dilations {
        let dl = Lab::new(&cfg.grid.dilated(lambda))?;
        let u2 = p.dilation_bump.dilated(lambda, m, alpha).sample(&dl.grid);
        for &(s, pw) in &cases {
            let a = sobolev_ratio(&lab.sd, &u1, s, pw)?.ratio;
            let b = sobolev_ratio(&dl.sd, &u2, s, pw)?.ratio;
            let par = format!("lambda={lambda};s={s};p={pw}");
            rep.push("ratio at lambda / ratio at 1", par, b / a, 1.0, Tag::Theory, Tolerance::Rel(p.dilation_tolerance));
        }
    }

    rep.section("hls", "Hardy-Littlewood-Sobolev inequality");
    let mut table = Table::new("hls_ratios", &["bump", "alpha_tilde", "p", "q", "ratio", "weak_ratio"]);
    for &[at, pw] in &p.hls_pairs {
        let mut worst: f64 = 0.0;
        let mut values = Vec::new();
        for (i, b) in bumps.iter().enumerate() {
            let r = hls_ratio(&lab.sd, &b.sample(g), at, pw)?;
            table.push(&i.to_string(), &[at, pw, r.q, r.ratio, r.weak_ratio]);
            worst = worst.max(r.weak_ratio / r.ratio);
            values.push(r.ratio);
        }
        let par = format!("alpha_tilde={at};p={pw}");
        rep.push("min strong ratio, all finite", &*par, finite_min(&values), 0.0, Tag::Theory, Tolerance::Above);
        rep.push("max weak / strong", &*par, worst, 1.0 + 1e-12, Tag::Trivial, Tolerance::AtMost);
    }
    rep.tables.push(table);

    rep.section("pointwise-bound", "pointwise Hedberg bound");
    let eps = default_epsilon_grid(cfg.grid.half_width[0]);
    let ts = log_space(p.pointwise_times[0], p.pointwise_times[1], p.pointwise_time_count);
    for &[at, pw] in &p.hls_pairs {
        let mut worst: f64 = 0.0;
        for b in bumps.iter().take(p.pointwise_bumps) {
            worst = worst.max(pointwise_bound_defect(&lab.sd, &b.sample(g), at, pw, &eps, &ts)?.defect);
        }
        let par = format!("alpha_tilde={at};p={pw};bumps={}", p.pointwise_bumps);
        rep.push("max defect", par, worst, p.pointwise_tolerance, Tag::Theory, Tolerance::AtMost);
    }
    Ok(())
}
