use anyhow::Result;
use grushin_core::besov::*;
use grushin_core::functions::Bump;
use grushin_core::quadrature::TailPolicy;
use serde::{Deserialize, Serialize};

use super::Lab;
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub ms_betas: Vec<f64>,
    pub ms_powers: Vec<f64>,
    pub ms_tolerance: f64,
    pub bbm_betas: Vec<f64>,
    pub bbm_power: f64,
    /// `t_res` in units of the squared mesh width.
    pub bbm_resolution: f64,
    pub bbm_slack: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            ms_betas: vec![0.4, 0.2, 0.1, 0.05],
            ms_powers: vec![1.0, 2.0],
            ms_tolerance: 0.1,
            bbm_betas: vec![0.6, 0.8, 0.9, 0.95, 0.98],
            bbm_power: 1.0,
            bbm_resolution: 1.0,
            bbm_slack: 0.05,
        }
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        if p.ms_betas.len() < 2 || p.ms_betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(ConfigError::new("params.ms_betas", "need >= 2 values in (0, 1)"));
        }
        if let Some(i) = p.ms_powers.iter().position(|q| !(*q >= 1.0 && q.is_finite())) {
            return Err(ConfigError::new(format!("params.ms_powers[{i}]"), "must lie in [1, inf)"));
        }
        if let Some(i) = p.bbm_betas.iter().position(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(ConfigError::new(format!("params.bbm_betas[{i}]"), "must lie in (0, 1)"));
        }
        if !(p.bbm_power >= 1.0) || !(p.bbm_resolution > 0.0) {
            return Err(ConfigError::new("params.bbm_resolution", "need bbm_power >= 1 and bbm_resolution > 0"));
        }
        if cfg.quadrature.tail_policy == TailPolicy::Drop {
            return Err(ConfigError::new("quadrature.tail_policy", "the beta -> 0 scan needs the analytic tail"));
        }
        if cfg.bumps().len() > 1 {
            return Err(ConfigError::new("family", "besov-limits takes at most one bump"));
        }
        Ok(p)
    }
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;
    let lab = Lab::new(&cfg.grid)?;
    let bump = cfg.bumps().pop().unwrap_or_else(|| Bump::new(vec![0.0; lab.grid.n_axes()], 0.4));
    let u = bump.sample(&lab.grid);

    rep.section("ms-limit", "Maz'ya-Shaposhnikova limit");
    let mut table = Table::new("ms_scan", &["p", "beta", "beta_times_seminorm_p", "head_contribution"]);
    for &pw in &p.ms_powers {
        let scan = ms_limit_scan(&lab.sd, &u, pw, &p.ms_betas, &cfg.quadrature)?;
        for i in 0..scan.betas.len() {
            table.push(&pw.to_string(), &[scan.betas[i], scan.values[i], scan.head_contributions[i]]);
        }
        let par = format!("p={pw};betas={:?}", p.ms_betas);
        rep.push("extrapolated beta N^p vs (4/p)||u||_p^p", par, scan.extrapolated, scan.target, Tag::Theory, Tolerance::Rel(p.ms_tolerance));
    }
    rep.tables.push(table);

    rep.section("bbm-bracket", "Bourgain-Brezis-Mironescu bracket");
    let h2 = lab.grid.max_spacing().powi(2);
    let t_res = p.bbm_resolution * h2;
    let prof = EnergyProfile::new(&lab.sd, &u, p.bbm_power, Exterior::Truncated, Flow::Heat);
    let r = bbm_bracket(&prof, &p.bbm_betas, t_res, &cfg.quadrature)?;
    let mut table = Table::new("bbm_bracket", &["index", "beta", "one_minus_beta_times_seminorm_p", "lower", "upper"]);
    let (mut low, mut high) = (f64::INFINITY, 0.0f64);
    for i in 0..r.betas.len() {
        table.push(&i.to_string(), &[r.betas[i], r.values[i], r.lower[i], r.upper[i]]);
        low = low.min(r.values[i] / r.lower[i]);
        high = high.max(r.values[i] / r.upper[i]);
    }
    rep.tables.push(table);
    let par = format!("p={};t_res={t_res:.6e};betas={:?}", p.bbm_power, p.bbm_betas);
    rep.push("min value / lower bound", &*par, low, 1.0 - p.bbm_slack, Tag::Theory, Tolerance::AtLeast);
    rep.push("max value / upper bound", &*par, high, 1.0 + p.bbm_slack, Tag::Theory, Tolerance::AtMost);
    Ok(())
}
