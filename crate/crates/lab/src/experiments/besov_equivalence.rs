use anyhow::Result;
use grushin_core::besov::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{band, bumps_or_default, random_smooth, with_points, Lab};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// β of the fractional-semigroup comparison (heat side at 2β, difference side at sβ).
    pub com2_beta: f64,
    pub band_bound: f64,
    pub coarse_points: usize,
    pub refinement_tolerance: f64,
    pub stride: usize,
    pub radii_per_decade: usize,
    pub minmax_pairs: usize,
    pub minmax_beta: f64,
    pub minmax_tolerance: f64,
    pub ls_s: f64,
    pub ls_beta: f64,
    pub ls_band: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            com2_beta: 0.4,
            band_bound: 20.0,
            coarse_points: 48,
            refinement_tolerance: 0.3,
            stride: 1,
            radii_per_decade: 32,
            minmax_pairs: 50,
            minmax_beta: 0.4,
            minmax_tolerance: 1e-10,
            ls_s: 0.25,
            ls_beta: 0.5,
            ls_band: 3.0,
        }
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        exponents(cfg).validate()?;
        if !(p.com2_beta > 0.0 && p.minmax_beta > 0.0 && p.ls_beta > 0.0) {
            return Err(ConfigError::new("params", "betas must be > 0"));
        }
        if p.stride == 0 || p.radii_per_decade < 4 {
            return Err(ConfigError::new("params.stride", "need stride >= 1 and radii_per_decade >= 4"));
        }
        if p.coarse_points < 3 {
            return Err(ConfigError::new("params.coarse_points", "must be >= 3"));
        }
        if !(p.ls_s > 0.0 && p.ls_s < 1.0) || p.ls_beta < 2.0 * p.ls_s {
            return Err(ConfigError::new("params.ls_beta", "need 0 < ls_s < 1 and ls_beta >= 2 ls_s"));
        }
        Ok(p)
    }
}

fn exponents(cfg: &ExperimentConfig) -> BesovParams {
    cfg.exponents.unwrap_or(BesovParams { p: 1.0, q: 1.0, beta: 0.3, s: 0.5 })
}

struct Bands {
    com1: Vec<f64>,
    com2: Vec<f64>,
}

fn bands(cfg: &ExperimentConfig, p: &Params, points: Option<usize>) -> Result<Bands> {
    let spec = match points {
        Some(n) => with_points(&cfg.grid, n),
        None => cfg.grid.clone(),
    };
    let lab = Lab::new(&spec)?;
    let e = exponents(cfg);
    let quad = &cfg.quadrature;
    let balls = BallStructure::eikonal(&lab.grid, p.stride)?;
    let rule = balls.default_rule(p.radii_per_decade);
    let (mut com1, mut com2) = (Vec::new(), Vec::new());
    for b in bumps_or_default(cfg) {
        let u = b.sample(&lab.grid);
        let heat = seminorm_heat(&lab.sd, &u, &BesovParams { beta: 2.0 * e.beta, ..e }, quad, Exterior::Truncated)?;
        let diff = seminorm_difference(&u, &e, &balls, &rule)?;
        com1.push(heat.value / diff.value);
        let sub = seminorm_subordinate(&lab.sd, &u, &BesovParams { beta: 2.0 * p.com2_beta, ..e }, quad, Exterior::Truncated)?;
        let diff2 = seminorm_difference(&u, &BesovParams { beta: e.s * p.com2_beta, ..e }, &balls, &rule)?;
        com2.push(sub.value / diff2.value);
    }
    Ok(Bands { com1, com2 })
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;
    let e = exponents(cfg);
    let fine = bands(cfg, &p, None)?;
    let coarse = bands(cfg, &p, Some(p.coarse_points))?;
    let n_fine = cfg.grid.points[0];

    let mut table = Table::new("equivalence_ratios", &["bump", "com1_fine", "com1_coarse", "com2_fine", "com2_coarse"]);
    for i in 0..fine.com1.len() {
        table.push(&i.to_string(), &[fine.com1[i], coarse.com1[i], fine.com2[i], coarse.com2[i]]);
    }
    rep.tables.push(table);
    for (check, reference, f, c, par) in [
        (
            "besov-equivalence-heat",
            "heat/difference Besov equivalence",
            &fine.com1,
            &coarse.com1,
            format!("p={};q={};heat_beta={};diff_beta={}", e.p, e.q, 2.0 * e.beta, e.beta),
        ),
        (
            "besov-equivalence-fractional",
            "fractional-semigroup Besov equivalence",
            &fine.com2,
            &coarse.com2,
            format!("p={};q={};s={};sub_beta={};diff_beta={}", e.p, e.q, e.s, 2.0 * p.com2_beta, e.s * p.com2_beta),
        ),
    ] {
        rep.section(check, reference);
        let (bf, bc) = (band(f), band(c));
        rep.push("two-sided ratio band", format!("{par};points={n_fine}"), bf, p.band_bound, Tag::Oracle, Tolerance::AtMost);
        rep.push("two-sided ratio band", format!("{par};points={}", p.coarse_points), bc, p.band_bound, Tag::Oracle, Tolerance::AtMost);
        rep.push(
            "band refinement ratio",
            format!("{par};points={}->{n_fine}", p.coarse_points),
            bf / bc,
            1.0,
            Tag::Oracle,
            Tolerance::Rel(p.refinement_tolerance),
        );
    }

    rep.section("min-max", "min-max lemma");
    let lab = Lab::new(&cfg.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..p.minmax_pairs)
        .map(|_| (random_smooth(&lab.grid, &mut rng), random_smooth(&lab.grid, &mut rng)))
        .collect();
    for (pe, qe) in [(1.0, 1.0), (2.0, 2.0), (1.0, f64::INFINITY)] {
        let params = BesovParams::new(pe, qe, p.minmax_beta);
        let mut worst = f64::NEG_INFINITY;
        for (u1, u2) in &pairs {
            let r = minmax_defect(&lab.sd, u1, u2, &params, &cfg.quadrature, Exterior::Truncated)?;
            worst = worst.max(r.defect / r.rhs);
        }
        let par = format!("p={pe};q={qe};beta={};pairs={}", p.minmax_beta, p.minmax_pairs);
        rep.push("max defect / rhs", par, worst, p.minmax_tolerance, Tag::Theory, Tolerance::AtMost);
    }

    rep.section("ls-boundedness", "boundedness of L^s on Besov spaces");
    let params = BesovParams::new(1.0, 1.0, p.ls_beta);
    let ratios: Vec<f64> = bumps_or_default(cfg)
        .iter()
        .map(|b| ls_boundedness_check(&lab.sd, &b.sample(&lab.grid), p.ls_s, &params, &cfg.quadrature))
        .collect::<Result<_, _>>()?;
    let par = format!("p=1;s={};beta={}", p.ls_s, p.ls_beta);
    rep.push("ratio band over family", par, band(&ratios), p.ls_band, Tag::Oracle, Tolerance::AtMost);
    Ok(())
}
