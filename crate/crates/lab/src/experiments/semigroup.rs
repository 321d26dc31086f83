use anyhow::Result;
use grushin_core::operator::{fractional_power_balakrishnan, fractional_power_spectral, riesz_potential};
use grushin_core::quadrature::{log_space, LogRule};
use grushin_core::semigroup::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bumps_or_default, max_abs, max_abs_diff, random_smooth, Lab};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub times: Vec<f64>,
    pub powers: Vec<f64>,
    pub random_functions: usize,
    pub algebra_tolerance: f64,
    pub sc_margins: Vec<f64>,
    pub sc_times: Vec<f64>,
    /// Bound on the margin-1 defect at each of `sc_times`.
    pub sc_bounds: Vec<f64>,
    pub balakrishnan_nodes: usize,
    pub balakrishnan_window: [f64; 2],
    pub poisson_times: Vec<f64>,
    pub ledoux_powers: Vec<f64>,
    pub ledoux_times: Vec<f64>,
    pub sigma_window: [f64; 2],
    pub sigma_count: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            times: vec![0.01, 0.1, 1.0],
            powers: vec![0.25, 0.5, 0.75],
            random_functions: 3,
            algebra_tolerance: 1e-8,
            sc_margins: vec![1.0, 1.1, 1.2, 1.3],
            sc_times: vec![0.01, 0.1],
            sc_bounds: vec![1e-3, 5e-2],
            balakrishnan_nodes: 200,
            balakrishnan_window: [1e-6, 1e3],
            poisson_times: vec![0.1, 0.5, 2.0],
            ledoux_powers: vec![0.2, 0.4],
            ledoux_times: vec![0.01, 0.1, 1.0],
            sigma_window: [1e-6, 1.0],
            sigma_count: 40,
        }
    }
}

fn in_open_unit(v: &[f64], key: &str) -> Result<(), ConfigError> {
    match v.iter().position(|s| !(*s > 0.0 && *s < 1.0)) {
        Some(i) => Err(ConfigError::new(format!("params.{key}[{i}]"), "must lie in (0, 1)")),
        None => Ok(()),
    }
}

fn positive(v: &[f64], key: &str) -> Result<(), ConfigError> {
    match v.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
        Some(i) => Err(ConfigError::new(format!("params.{key}[{i}]"), "must be > 0")),
        None => Ok(()),
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        if p.random_functions == 0 {
            return Err(ConfigError::new("params.random_functions", "must be >= 1"));
        }
        positive(&p.times, "times")?;
        positive(&p.sc_times, "sc_times")?;
        positive(&p.poisson_times, "poisson_times")?;
        positive(&p.ledoux_times, "ledoux_times")?;
        in_open_unit(&p.powers, "powers")?;
        in_open_unit(&p.ledoux_powers, "ledoux_powers")?;
        positive(&p.sc_margins, "sc_margins")?;
        if p.sc_margins.is_empty() {
            return Err(ConfigError::new("params.sc_margins", "must be nonempty"));
        }
        if p.sc_bounds.len() != p.sc_times.len() {
            return Err(ConfigError::new("params.sc_bounds", "needs one bound per entry of sc_times"));
        }
        if p.sc_margins.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::new("params.sc_margins", "must be increasing"));
        }
        let [a, b] = p.balakrishnan_window;
        if !(a > 0.0 && b > a) || p.balakrishnan_nodes < 8 {
            return Err(ConfigError::new("params.balakrishnan_window", "need 0 < t_min < t_max and >= 8 nodes"));
        }
        let [a, b] = p.sigma_window;
        if !(a > 0.0 && b > a) || p.sigma_count < 2 {
            return Err(ConfigError::new("params.sigma_window", "need 0 < min < max and >= 2 nodes"));
        }
        Ok(p)
    }
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;
    let lab = Lab::new(&cfg.grid)?;
    let (g, sd) = (&lab.grid, &lab.sd);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let funcs: Vec<Vec<f64>> = (0..p.random_functions).map(|_| random_smooth(g, &mut rng)).collect();
    let tol = p.algebra_tolerance;

    rep.section("semigroup-algebra", "heat semigroup properties and Riesz inversion");
    let mut law: f64 = 0.0;
    let mut adj: f64 = 0.0;
    let mut pos: f64 = 0.0;
    let mut contraction = [0.0f64; 3];
    for (k, u) in funcs.iter().enumerate() {
        let v = &funcs[(k + 1) % funcs.len()];
        let nu = max_abs(u);
        let abs_u: Vec<f64> = u.iter().map(|x| x.abs()).collect();
        for &t1 in &p.times {
            let pu = heat_apply(sd, t1, u);
            for &t2 in &p.times {
                let twice = heat_apply(sd, t2, &pu);
                law = law.max(max_abs_diff(&twice, &heat_apply(sd, t1 + t2, u)) / nu);
            }
            let a = g.inner(&pu, v);
            let b = g.inner(u, &heat_apply(sd, t1, v));
            adj = adj.max((a - b).abs() / (g.lp_norm(u, 2.0) * g.lp_norm(v, 2.0)));
            let pa = heat_apply(sd, t1, &abs_u);
            pos = pos.max(pa.iter().fold(0.0f64, |m, x| m.max(-x)) / max_abs(&abs_u));
            for (i, q) in [1.0, 2.0, f64::INFINITY].into_iter().enumerate() {
                contraction[i] = contraction[i].max(g.lp_norm(&pu, q) / g.lp_norm(u, q) - 1.0);
            }
        }
    }
    let n = funcs.len();
    rep.push("semigroup law defect", format!("functions={n}"), law, tol, Tag::Theory, Tolerance::AtMost);
    rep.push("self-adjointness defect", format!("functions={n}"), adj, tol, Tag::Theory, Tolerance::AtMost);
    rep.push("positivity defect", format!("functions={n}"), pos, tol, Tag::Theory, Tolerance::AtMost);
    for (i, q) in ["1", "2", "inf"].iter().enumerate() {
        rep.push("contraction excess", format!("p={q}"), contraction[i].max(0.0), tol, Tag::Theory, Tolerance::AtMost);
    }
    for &s in &p.powers {
        let (mut comm, mut inv_a, mut inv_b) = (0.0f64, 0.0f64, 0.0f64);
        for u in &funcs {
            for &t in &p.times {
                let x = fractional_power_spectral(sd, s, &heat_apply(sd, t, u))?;
                let y = heat_apply(sd, t, &fractional_power_spectral(sd, s, u)?);
                comm = comm.max(max_abs_diff(&x, &y) / max_abs(&x));
            }
            let nu = max_abs(u);
            let a = riesz_potential(sd, 2.0 * s, &fractional_power_spectral(sd, s, u)?)?;
            let b = fractional_power_spectral(sd, s, &riesz_potential(sd, 2.0 * s, u)?)?;
            inv_a = inv_a.max(max_abs_diff(&a, u) / nu);
            inv_b = inv_b.max(max_abs_diff(&b, u) / nu);
        }
        let par = format!("s={s}");
        rep.push("commutation defect", &*par, comm, tol, Tag::Theory, Tolerance::AtMost);
        rep.push("potential after power defect", &*par, inv_a, tol, Tag::Theory, Tolerance::AtMost);
        rep.push("power after potential defect", &*par, inv_b, tol, Tag::Theory, Tolerance::AtMost);
    }

    rep.section("stochastic-completeness", "conservation of mass away from the boundary");
    let mut table = Table::new("stochastic_completeness", &["t", "margin", "defect"]);
    for (&t, &bound) in p.sc_times.iter().zip(&p.sc_bounds) {
        let d: Vec<f64> = p
            .sc_margins
            .iter()
            .map(|&m| stochastic_completeness_defect(sd, t, m))
            .collect::<Result<_, _>>()?;
        for (m, v) in p.sc_margins.iter().zip(&d) {
            table.push(&format!("{t}"), &[*m, *v]);
        }
        let par = format!("t={t};margin={}", p.sc_margins[0]);
        rep.push("interior defect", par, d[0], bound, Tag::Oracle, Tolerance::AtMost);
        let growth = d.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        rep.push("defect growth under wider margin", format!("t={t}"), growth, 0.0, Tag::Trivial, Tolerance::AtMost);
    }
    rep.tables.push(table);

    rep.section("balakrishnan", "Balakrishnan formula for fractional powers");
    let [a, b] = p.balakrishnan_window;
    let rule = LogRule::new(a, b, p.balakrishnan_nodes);
    let bump = bumps_or_default(cfg)[0].sample(g);
    for &s in &p.powers {
        let mut worst: f64 = 0.0;
        for u in [&bump, &funcs[0]] {
            let exact = fractional_power_spectral(sd, s, u)?;
            let quad = fractional_power_balakrishnan(&lab.op, sd, s, u, &rule, 1e-3)?;
            if let Some(w) = quad.warning {
                rep.warn(format!("balakrishnan s={s}: {w}"));
            }
            let diff: Vec<f64> = exact.iter().zip(&quad.value).map(|(x, y)| x - y).collect();
            worst = worst.max(g.lp_norm(&diff, 2.0) / g.lp_norm(&exact, 2.0));
        }
        let par = format!("s={s};nodes={};window=[{a:e},{b:e}]", p.balakrishnan_nodes);
        rep.push("relative L2 mismatch vs spectral", par, worst, 1e-3, Tag::Oracle, Tolerance::AtMost);
    }

    rep.section("subordination", "Poisson subordination at s = 1/2");
    let poisson = SubordinatorSpec::poisson();
    let mass_rule = poisson.sigma_quadrature.rule();
    for &t in &p.poisson_times {
        let exact = subordinate_apply(sd, &SubordinatorSpec::spectral(0.5), t, &bump)?;
        let quad = subordinate_apply(sd, &poisson, t, &bump)?;
        let diff: Vec<f64> = exact.value.iter().zip(&quad.value).map(|(x, y)| x - y).collect();
        let rel = g.lp_norm(&diff, 2.0) / g.lp_norm(&exact.value, 2.0);
        rep.push("poisson vs spectral relative L2", format!("t={t}"), rel, 1e-4, Tag::Oracle, Tolerance::AtMost);
        let mass = poisson_total_mass(t, &mass_rule);
        rep.push("subordinator total mass", format!("t={t}"), mass, 1.0, Tag::Theory, Tolerance::Abs(1e-8));
    }

    rep.section("ledoux", "Ledoux estimate and monotonicity in sigma");
    let sigma = log_space(p.sigma_window[0], p.sigma_window[1], p.sigma_count);
    let bumps: Vec<Vec<f64>> = bumps_or_default(cfg).iter().map(|b| b.sample(g)).collect();
    for &s in &p.ledoux_powers {
        for &t in &p.ledoux_times {
            let (mut defect, mut viol) = (f64::INFINITY, 0.0f64);
            for u in &bumps {
                let r = ledoux_defect(sd, s, t, u, &sigma)?;
                defect = defect.min(r.defect);
                viol = viol.max(r.monotonicity_violation);
            }
            let par = format!("s={s};t={t};bumps={}", bumps.len());
            rep.push("min defect", &*par, defect, -1e-8, Tag::Theory, Tolerance::AtLeast);
            rep.push("sigma monotonicity violation", &*par, viol, 1e-12, Tag::Theory, Tolerance::AtMost);
        }
    }
    Ok(())
}
