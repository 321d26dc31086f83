//! Fractional perimeters of grid sets: the heat-defect perimeter `P*_s`,
//! the `||L^s 1_E||_1` route, the sup form, coarea, isoperimetric ratios and
//! the two limiting regimes in s.
//!
//! For an indicator and `p = 1`, the energy with the killed exterior is the
//! L¹ semigroup defect `D(t) = ||e^{-tL}1_E - 1_E||_1`, so every perimeter
//! here is an integral or a sup of `D`.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::besov::{
    seminorm_from_samples, small_time_sandwich, BbmReport, EnergyProfile, Exterior, Flow, HeadModel,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, SetMask, SetSpec};
use crate::operator::SpectralData;
use crate::quadrature::{extrapolate_to_zero, LogRule, QuadratureSpec, TailPolicy};

/// How `D(t)` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DefectRoute {
    /// One semigroup application per time node.
    #[default]
    HeatApply,
    /// Through the p = 1 energy profile with the killed exterior.
    Spectral,
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::config("s", "perimeters need s in (0, 1/2)"));
    }
    Ok(())
}

/// Warning text when the set comes within two cells of the box boundary.
pub fn truncation_warning(grid: &Grid, set: &SetMask) -> Option<String> {
    let margin = 2.0 * grid.max_spacing();
    let close = set
        .indicator
        .iter()
        .enumerate()
        .any(|(g, &b)| b && grid.boundary_distance(g) < margin);
    close.then(|| "set reaches within two cells of the box boundary; truncation affects the result".to_string())
}

/// `D(t)` on each time in `ts`.
pub fn indicator_defects(spec: &SpectralData, set: &SetMask, ts: &[f64], route: DefectRoute) -> Vec<f64> {
    let u = set.as_field();
    match route {
        DefectRoute::HeatApply => {
            let cv = spec.grid().cell_volume();
            let c = spec.coefficients(&u);
            ts.iter()
                .map(|&t| {
                    let h = spec.apply_fn_coeffs(&c, |l| (-t * l).exp());
                    h.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum::<f64>() * cv
                })
                .collect()
        }
        DefectRoute::Spectral => EnergyProfile::new(spec, &u, 1.0, Exterior::Killed, Flow::Heat).eval_many(ts),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PerimeterStar {
    pub value: f64,
    pub head: f64,
    pub body: f64,
    pub tail: f64,
    pub warning: Option<String>,
}

/// `∫ t^{-s} D(t) dt/t` over a quadrature rule, from sampled `D`.
/// Below `t_min`, `D` is continued linearly in t; beyond `t_max` it is held
/// at its last value.
pub fn star_from_defects(rule: &LogRule, d: &[f64], s: f64, tail: TailPolicy, measure: f64) -> PerimeterStar {
    let r = seminorm_from_samples(rule, d, 1.0, 2.0 * s, 1.0, tail, HeadModel::PowerLaw(1.0), measure);
    PerimeterStar {
        value: r.head + r.body + r.tail,
        head: r.head,
        body: r.body,
        tail: r.tail,
        warning: None,
    }
}

/// `P*_s(E) = N^{L,2s}_{1,1}(1_E)`.
pub fn perimeter_star(spec: &SpectralData, set: &SetMask, s: f64, quad: &QuadratureSpec) -> Result<PerimeterStar> {
    perimeter_star_with(spec, set, s, quad, DefectRoute::HeatApply)
}

pub fn perimeter_star_with(
    spec: &SpectralData,
    set: &SetMask,
    s: f64,
    quad: &QuadratureSpec,
    route: DefectRoute,
) -> Result<PerimeterStar> {
    check_s(s)?;
    quad.validate()?;
    if set.count() == 0 {
        return Ok(PerimeterStar {
            value: 0.0,
            head: 0.0,
            body: 0.0,
            tail: 0.0,
            warning: None,
        });
    }
    let rule = quad.rule();
    let d = indicator_defects(spec, set, &rule.nodes, route);
    let mut out = star_from_defects(&rule, &d, s, quad.tail_policy, set.measure);
    out.warning = truncation_warning(spec.grid(), set);
    Ok(out)
}

/// `L^s u = (s/Γ(1-s)) ∫ t^{-s}(u - e^{-tL}u) dt/t` on the nodes of `rule`,
/// with the same head and tail continuation as [`star_from_defects`]: the
/// head uses the secant `(u - e^{-t_min L}u)/t_min` in place of `Lu`, the
/// tail holds the integrand's last value.
pub fn fractional_power_shared(spec: &SpectralData, s: f64, u: &[f64], quad: &QuadratureSpec) -> Vec<f64> {
    let rule = quad.rule();
    let c = spec.coefficients(u);
    let n = u.len();
    let mut acc = vec![0.0; n];
    let last = rule.len() - 1;
    for (i, (&t, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let h = spec.apply_fn_coeffs(&c, |l| (-t * l).exp());
        let mut f = w;
        if i == 0 {
            f += 1.0 / (1.0 - s);
        }
        if i == last && quad.tail_policy == TailPolicy::AnalyticBound {
            f += 1.0 / s;
        }
        let scale = f * t.powf(-s);
        for k in 0..n {
            acc[k] += scale * (u[k] - h[k]);
        }
    }
    let pref = s / gamma(1.0 - s);
    acc.iter().map(|v| pref * v).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    /// `(s/Γ(1-s)) P*_s(E)`.
    pub lhs: f64,
    /// `||L^s 1_E||_1` by the Balakrishnan integral on the same rule.
    pub shared: f64,
    /// `||L^s 1_E||_1` from the spectral decomposition.
    pub spectral: f64,
    pub rel_shared: f64,
    pub rel_spectral: f64,
}

/// Compares both sides of `(s/Γ(1-s)) P*_s(E) = ||L^s 1_E||_1`.
pub fn perimeter_identity(spec: &SpectralData, set: &SetMask, s: f64, quad: &QuadratureSpec) -> Result<IdentityCheck> {
    let star = perimeter_star(spec, set, s, quad)?;
    let u = set.as_field();
    let grid = spec.grid();
    let lhs = s / gamma(1.0 - s) * star.value;
    let shared = grid.lp_norm(&fractional_power_shared(spec, s, &u, quad), 1.0);
    let spectral = grid.lp_norm(&spec.apply_fn(&u, |l| l.powf(s)), 1.0);
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() };
    Ok(IdentityCheck {
        lhs,
        shared,
        spectral,
        rel_shared: rel(lhs, shared),
        rel_spectral: rel(lhs, spectral),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MollificationReport {
    pub widths: Vec<f64>,
    /// `||L^s e^{-w² L} 1_E||_1` per width.
    pub values: Vec<f64>,
    /// `||L^s 1_E||_1`.
    pub unmollified: f64,
    /// Last value: the upper estimate of `P^L_s(E)`.
    pub estimate: f64,
    /// `(s/Γ(1-s)) P*_s(E)`.
    pub star_bound: f64,
    /// Values increase as the width shrinks.
    pub monotone: bool,
}

/// Heat mollification `u_w = e^{-w² L} 1_E` at each width (descending) and
/// `||L^s u_w||_1`.
pub fn perimeter_via_mollification(
    spec: &SpectralData,
    set: &SetMask,
    s: f64,
    widths: &[f64],
    quad: &QuadratureSpec,
) -> Result<MollificationReport> {
    check_s(s)?;
    let grid = spec.grid();
    let floor = 2.0 * grid.max_spacing();
    if let Some(k) = widths.iter().position(|w| *w < floor) {
        return Err(Error::config(
            format!("mollify_widths[{k}]"),
            format!("width must resolve to at least 2 cells ({floor:.4})"),
        ));
    }
    if widths.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("mollify_widths", "must be strictly descending"));
    }
    let u = set.as_field();
    let c = spec.coefficients(&u);
    let values: Vec<f64> = widths
        .iter()
        .map(|w| {
            let t = w * w;
            grid.lp_norm(&spec.apply_fn_coeffs(&c, |l| l.powf(s) * (-t * l).exp()), 1.0)
        })
        .collect();
    let unmollified = grid.lp_norm(&spec.apply_fn_coeffs(&c, |l| l.powf(s)), 1.0);
    let star = perimeter_star(spec, set, s, quad)?;
    Ok(MollificationReport {
        monotone: values.windows(2).all(|v| v[1] >= v[0] * (1.0 - 1e-12)),
        estimate: *values.last().unwrap_or(&0.0),
        widths: widths.to_vec(),
        values,
        unmollified,
        star_bound: s / gamma(1.0 - s) * star.value,
    })
}

/// `P_{s,∞}(E) = sup_t t^{-s} D(t)` over `t_grid`.
pub fn perimeter_infty(spec: &SpectralData, set: &SetMask, s: f64, t_grid: &[f64]) -> Result<f64> {
    check_s(s)?;
    if set.count() == 0 {
        return Ok(0.0);
    }
    let d = indicator_defects(spec, set, t_grid, DefectRoute::HeatApply);
    Ok(t_grid
        .iter()
        .zip(&d)
        .map(|(t, v)| t.powf(-s) * v)
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct PerimeterResult {
    pub set: SetSpec,
    pub s: f64,
    pub measure: f64,
    pub p_star: f64,
    pub p_ls: f64,
    pub p_inf: f64,
    pub warning: Option<String>,
}

pub fn perimeters(
    spec: &SpectralData,
    set_spec: &SetSpec,
    set: &SetMask,
    s: f64,
    quad: &QuadratureSpec,
    t_grid: &[f64],
) -> Result<PerimeterResult> {
    let star = perimeter_star(spec, set, s, quad)?;
    let u = set.as_field();
    Ok(PerimeterResult {
        set: set_spec.clone(),
        s,
        measure: set.measure,
        p_star: star.value,
        p_ls: spec.grid().lp_norm(&spec.apply_fn(&u, |l| l.powf(s)), 1.0),
        p_inf: perimeter_infty(spec, set, s, t_grid)?,
        warning: star.warning,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoareaReport {
    /// `N^{L,2s}_{1,1}(u)`.
    pub seminorm: f64,
    /// `Σ gap · P*_s({u > σ})`.
    pub level_sum: f64,
    pub defect: f64,
    pub levels: usize,
}

fn nonnegative(u: &[f64]) -> Result<()> {
    if u.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::config("u", "coarea needs a finite nonnegative function"));
    }
    Ok(())
}

fn coarea_from_levels(
    spec: &SpectralData,
    u: &[f64],
    s: f64,
    quad: &QuadratureSpec,
    levels: &[(f64, f64)],
) -> Result<CoareaReport> {
    check_s(s)?;
    quad.validate()?;
    let rule = quad.rule();
    let grid = spec.grid();
    let cv = grid.cell_volume();
    let star = |d: &[f64], m: f64| star_from_defects(&rule, d, s, quad.tail_policy, m).value;
    let up = EnergyProfile::new(spec, u, 1.0, Exterior::Killed, Flow::Heat);
    let seminorm = star(&up.eval_many(&rule.nodes), up.norm_p);
    let mut level_sum = 0.0;
    for &(sigma, gap) in levels {
        let set = SetMask::from_indicator(u.iter().map(|v| *v > sigma).collect(), cv);
        if set.count() == 0 {
            continue;
        }
        let d = indicator_defects(spec, &set, &rule.nodes, DefectRoute::Spectral);
        level_sum += gap * star(&d, set.measure);
    }
    let defect = if seminorm == 0.0 {
        level_sum.abs()
    } else {
        (seminorm - level_sum).abs() / seminorm
    };
    Ok(CoareaReport {
        seminorm,
        level_sum,
        defect,
        levels: levels.len(),
    })
}

/// Coarea defect with the exact level sum over the distinct values of `u`.
pub fn coarea_defect(spec: &SpectralData, u: &[f64], s: f64, quad: &QuadratureSpec) -> Result<CoareaReport> {
    nonnegative(u)?;
    let mut vals: Vec<f64> = u.to_vec();
    vals.push(0.0);
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let levels: Vec<(f64, f64)> = vals.windows(2).map(|w| (w[0], w[1] - w[0])).collect();
    coarea_from_levels(spec, u, s, quad, &levels)
}

/// Coarea defect with `bins` equal-width levels (midpoint rule in σ).
pub fn coarea_defect_binned(
    spec: &SpectralData,
    u: &[f64],
    s: f64,
    quad: &QuadratureSpec,
    bins: usize,
) -> Result<CoareaReport> {
    nonnegative(u)?;
    if bins == 0 {
        return Err(Error::config("bins", "must be positive"));
    }
    let top = u.iter().cloned().fold(0.0, f64::max);
    let gap = top / bins as f64;
    let levels: Vec<(f64, f64)> = (0..bins).map(|k| ((k as f64 + 0.5) * gap, gap)).collect();
    coarea_from_levels(spec, u, s, quad, &levels)
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoRow {
    pub label: String,
    pub measure: f64,
    pub p_star: f64,
    pub p_ls: f64,
    pub p_inf: f64,
    pub ratio_star: f64,
    pub ratio_ls: f64,
    pub ratio_inf: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoScan {
    pub s: f64,
    pub exponent: f64,
    pub rows: Vec<IsoRow>,
    pub min_star: f64,
    pub min_ls: f64,
    pub min_inf: f64,
}

/// Ratios `P(E) / |E|^{(Q-2s)/Q}` for the three perimeters over a family.
pub fn isoperimetric_scan(
    spec: &SpectralData,
    family: &[(String, SetMask)],
    s: f64,
    quad: &QuadratureSpec,
    t_grid: &[f64],
) -> Result<IsoScan> {
    check_s(s)?;
    let q = spec.grid().hom_dimension();
    let exponent = (q - 2.0 * s) / q;
    let mut rows = Vec::with_capacity(family.len());
    for (label, set) in family {
        if set.count() == 0 {
            return Err(Error::config(format!("sets.{label}"), "set is empty on this grid"));
        }
        let star = perimeter_star(spec, set, s, quad)?.value;
        let u = set.as_field();
        let p_ls = spec.grid().lp_norm(&spec.apply_fn(&u, |l| l.powf(s)), 1.0);
        let p_inf = perimeter_infty(spec, set, s, t_grid)?;
        let d = set.measure.powf(exponent);
        rows.push(IsoRow {
            label: label.clone(),
            measure: set.measure,
            p_star: star,
            p_ls,
            p_inf,
            ratio_star: star / d,
            ratio_ls: p_ls / d,
            ratio_inf: p_inf / d,
        });
    }
    let min = |f: fn(&IsoRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(IsoScan {
        s,
        exponent,
        min_star: min(|r| r.ratio_star),
        min_ls: min(|r| r.ratio_ls),
        min_inf: min(|r| r.ratio_inf),
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SobolevRoute {
    /// `||u||_{Q/(Q-2s)}`.
    pub norm: f64,
    /// `C_emp^{-1} N^{L,2s}_{1,1}(u)`.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `||u||_{Q/(Q-2s)} <= C_emp^{-1} N^{L,2s}_{1,1}(u)` for the staircase
/// `u = Σ 1_{E_k}` over nested sets.
pub fn sobolev_route_check(
    spec: &SpectralData,
    nested: &[&SetMask],
    s: f64,
    quad: &QuadratureSpec,
    c_emp: f64,
) -> Result<SobolevRoute> {
    check_s(s)?;
    let grid = spec.grid();
    let mut u = vec![0.0; grid.len()];
    for set in nested {
        for (v, &b) in u.iter_mut().zip(&set.indicator) {
            if b {
                *v += 1.0;
            }
        }
    }
    let q = grid.hom_dimension();
    let norm = grid.lp_norm(&u, q / (q - 2.0 * s));
    let rule = quad.rule();
    let prof = EnergyProfile::new(spec, &u, 1.0, Exterior::Killed, Flow::Heat);
    let n = star_from_defects(&rule, &prof.eval_many(&rule.nodes), s, quad.tail_policy, prof.norm_p).value;
    let bound = n / c_emp;
    Ok(SobolevRoute {
        norm,
        bound,
        holds: norm <= bound * (1.0 + 1e-10),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallSScan {
    pub s: Vec<f64>,
    /// `s · P*_s(E)` with the zero-extended exterior.
    pub values: Vec<f64>,
    pub extrapolated: f64,
    pub target: f64,
}

/// `s P*_s(E)` along a descending s grid, extrapolated to s = 0.
///
/// The limit is carried by `t -> ∞`, where the killed defect tends to `|E|`
/// only; the zero-extended exterior, whose energy tends to `2|E|`, is the
/// whole-space quantity.
pub fn small_s_limit_scan(spec: &SpectralData, set: &SetMask, s_grid: &[f64], quad: &QuadratureSpec) -> Result<SmallSScan> {
    quad.validate()?;
    if quad.tail_policy == TailPolicy::Drop {
        return Err(Error::config("quadrature.tail_policy", "drop is not allowed for the s -> 0 scan"));
    }
    for &s in s_grid {
        check_s(s)?;
    }
    let target = 2.0 * set.measure;
    if set.count() == 0 {
        return Ok(SmallSScan {
            s: s_grid.to_vec(),
            values: vec![0.0; s_grid.len()],
            extrapolated: 0.0,
            target,
        });
    }
    let rule = quad.rule();
    let prof = EnergyProfile::new(spec, &set.as_field(), 1.0, Exterior::ZeroExtended, Flow::Heat);
    let e = prof.eval_many(&rule.nodes);
    let values: Vec<f64> = s_grid
        .iter()
        .map(|&s| s * star_from_defects(&rule, &e, s, quad.tail_policy, set.measure).value)
        .collect();
    Ok(SmallSScan {
        extrapolated: extrapolate_to_zero(s_grid, &values),
        s: s_grid.to_vec(),
        values,
        target,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HalfLimitReport {
    pub s: Vec<f64>,
    /// `(1-2s) P*_s(E)`, with the sandwich bounds per s.
    pub sandwich: BbmReport,
    /// Max over min of `2 t^{-1/2} D(t)` on the bracket decade.
    pub plateau_spread: f64,
}

/// `(1-2s) P*_s(E)` for s ascending to 1/2 against `2 t^{-1/2} D(t)` on
/// `[t_res, 10 t_res]`; below `t_res` the defect follows `√t`.
pub fn half_limit_bracket(
    spec: &SpectralData,
    set: &SetMask,
    s_grid: &[f64],
    t_res: f64,
    quad: &QuadratureSpec,
) -> Result<HalfLimitReport> {
    for &s in s_grid {
        check_s(s)?;
    }
    let u = set.as_field();
    let c = spec.coefficients(&u);
    let cv = spec.grid().cell_volume();
    let d = |t: f64| {
        let h = spec.apply_fn_coeffs(&c, |l| (-t * l).exp());
        h.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum::<f64>() * cv
    };
    let betas: Vec<f64> = s_grid.iter().map(|s| 2.0 * s).collect();
    let sandwich = small_time_sandwich(&d, 1.0, set.measure, &betas, t_res, quad)?;
    let (lo, hi) = sandwich.bracket;
    Ok(HalfLimitReport {
        s: s_grid.to_vec(),
        plateau_spread: if lo > 0.0 { hi / lo } else { 1.0 },
        sandwich,
    })
}
