//! Heat and subordinated semigroups, kernel columns, kernel-bound fits,
//! the radial maximal function and the Ledoux estimate.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::operator::SpectralData;
use crate::quadrature::{linear_fit, log_space, LogRule, QuadratureSpec};

/// `e^{-tL} u`; `t = 0` is the identity.
pub fn heat_apply(spec: &SpectralData, t: f64, u: &[f64]) -> Vec<f64> {
    spec.heat(t, u)
}

/// `e^{-tL} 1`.
pub fn heat_of_one(spec: &SpectralData, t: f64) -> Vec<f64> {
    spec.heat(t, &vec![1.0; spec.grid().len()])
}

/// Max over nodes at distance >= `margin` from the boundary of `|e^{-tL}1 - 1|`.
pub fn stochastic_completeness_defect(spec: &SpectralData, t: f64, margin: f64) -> Result<f64> {
    let grid = spec.grid();
    let mask = grid.interior_mask(margin);
    if !mask.iter().any(|b| *b) {
        return Err(Error::config("margin", "no nodes remain after the margin"));
    }
    let p1 = heat_of_one(spec, t);
    Ok(p1
        .iter()
        .zip(&mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| (v - 1.0).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct HeatKernelColumn {
    pub t: f64,
    pub source: usize,
    /// `K_t(g, source)` per node g.
    pub values: Vec<f64>,
}

/// Column `g -> K_t(g, source) = e^{-tL} δ_source / cell_volume`.
pub fn kernel_column(spec: &SpectralData, t: f64, source: usize) -> HeatKernelColumn {
    let n = spec.grid().len();
    let mut delta = vec![0.0; n];
    delta[source] = 1.0 / spec.grid().cell_volume();
    HeatKernelColumn {
        t,
        source,
        values: spec.heat(t, &delta),
    }
}

/// One sampled kernel value with its distance and the ball volume |B(g, sqrt t)|.
#[derive(Clone, Copy, Debug)]
pub struct KernelSample {
    pub t: f64,
    pub kernel: f64,
    pub distance: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianFit {
    /// Least-squares slope of log(K |B|) against d²/t.
    pub slope: f64,
    pub intercept: f64,
    /// `-slope` of the fit restricted to the lower half of the d²/t range.
    pub c_lower: f64,
    /// `-slope` of the fit restricted to the upper half of the d²/t range.
    pub c_upper: f64,
    /// exp(max residual - min residual).
    pub ratio_spread: f64,
    pub pairs: usize,
}

/// Samples `K_t(g, source)` for each source at `per_source` targets spread
/// evenly (by distance rank) over `0 < d²/t <= d2t_max`. `distances[i]` is
/// the distance field from `sources[i]`; `volume(i, r)` the ball volume
/// around `sources[i]`.
pub fn kernel_samples(
    spec: &SpectralData,
    t: f64,
    sources: &[usize],
    distances: &[Vec<f64>],
    volume: impl Fn(usize, f64) -> f64,
    per_source: usize,
    d2t_max: f64,
) -> Vec<KernelSample> {
    let mut out = Vec::new();
    for (i, &src) in sources.iter().enumerate() {
        let col = kernel_column(spec, t, src).values;
        let d = &distances[i];
        let mut cand: Vec<usize> = (0..d.len())
            .filter(|&g| g != src && d[g] > 0.0 && d[g] * d[g] / t <= d2t_max)
            .collect();
        cand.sort_by(|a, b| d[*a].total_cmp(&d[*b]).then(a.cmp(b)));
        if cand.is_empty() {
            continue;
        }
        let vol = volume(i, t.sqrt());
        let take = per_source.min(cand.len());
        for k in 0..take {
            let g = cand[k * (cand.len() - 1) / (take - 1).max(1)];
            out.push(KernelSample {
                t,
                kernel: col[g],
                distance: d[g],
                volume: vol,
            });
        }
    }
    out
}

/// Regresses log(K_t |B(g,√t)|) against d²/t.
pub fn gaussian_bound_fit(samples: &[KernelSample]) -> Result<GaussianFit> {
    let xs: Vec<f64> = samples.iter().map(|s| s.distance * s.distance / s.t).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.kernel * s.volume).ln()).collect();
    if samples.len() < 4 || xs.iter().all(|x| *x < 1.0) {
        return Err(Error::Numerical(
            "insufficient dynamic range: all probed d^2/t < 1".into(),
        ));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Numerical("non-positive kernel value among samples".into()));
    }
    let (slope, intercept) = linear_fit(&xs, &ys);
    let res: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    let spread = res.iter().cloned().fold(f64::MIN, f64::max) - res.iter().cloned().fold(f64::MAX, f64::min);
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let half = |lower: bool| {
        let (hx, hy): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(&ys)
            .filter(|(x, _)| (**x <= median) == lower)
            .map(|(x, y)| (*x, *y))
            .unzip();
        if hx.len() >= 2 {
            -linear_fit(&hx, &hy).0
        } else {
            -slope
        }
    };
    Ok(GaussianFit {
        slope,
        intercept,
        c_lower: half(true),
        c_upper: half(false),
        ratio_spread: spread.exp(),
        pairs: samples.len(),
    })
}

/// Least-squares slope of log ||e^{-tL}u||_q against log t over `count`
/// log-spaced times in `t_window`.
pub fn ultracontractivity_fit(
    spec: &SpectralData,
    u: &[f64],
    p: f64,
    q: f64,
    t_window: (f64, f64),
    count: usize,
) -> Result<f64> {
    if !(p >= 1.0 && q >= p) {
        return Err(Error::config("exponents", "need 1 <= p <= q"));
    }
    if !(t_window.0 > 0.0 && t_window.1 > t_window.0 * 1.5) || count < 3 {
        return Err(Error::config("t_window", "window too narrow"));
    }
    let grid = spec.grid();
    let c = spec.coefficients(u);
    let ts = log_space(t_window.0, t_window.1, count);
    let (xs, ys): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .map(|&t| {
            let v = spec.apply_fn_coeffs(&c, |l| (-t * l).exp());
            (t.ln(), grid.lp_norm(&v, q).ln())
        })
        .unzip();
    Ok(linear_fit(&xs, &ys).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubordinatorRoute {
    Spectral,
    PoissonQuadrature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorSpec {
    pub s: f64,
    pub route: SubordinatorRoute,
    pub sigma_quadrature: QuadratureSpec,
}

impl SubordinatorSpec {
    pub fn spectral(s: f64) -> Self {
        SubordinatorSpec {
            s,
            route: SubordinatorRoute::Spectral,
            sigma_quadrature: QuadratureSpec::new(1e-8, 1e4, 32),
        }
    }

    pub fn poisson() -> Self {
        SubordinatorSpec {
            s: 0.5,
            route: SubordinatorRoute::PoissonQuadrature,
            sigma_quadrature: QuadratureSpec::new(1e-8, 1e4, 32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::config("subordinator.s", "must lie in (0, 1)"));
        }
        if self.route == SubordinatorRoute::PoissonQuadrature && self.s != 0.5 {
            return Err(Error::config(
                "subordinator.route",
                "poisson_quadrature requires s = 1/2 exactly",
            ));
        }
        self.sigma_quadrature.validate()
    }
}

/// Density of the s = 1/2 subordinator, normalized to unit mass:
/// `t / (2 sqrt(pi) σ^{3/2}) exp(-t²/(4σ))`.
pub fn poisson_density(t: f64, sigma: f64) -> f64 {
    t / (2.0 * std::f64::consts::PI.sqrt() * sigma.powf(1.5)) * (-t * t / (4.0 * sigma)).exp()
}

/// Mass of the density below `a` (closed form).
pub fn poisson_mass_below(t: f64, a: f64) -> f64 {
    erfc(t / (2.0 * a.sqrt()))
}

/// Mass of the density above `b` (closed form).
pub fn poisson_mass_above(t: f64, b: f64) -> f64 {
    erf(t / (2.0 * b.sqrt()))
}

/// Total mass: log-quadrature on the σ-rule plus closed-form head and tail.
///
/// The trapezoid sum carries its first Euler-Maclaurin endpoint correction;
/// without it the slow `σ^{-1/2}` decay at `t_max` leaves an O(h²) bias.
pub fn poisson_total_mass(t: f64, rule: &LogRule) -> f64 {
    let g = |s: f64| s * poisson_density(t, s);
    // d/d(ln σ) of σ η(σ).
    let dg = |s: f64| g(s) * (t * t / (4.0 * s) - 0.5);
    let vals: Vec<f64> = rule.nodes.iter().map(|&s| g(s)).collect();
    let h = rule.log_step();
    let correction = h * h / 12.0 * (dg(rule.t_max()) - dg(rule.t_min()));
    rule.integrate(&vals) - correction + poisson_mass_below(t, rule.t_min()) + poisson_mass_above(t, rule.t_max())
}

#[derive(Clone, Debug)]
pub struct SubordinateResult {
    pub value: Vec<f64>,
    /// Bound on the neglected σ-tail contribution (L^2); zero for the spectral route.
    pub tail_bound: f64,
}

/// `e^{-t L^s} u` by the configured route.
pub fn subordinate_apply(
    spec: &SpectralData,
    sub: &SubordinatorSpec,
    t: f64,
    u: &[f64],
) -> Result<SubordinateResult> {
    sub.validate()?;
    match sub.route {
        SubordinatorRoute::Spectral => {
            let s = sub.s;
            Ok(SubordinateResult {
                value: spec.apply_fn(u, |l| (-t * l.powf(s)).exp()),
                tail_bound: 0.0,
            })
        }
        SubordinatorRoute::PoissonQuadrature => {
            let rule = sub.sigma_quadrature.rule();
            let c = spec.coefficients(u);
            let mut acc = vec![0.0; u.len()];
            for (&sigma, &w) in rule.nodes.iter().zip(&rule.weights) {
                let weight = w * sigma * poisson_density(t, sigma);
                if weight == 0.0 {
                    continue;
                }
                let h = spec.apply_fn_coeffs(&c, |l| (-sigma * l).exp());
                for (a, v) in acc.iter_mut().zip(&h) {
                    *a += weight * v;
                }
            }
            // Head: e^{-σL}u ≈ u for σ below the rule.
            let head = poisson_mass_below(t, rule.t_min());
            for (a, v) in acc.iter_mut().zip(u) {
                *a += head * v;
            }
            let late = spec.heat(rule.t_max(), u);
            let tail_bound = spec.grid().lp_norm(&late, 2.0) * poisson_mass_above(t, rule.t_max());
            Ok(SubordinateResult {
                value: acc,
                tail_bound,
            })
        }
    }
}

/// Column `g -> K^s_t(g, source)` of the subordinated kernel (spectral route).
pub fn subordinate_kernel_column(spec: &SpectralData, s: f64, t: f64, source: usize) -> Vec<f64> {
    let n = spec.grid().len();
    let mut delta = vec![0.0; n];
    delta[source] = 1.0 / spec.grid().cell_volume();
    spec.apply_fn(&delta, |l| (-t * l.powf(s)).exp())
}

/// Model `|B(g, t^{1/(2s)} + d)|^{-1} t / (t^{1/(2s)} + d)^{2s}` given the volume function.
pub fn subordinate_kernel_model(s: f64, t: f64, distance: f64, volume: impl Fn(f64) -> f64) -> f64 {
    let r = t.powf(0.5 / s) + distance;
    t / (volume(r) * r.powf(2.0 * s))
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparabilityReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub band: f64,
    pub samples: usize,
}

/// Summarizes kernel/model ratios.
pub fn comparability(ratios: &[f64]) -> ComparabilityReport {
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    ComparabilityReport {
        min_ratio,
        max_ratio,
        band: max_ratio / min_ratio,
        samples: ratios.len(),
    }
}

/// `sup_t |e^{-t√L} u|` over `t_grid` together with the t -> 0 endpoint `|u|`.
pub fn maximal_function(spec: &SpectralData, u: &[f64], t_grid: &[f64]) -> Vec<f64> {
    let c = spec.coefficients(u);
    let mut out: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    for &t in t_grid {
        let v = spec.apply_fn_coeffs(&c, |l| (-t * l.sqrt()).exp());
        for (o, x) in out.iter_mut().zip(&v) {
            *o = o.max(x.abs());
        }
    }
    out
}

/// Exact `sup_λ λ |{|f| > λ}|^θ`: the supremum is approached from below at
/// each value level, so it is a max over the sorted values.
pub fn weak_type_sup(f: &[f64], theta: f64, cell_volume: f64) -> f64 {
    let mut v: Vec<f64> = f.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let level = v[i];
        let mut j = i;
        while j < v.len() && v[j] == level {
            j += 1;
        }
        best = best.max(level * (j as f64 * cell_volume).powf(theta));
        i = j;
    }
    best
}

/// `sup_λ λ |{|f| > λ}|^θ` on `levels` log-spaced λ between 1e-6 ||f||_∞ and ||f||_∞.
pub fn weak_type_sup_grid(f: &[f64], theta: f64, cell_volume: f64, levels: usize) -> f64 {
    let top = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if top == 0.0 {
        return 0.0;
    }
    log_space(1e-6 * top, top, levels)
        .into_iter()
        .map(|lam| {
            let count = f.iter().filter(|x| x.abs() > lam).count();
            lam * (count as f64 * cell_volume).powf(theta)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct LedouxReport {
    pub lhs: f64,
    pub rhs: f64,
    /// rhs - lhs.
    pub defect: f64,
    /// Largest increase of σ -> ||L^s e^{-σL}u||_1 between consecutive σ nodes.
    pub monotonicity_violation: f64,
}

/// `||e^{-tL}u - u||_1 <= (2 t^s / Γ(1+s)) sup_σ ||L^s e^{-σL}u||_1`, with
/// the sup read at the smallest σ node.
pub fn ledoux_defect(spec: &SpectralData, s: f64, t: f64, u: &[f64], sigma_grid: &[f64]) -> Result<LedouxReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::config("s", "must lie in (0, 1)"));
    }
    if sigma_grid.is_empty() {
        return Err(Error::config("sigma_grid", "must be nonempty"));
    }
    let grid = spec.grid();
    let c = spec.coefficients(u);
    let ht = spec.apply_fn_coeffs(&c, |l| (-t * l).exp());
    let diff: Vec<f64> = ht.iter().zip(u).map(|(a, b)| a - b).collect();
    let lhs = grid.lp_norm(&diff, 1.0);
    let mut sig = sigma_grid.to_vec();
    sig.sort_by(f64::total_cmp);
    let norms: Vec<f64> = sig
        .iter()
        .map(|&sg| grid.lp_norm(&spec.apply_fn_coeffs(&c, |l| l.powf(s) * (-sg * l).exp()), 1.0))
        .collect();
    let violation = norms.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let rhs = 2.0 * t.powf(s) / gamma(1.0 + s) * norms[0];
    Ok(LedouxReport {
        lhs,
        rhs,
        defect: rhs - lhs,
        monotonicity_violation: violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_density_has_unit_mass() {
        let rule = QuadratureSpec::new(1e-8, 1e4, 32).rule();
        for t in [0.05, 0.5, 2.0] {
            assert!((poisson_total_mass(t, &rule) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn weak_sup_matches_grid_from_below() {
        let f = [3.0, 1.0, 1.0, 2.0, 0.5];
        let exact = weak_type_sup(&f, 1.0, 1.0);
        // levels: 3*1, 2*2, 1*4, 0.5*5
        assert!((exact - 4.0).abs() < 1e-15);
        assert!(weak_type_sup_grid(&f, 1.0, 1.0, 64) <= exact + 1e-12);
    }
}
