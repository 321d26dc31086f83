//! Maximal-function bound for Riesz potentials, HLS and Sobolev ratios, and
//! the rearrangement inequality used to pass from perimeters to Sobolev.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::operator::{riesz_potential, SpectralData};
use crate::quadrature::log_space;
use crate::semigroup::{maximal_function, weak_type_sup, weak_type_sup_grid};

/// Levels of the grid version of the weak-type supremum.
pub const WEAK_LEVELS: usize = 64;

#[derive(Clone, Debug, Serialize)]
pub struct PointwiseReport {
    /// Max over nodes of `(|I u| - RHS)_+ / ||I u||_∞`.
    pub defect: f64,
    /// Fitted `sup_{t,g} |e^{-t√L}u(g)| t^{Q/p} / ||u||_p`.
    pub c_poisson: f64,
    /// `C(α̃,p,Q) = c_poisson / (Γ(α̃)(Q/p - α̃))`.
    pub c_tail: f64,
    /// `C(α̃) = 1/Γ(1+α̃)`.
    pub c_head: f64,
    /// Slope of log ε* against log(||u||_p / Mu(g)) over the nodes.
    pub epsilon_slope: f64,
}

fn check_pair(q: f64, alpha_tilde: f64, p: f64) -> Result<()> {
    if !(alpha_tilde > 0.0 && alpha_tilde < q) {
        return Err(Error::config("alpha_tilde", format!("must lie in (0, {q})")));
    }
    if !(p >= 1.0 && p < q / alpha_tilde) {
        return Err(Error::config("p", format!("must lie in [1, {:.6})", q / alpha_tilde)));
    }
    Ok(())
}

/// `|I_α̃ u| <= C(α̃) Mu ε^α̃ + C(α̃,p,Q) ||u||_p ε^{α̃ - Q/p}`, minimized over
/// `epsilon_grid` node by node. `t_grid` samples the Poisson semigroup for
/// the maximal function and for the fitted decay constant.
pub fn pointwise_bound_defect(
    spec: &SpectralData,
    u: &[f64],
    alpha_tilde: f64,
    p: f64,
    epsilon_grid: &[f64],
    t_grid: &[f64],
) -> Result<PointwiseReport> {
    let grid = spec.grid();
    let q = grid.hom_dimension();
    check_pair(q, alpha_tilde, p)?;
    let c_head = 1.0 / gamma(1.0 + alpha_tilde);
    let norm = grid.lp_norm(u, p);
    if norm == 0.0 {
        return Ok(PointwiseReport {
            defect: 0.0,
            c_poisson: 0.0,
            c_tail: 0.0,
            c_head,
            epsilon_slope: p / q,
        });
    }
    let iu = riesz_potential(spec, alpha_tilde, u)?;
    let mu = maximal_function(spec, u, t_grid);
    let c = spec.coefficients(u);
    let mut c_poisson: f64 = 0.0;
    for &t in t_grid {
        let v = spec.apply_fn_coeffs(&c, |l| (-t * l.sqrt()).exp());
        let top = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        c_poisson = c_poisson.max(top * t.powf(q / p) / norm);
    }
    let c_tail = c_poisson / (gamma(alpha_tilde) * (q / p - alpha_tilde));
    let top = iu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut defect: f64 = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for g in 0..grid.len() {
        let (best, arg) = epsilon_grid
            .iter()
            .map(|&e| {
                (
                    c_head * mu[g] * e.powf(alpha_tilde) + c_tail * norm * e.powf(alpha_tilde - q / p),
                    e,
                )
            })
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        defect = defect.max((iu[g].abs() - best).max(0.0) / top);
        if mu[g] > 1e-8 * norm {
            xs.push((norm / mu[g]).ln());
            ys.push(arg.ln());
        }
    }
    let epsilon_slope = if xs.len() > 2 {
        crate::quadrature::linear_fit(&xs, &ys).0
    } else {
        p / q
    };
    Ok(PointwiseReport {
        defect,
        c_poisson,
        c_tail,
        c_head,
        epsilon_slope,
    })
}

/// The minimizing ε of the two-term bound in closed form.
pub fn optimal_epsilon(q: f64, alpha_tilde: f64, p: f64, c_head: f64, c_tail: f64, norm: f64, mu: f64) -> f64 {
    ((q - alpha_tilde * p) * c_tail * norm / (alpha_tilde * p * c_head * mu)).powf(p / q)
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub s: Option<f64>,
    pub alpha_tilde: f64,
    pub p: f64,
    pub q: f64,
    /// `||f||_q / ||u||_p`.
    pub ratio: f64,
    /// `sup_λ λ |{|f| > λ}|^{1/q} / ||u||_p`, exact over the value levels.
    pub weak_ratio: f64,
    /// The same on the 64-level log grid.
    pub weak_ratio_grid: f64,
}

/// HLS ratios for `f = I_α̃ u` with `1/p - 1/q = α̃/Q`.
pub fn hls_ratio(spec: &SpectralData, u: &[f64], alpha_tilde: f64, p: f64) -> Result<EmbeddingReport> {
    let grid = spec.grid();
    let qd = grid.hom_dimension();
    check_pair(qd, alpha_tilde, p)?;
    let q = 1.0 / (1.0 / p - alpha_tilde / qd);
    let norm = grid.lp_norm(u, p);
    if norm == 0.0 {
        return Ok(EmbeddingReport {
            s: None,
            alpha_tilde,
            p,
            q,
            ratio: 0.0,
            weak_ratio: 0.0,
            weak_ratio_grid: 0.0,
        });
    }
    let f = riesz_potential(spec, alpha_tilde, u)?;
    let cv = grid.cell_volume();
    Ok(EmbeddingReport {
        s: None,
        alpha_tilde,
        p,
        q,
        ratio: grid.lp_norm(&f, q) / norm,
        weak_ratio: weak_type_sup(&f, 1.0 / q, cv) / norm,
        weak_ratio_grid: weak_type_sup_grid(&f, 1.0 / q, cv, WEAK_LEVELS) / norm,
    })
}

/// `||u||_q / ||L^s u||_p` with `q = pQ/(Q - 2sp)`, computed as the HLS ratio
/// of `L^s u` at `α̃ = 2s`, since `u = I_{2s} L^s u`.
pub fn sobolev_ratio(spec: &SpectralData, u: &[f64], s: f64, p: f64) -> Result<EmbeddingReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::config("s", "must lie in (0, 1)"));
    }
    let ls = crate::operator::fractional_power_spectral(spec, s, u)?;
    let mut r = hls_ratio(spec, &ls, 2.0 * s, p)?;
    r.s = Some(s);
    Ok(r)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FamilyStats {
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

pub fn family_stats(values: &[f64]) -> FamilyStats {
    let mut v: Vec<f64> = values.iter().cloned().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return FamilyStats {
            min: f64::NAN,
            max: f64::NAN,
            median: f64::NAN,
        };
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    FamilyStats {
        min: v[0],
        max: v[n - 1],
        median,
    }
}

/// A nonnegative non-increasing step function on `[0, ∞)`: value `heights[i]`
/// on `[breaks[i-1], breaks[i])` with `breaks[-1] = 0`, zero after the last break.
#[derive(Clone, Debug)]
pub struct StepFunction {
    pub breaks: Vec<f64>,
    pub heights: Vec<f64>,
}

impl StepFunction {
    pub fn new(breaks: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if breaks.len() != heights.len() || breaks.is_empty() {
            return Err(Error::config("step", "breaks and heights must have equal nonzero length"));
        }
        if breaks[0] <= 0.0 || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("step.breaks", "must be positive and increasing"));
        }
        if heights.iter().any(|h| *h < 0.0) || heights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::config("step.heights", "must be nonnegative and non-increasing"));
        }
        Ok(StepFunction { breaks, heights })
    }

    /// `(∫ (t^γ U)^r dt/t)^{1/r}`, exact for a step function.
    pub fn weighted_norm(&self, gamma_exp: f64, r: f64) -> f64 {
        let k = gamma_exp * r;
        let mut a = 0.0f64;
        let mut acc = 0.0;
        for (&b, &h) in self.breaks.iter().zip(&self.heights) {
            acc += h.powf(r) * (b.powf(k) - a.powf(k)) / k;
            a = b;
        }
        acc.powf(1.0 / r)
    }
}

/// LHS over RHS of the rearrangement inequality with exponents `(p, q, γ)`.
pub fn rearrangement_ratio(u: &StepFunction, p: f64, q: f64, gamma_exp: f64) -> f64 {
    let rhs = u.weighted_norm(gamma_exp, p);
    if rhs == 0.0 {
        return 0.0;
    }
    u.weighted_norm(gamma_exp, q) / rhs
}

/// Exponents used for the perimeter-to-Sobolev step: `((Q-2s)/Q, 1, Q/(Q-2s))`.
pub fn perimeter_exponents(q: f64, s: f64) -> (f64, f64, f64) {
    ((q - 2.0 * s) / q, 1.0, q / (q - 2.0 * s))
}

/// Default ε grid: 64 log-spaced values over six decades around the box scale.
pub fn default_epsilon_grid(half_width: f64) -> Vec<f64> {
    log_space(1e-4 * half_width, 1e2 * half_width, 64)
}
