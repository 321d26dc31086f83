//! Log-spaced quadrature for dt/t integrals, extrapolation helpers and
//! Gauss-Legendre rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Add the modelled contribution beyond `t_max` and report its bound.
    AnalyticBound,
    /// Discard everything beyond `t_max`.
    Drop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub nodes_per_decade: u32,
    pub tail_policy: TailPolicy,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            t_min: 1e-6,
            t_max: 1e4,
            nodes_per_decade: 16,
            tail_policy: TailPolicy::AnalyticBound,
        }
    }
}

impl QuadratureSpec {
    pub fn new(t_min: f64, t_max: f64, nodes_per_decade: u32) -> Self {
        QuadratureSpec {
            t_min,
            t_max,
            nodes_per_decade,
            tail_policy: TailPolicy::AnalyticBound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min.is_finite()) {
            return Err(Error::config("quadrature.t_min", "must be > 0"));
        }
        if !(self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(Error::config("quadrature.t_max", "must exceed t_min"));
        }
        if self.nodes_per_decade < 4 {
            return Err(Error::config("quadrature.nodes_per_decade", "must be >= 4"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        let decades = (self.t_max / self.t_min).log10();
        (decades * self.nodes_per_decade as f64 - 1e-9).ceil() as usize + 1
    }

    pub fn rule(&self) -> LogRule {
        LogRule::new(self.t_min, self.t_max, self.node_count())
    }
}

/// Trapezoid rule in log t on `[t_min, t_max]`. `weights` integrate against
/// dt/t, so `sum w_i f(t_i)` approximates `int f(t) dt/t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LogRule {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Self {
        assert!(count >= 2 && t_max > t_min && t_min > 0.0);
        let a = t_min.ln();
        let step = (t_max.ln() - a) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| (a + step * i as f64).exp()).collect();
        nodes[0] = t_min;
        nodes[count - 1] = t_max;
        let mut weights = vec![step; count];
        weights[0] *= 0.5;
        weights[count - 1] *= 0.5;
        LogRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn t_min(&self) -> f64 {
        self.nodes[0]
    }
    pub fn t_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
    pub fn log_step(&self) -> f64 {
        (self.t_max() / self.t_min()).ln() / (self.len() - 1) as f64
    }

    /// `sum w_i f_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// The same rule on every other node (requires an odd node count); the
    /// difference to the full rule is a standard error estimate.
    pub fn coarse_integrate(&self, values: &[f64]) -> Option<f64> {
        let n = self.len();
        if n < 3 || n.is_multiple_of(2) {
            return None;
        }
        let step = 2.0 * self.log_step();
        let mut s = 0.0;
        for i in (0..n).step_by(2) {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += w * step * values[i];
        }
        Some(s)
    }
}

/// Polynomial (Neville) extrapolation of `ys` sampled at `xs` to `x = 0`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let n = xs.len();
    let mut p = ys.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            let j = i + level;
            p[i] = (xs[j] * p[i] - xs[i] * p[i + 1]) / (xs[j] - xs[i]);
        }
    }
    p[0]
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_rule_integrates_power() {
        // int_1^100 t^0.5 dt/t = 2 (10 - 1)
        let r = LogRule::new(1.0, 100.0, 401);
        let v: Vec<f64> = r.nodes.iter().map(|t| t.sqrt()).collect();
        assert!((r.integrate(&v) - 18.0).abs() < 1e-4);
        assert!((r.coarse_integrate(&v).unwrap() - 18.0).abs() < 4e-4);
    }

    #[test]
    fn node_count_matches_density() {
        let q = QuadratureSpec::default();
        assert_eq!(q.node_count(), 161);
        let r = q.rule();
        assert!((r.log_step() - std::f64::consts::LN_10 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn neville_is_exact_for_polynomials() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x + x * x * x).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-13);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }
}
