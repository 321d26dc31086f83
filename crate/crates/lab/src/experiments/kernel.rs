use anyhow::Result;
use grushin_core::grid::Grid;
use grushin_core::metric::{ball_volume, cc_distances};
use grushin_core::operator::SpectralData;
use grushin_core::semigroup::{gaussian_bound_fit, kernel_samples, ultracontractivity_fit, KernelSample};
use serde::{Deserialize, Serialize};

use super::Lab;
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Report, Table, Tag, Tolerance};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub times: Vec<f64>,
    pub sources: Vec<Vec<f64>>,
    /// Total kernel samples, shared out over the sources.
    pub pairs: usize,
    pub d2t_max: f64,
    pub spread_bound: f64,
    pub control_times: Vec<f64>,
    pub ultra_window: [f64; 2],
    pub control_window: [f64; 2],
    pub ultra_count: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            times: vec![0.01, 0.04],
            sources: [-1.0, -0.5, 0.0, 0.5, 1.0]
                .iter()
                .flat_map(|&x| [-0.8, -0.3, 0.3, 0.8].map(|y| vec![x, y]))
                .collect(),
            pairs: 200,
            d2t_max: 6.0,
            spread_bound: 50.0,
            control_times: vec![0.01, 0.02],
            ultra_window: [0.1, 1.0],
            control_window: [0.02, 0.2],
            ultra_count: 10,
        }
    }
}

impl Params {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p: Params = cfg.params()?;
        let n = cfg.grid.n();
        for (i, s) in p.sources.iter().enumerate() {
            if s.len() != n {
                return Err(ConfigError::new(format!("params.sources[{i}]"), format!("needs {n} coordinates")));
            }
        }
        if p.sources.is_empty() || p.pairs < 2 * p.sources.len() {
            return Err(ConfigError::new("params.pairs", "need sources and >= 2 pairs per source"));
        }
        for (key, [a, b]) in [("ultra_window", p.ultra_window), ("control_window", p.control_window)] {
            if !(a > 0.0 && b > 1.5 * a) {
                return Err(ConfigError::new(format!("params.{key}"), "need 0 < t0 and t1 > 1.5 t0"));
            }
        }
        if p.ultra_count < 3 {
            return Err(ConfigError::new("params.ultra_count", "must be >= 3"));
        }
        if !(p.d2t_max > 1.0) {
            return Err(ConfigError::new("params.d2t_max", "must exceed 1"));
        }
        Ok(p)
    }
}

/// Volume of the Euclidean unit ball in dimension `n`.
fn unit_ball(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball(n - 2),
    }
}

/// Splits `total` over sources with `avail[i]` candidates each: equal shares,
/// with any shortfall passed on to sources that have room.
fn quotas(avail: &[usize], total: usize) -> Vec<usize> {
    let mut q = vec![0; avail.len()];
    let mut left = total;
    loop {
        let open: Vec<usize> = (0..avail.len()).filter(|&i| q[i] < avail[i]).collect();
        if left == 0 || open.is_empty() {
            return q;
        }
        let share = (left / open.len()).max(1);
        for i in open {
            let add = share.min(avail[i] - q[i]).min(left);
            q[i] += add;
            left -= add;
        }
    }
}

fn sample_pairs(
    sd: &SpectralData,
    t: f64,
    sources: &[usize],
    dist: &[Vec<f64>],
    volume: impl Fn(usize, f64) -> f64,
    total: usize,
    d2t_max: f64,
) -> Vec<KernelSample> {
    let one = |i: usize, n: usize| kernel_samples(sd, t, &sources[i..=i], &dist[i..=i], |_, r| volume(i, r), n, d2t_max);
    let avail: Vec<usize> = (0..sources.len()).map(|i| one(i, usize::MAX).len()).collect();
    quotas(&avail, total)
        .into_iter()
        .enumerate()
        .filter(|(_, n)| *n > 0)
        .flat_map(|(i, n)| one(i, n))
        .collect()
}

fn delta_at_origin(g: &Grid) -> Vec<f64> {
    let mut u = vec![0.0; g.len()];
    u[g.nearest_node(&vec![0.0; g.n_axes()])] = 1.0 / g.cell_volume();
    u
}

pub fn run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let p = Params::load(cfg)?;
    let lab = Lab::new(&cfg.grid)?;
    let g = &lab.grid;

    rep.section("gaussian-bound", "two-sided Gaussian heat kernel bounds");
    let sources: Vec<usize> = p.sources.iter().map(|c| g.nearest_node(c)).collect();
    let fields = cc_distances(g, &sources)?;
    let dist: Vec<Vec<f64>> = fields.iter().map(|f| f.values.clone()).collect();
    let mut table = Table::new("gaussian_fit", &["alpha_t", "slope", "c_lower", "c_upper", "ratio_spread", "pairs"]);
    for &t in &p.times {
        let samples = sample_pairs(&lab.sd, t, &sources, &dist, |i, r| ball_volume(g, &fields[i], r).volume, p.pairs, p.d2t_max);
        let fit = gaussian_bound_fit(&samples)?;
        table.push(&format!("alpha={};t={t}", g.alpha()), &[fit.slope, fit.c_lower, fit.c_upper, fit.ratio_spread, fit.pairs as f64]);
        let par = format!("t={t};pairs={}", fit.pairs);
        rep.push("interior pairs sampled", &*par, fit.pairs as f64, p.pairs as f64, Tag::Trivial, Tolerance::AtLeast);
        rep.push("residual spread factor", &*par, fit.ratio_spread, p.spread_bound, Tag::Oracle, Tolerance::AtMost);
        rep.push("fitted slope", &*par, fit.slope, 0.0, Tag::Theory, Tolerance::AtMost);
    }
    // Euclidean control: the Gaussian exponent is exactly -1/4.
    let flat = Lab::new(&cfg.grid.with_alpha(0.0))?;
    let fg = &flat.grid;
    let omega = unit_ball(fg.n_axes());
    let src = fg.nearest_node(&vec![0.0; fg.n_axes()]);
    let origin = fg.coords(src);
    let euclid: Vec<f64> = (0..fg.len())
        .map(|n| fg.coords(n).iter().zip(&origin).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    for &t in &p.control_times {
        let samples = kernel_samples(&flat.sd, t, &[src], std::slice::from_ref(&euclid), |_, r| omega * r.powi(fg.n_axes() as i32), p.pairs, p.d2t_max);
        let fit = gaussian_bound_fit(&samples)?;
        table.push(&format!("alpha=0;t={t}"), &[fit.slope, fit.c_lower, fit.c_upper, fit.ratio_spread, fit.pairs as f64]);
        rep.push("euclidean control slope", format!("alpha=0;t={t}"), fit.slope, -0.25, Tag::Theory, Tolerance::Rel(0.1));
    }
    rep.tables.push(table);

    rep.section("ultracontractivity", "ultracontractive decay rates");
    let mut table = Table::new("ultracontractivity", &["case", "p", "q", "slope", "target"]);
    for (lab_, window, label) in [(&lab, p.ultra_window, "grushin"), (&flat, p.control_window, "euclidean")] {
        let gg = &lab_.grid;
        let qq = gg.hom_dimension();
        let u = delta_at_origin(gg);
        for qn in [f64::INFINITY, 2.0] {
            let slope = ultracontractivity_fit(&lab_.sd, &u, 1.0, qn, (window[0], window[1]), p.ultra_count)?;
            let target = -0.5 * qq * (1.0 - 1.0 / qn);
            table.push(label, &[1.0, qn, slope, target]);
            let par = format!("{label};p=1;q={qn};window=[{},{}]", window[0], window[1]);
            rep.push("log-log decay slope", par, slope, target, Tag::Theory, Tolerance::Rel(0.1));
        }
    }
    rep.tables.push(table);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::quotas;

    #[test]
    fn quotas_pass_shortfall_on() {
        assert_eq!(quotas(&[100, 100], 10), vec![5, 5]);
        assert_eq!(quotas(&[2, 100, 100], 12), vec![2, 5, 5]);
        assert_eq!(quotas(&[1, 1], 10), vec![1, 1]);
        assert_eq!(quotas(&[3, 3, 3], 7).iter().sum::<usize>(), 7);
    }
}
