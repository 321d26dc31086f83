use std::sync::Arc;

use grushin_core::grid::{Grid, GridSpec};
use grushin_core::operator::*;
use grushin_core::quadrature::LogRule;
use proptest::prelude::*;

fn build(spec: GridSpec, rule: CoefficientRule) -> (Arc<Grid>, GrushinOperator) {
    let g = Arc::new(Grid::new(spec).unwrap());
    let op = GrushinOperator::assemble(g.clone(), rule);
    (g, op)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn dense_and_separable_agree_on_32x32() {
    let (g, op) = build(GridSpec::grushin_plane(32, 2.0), CoefficientRule::CellAverage);
    let dense = eigendecompose(&op, Count::All, Method::Dense).unwrap();
    let sep = eigendecompose(&op, Count::All, Method::Separable).unwrap();
    for (a, b) in dense.eigenvalues().iter().zip(sep.eigenvalues()) {
        assert!((a - b).abs() / (1.0 + b) < 1e-8, "{a} vs {b}");
    }
    let u = g.sample(|p| (-(p[0] - 0.3).powi(2) - 2.0 * p[1] * p[1]).exp() * (1.0 + p[1]));
    for t in [1e-3, 0.1, 2.0] {
        let a = dense.heat(t, &u);
        let b = sep.heat(t, &u);
        assert!(max_abs_diff(&a, &b) < 1e-8, "t={t}");
    }
    assert!(sep.max_residual(&op) < 1e-9);
    assert!(sep.gram_defect() < 1e-10);
}

#[test]
fn euclidean_spectrum_matches_sine_sums() {
    // α = 0 on a rectangle with unequal point counts: the spectrum is the sum
    // of the 1-D Dirichlet spectra on an interval of length 2H.
    let spec = GridSpec {
        m: 1,
        k: 1,
        alpha: 0.0,
        half_width: vec![1.0, 1.5],
        points: vec![11, 14],
    };
    let (_, op) = build(spec.clone(), CoefficientRule::CellAverage);
    let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
    let one_d = |n: usize, hw: f64| -> Vec<f64> {
        let h = 2.0 * hw / (n + 1) as f64;
        let len = 2.0 * hw;
        (1..=n)
            .map(|j| 4.0 / (h * h) * (std::f64::consts::PI * j as f64 * h / (2.0 * len)).sin().powi(2))
            .collect()
    };
    let ex = one_d(11, 1.0);
    let ey = one_d(14, 1.5);
    let mut want: Vec<f64> = ex.iter().flat_map(|a| ey.iter().map(move |b| a + b)).collect();
    want.sort_by(f64::total_cmp);
    for (a, b) in sd.eigenvalues().iter().zip(&want) {
        assert!((a - b).abs() < 1e-9 * (1.0 + b), "{a} vs {b}");
    }
}

#[test]
fn operator_on_polynomials() {
    let (g, op) = build(GridSpec::grushin_plane(21, 2.0), CoefficientRule::NodeValue);
    let interior = |n: usize| (0..2).all(|a| {
        let i = g.axis_index(n, a);
        i > 0 && i + 1 < 21
    });
    // L(x² y) = -2y exactly away from the Dirichlet rows.
    let lu = op.apply(&g.sample(|p| p[0] * p[0] * p[1]));
    for n in (0..g.len()).filter(|&n| interior(n)) {
        assert!((lu[n] + 2.0 * g.coord(n, 1)).abs() < 1e-10);
    }
    // L(y²) = -2 c(x): node values give -2x², the cell average adds h²/12.
    let v = g.sample(|p| p[1] * p[1]);
    let (_, avg) = build(GridSpec::grushin_plane(21, 2.0), CoefficientRule::CellAverage);
    let h = g.spacing()[0];
    let (l_node, l_avg) = (op.apply(&v), avg.apply(&v));
    for n in (0..g.len()).filter(|&n| interior(n)) {
        let x = g.coord(n, 0);
        assert!((l_node[n] + 2.0 * x * x).abs() < 1e-9);
        assert!((l_avg[n] + 2.0 * (x * x + h * h / 12.0)).abs() < 1e-9);
    }
}

#[test]
fn leading_modes_match_full_solve() {
    let (_, op) = build(GridSpec::grushin_plane(20, 2.0), CoefficientRule::CellAverage);
    let all = eigendecompose(&op, Count::All, Method::Separable).unwrap();
    let lead = eigendecompose(&op, Count::Leading(25), Method::Separable).unwrap();
    assert_eq!(lead.len(), 25);
    for k in 0..25 {
        assert!((all.eigenvalues()[k] - lead.eigenvalues()[k]).abs() < 1e-12);
    }
    assert!(lead.max_residual(&op) < 1e-9);
}

#[test]
fn dense_budget_is_enforced() {
    let (_, op) = build(GridSpec::grushin_plane(72, 2.0), CoefficientRule::CellAverage);
    let err = eigendecompose(&op, Count::All, Method::Dense).unwrap_err();
    assert!(err.to_string().contains("count"), "{err}");
    assert!(eigendecompose(&op, Count::Leading(0), Method::Separable).is_err());
}

#[test]
fn balakrishnan_matches_spectral_power() {
    let (g, op) = build(GridSpec::grushin_plane(32, 2.0), CoefficientRule::CellAverage);
    let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
    let u = g.sample(|p| (-3.0 * (p[0] * p[0] + p[1] * p[1])).exp());
    let rule = LogRule::new(1e-6, 1e3, 200);
    for s in [0.25, 0.5, 0.75] {
        let exact = fractional_power_spectral(&sd, s, &u).unwrap();
        let q = fractional_power_balakrishnan(&op, &sd, s, &u, &rule, 1e-3).unwrap();
        let diff: Vec<f64> = exact.iter().zip(&q.value).map(|(a, b)| a - b).collect();
        let rel = g.lp_norm(&diff, 2.0) / g.lp_norm(&exact, 2.0);
        assert!(rel < 1e-3, "s={s} rel={rel}");
        assert!(q.error_estimate.is_finite());
    }
}

#[test]
fn riesz_potential_inverts_fractional_power() {
    let (g, op) = build(GridSpec::grushin_plane(24, 2.0), CoefficientRule::CellAverage);
    let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
    let u = g.sample(|p| (-(p[0] * p[0] + 4.0 * p[1] * p[1])).exp() * p[0]);
    for s in [0.3, 0.5, 0.9] {
        let ls = fractional_power_spectral(&sd, s, &u).unwrap();
        let back = riesz_potential(&sd, 2.0 * s, &ls).unwrap();
        assert!(max_abs_diff(&back, &u) < 1e-8);
        let other = fractional_power_spectral(&sd, s, &riesz_potential(&sd, 2.0 * s, &u).unwrap()).unwrap();
        assert!(max_abs_diff(&other, &u) < 1e-8);
    }
    let rule = LogRule::new(1e-8, 1e4, 241);
    let quad = riesz_potential_quadrature(&sd, 1.0, &u, &rule).unwrap();
    let exact = riesz_potential(&sd, 1.0, &u).unwrap();
    assert!(max_abs_diff(&quad.value, &exact) < 1e-4 * exact.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    assert!(riesz_potential(&sd, 3.0, &u).is_err());
}

#[test]
fn krylov_fallback_tracks_spectral_heat() {
    let (g, op) = build(GridSpec::grushin_plane(28, 2.0), CoefficientRule::CellAverage);
    let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
    let u = g.sample(|p| (-(p[0] * p[0] + p[1] * p[1]) * 2.0).exp());
    for t in [0.01, 0.1] {
        let (kr, indicator) = heat_apply_krylov(&op, t, &u, 120, 1e-12);
        assert!(max_abs_diff(&kr, &sd.heat(t, &u)) < 1e-8);
        assert!(indicator < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operator_is_symmetric_and_positive(
        seed in proptest::collection::vec(-1.0f64..1.0, 2 * 144),
        alpha in prop_oneof![Just(0.0), Just(0.5), Just(1.0), Just(2.0)],
    ) {
        let spec = GridSpec::grushin_plane(12, 1.5).with_alpha(alpha);
        let (g, op) = build(spec, CoefficientRule::CellAverage);
        let (u, v) = seed.split_at(144);
        let luv = g.inner(&op.apply(u), v);
        let ulv = g.inner(u, &op.apply(v));
        prop_assert!((luv - ulv).abs() <= 1e-10 * (1.0 + luv.abs()));
        prop_assert!(g.inner(&op.apply(u), u) > 0.0);
    }

    #[test]
    fn heat_is_a_semigroup(t1 in 1e-3f64..1.0, t2 in 1e-3f64..1.0) {
        let (g, op) = build(GridSpec::grushin_plane(10, 2.0), CoefficientRule::CellAverage);
        let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
        let u = g.sample(|p| (p[0] - p[1]).cos());
        let a = sd.heat(t1, &sd.heat(t2, &u));
        let b = sd.heat(t1 + t2, &u);
        prop_assert!(max_abs_diff(&a, &b) < 1e-12);
    }
}
