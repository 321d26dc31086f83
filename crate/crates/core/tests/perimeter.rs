use std::sync::Arc;

use grushin_core::grid::{rasterize, Grid, GridSpec, SetMask, SetSpec};
use grushin_core::operator::*;
use grushin_core::perimeter::*;
use grushin_core::quadrature::{log_space, QuadratureSpec, TailPolicy};

fn setup(spec: GridSpec) -> (Arc<Grid>, SpectralData) {
    let g = Arc::new(Grid::new(spec).unwrap());
    let op = GrushinOperator::assemble(g.clone(), CoefficientRule::CellAverage);
    let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
    (g, sd)
}

fn plane(n: usize) -> (Arc<Grid>, SpectralData) {
    setup(GridSpec::grushin_plane(n, 2.0))
}

fn boxed(c: [f64; 2], h: [f64; 2]) -> SetSpec {
    SetSpec::EuclideanBox {
        center: c.to_vec(),
        half_sides: h.to_vec(),
    }
}

fn mask(g: &Grid, set: &SetSpec) -> SetMask {
    rasterize(set, g, None).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn empty_set_has_zero_perimeters() {
    let (g, sd) = plane(24);
    let empty = SetMask::from_indicator(vec![false; g.len()], g.cell_volume());
    let quad = QuadratureSpec::default();
    assert_eq!(perimeter_star(&sd, &empty, 0.25, &quad).unwrap().value, 0.0);
    assert_eq!(perimeter_infty(&sd, &empty, 0.25, &log_space(1e-4, 10.0, 20)).unwrap(), 0.0);
    let scan = small_s_limit_scan(&sd, &empty, &[0.2, 0.1], &quad).unwrap();
    assert!(scan.values.iter().all(|v| *v == 0.0) && scan.target == 0.0);
    let half = half_limit_bracket(&sd, &empty, &[0.3, 0.4], 0.01, &quad).unwrap();
    assert!(half.sandwich.values.iter().all(|v| *v == 0.0));
    assert!(perimeter_star(&sd, &empty, 0.5, &quad).is_err());
    assert!(perimeter_star(&sd, &empty, 0.0, &quad).is_err());
}

#[test]
fn identity_under_shared_quadrature() {
    let (g, sd) = plane(32);
    let quad = QuadratureSpec::default();
    for (set, s) in [
        (boxed([0.0, 0.0], [0.5, 0.4]), 0.1),
        (boxed([0.3, -0.2], [0.3, 0.6]), 0.25),
        (boxed([-0.5, 0.5], [0.6, 0.3]), 0.4),
    ] {
        let m = mask(&g, &set);
        let id = perimeter_identity(&sd, &m, s, &quad).unwrap();
        assert!(id.rel_shared < 1e-8, "s={s} {id:?}");
        assert!(id.rel_spectral < 1e-3, "s={s} {id:?}");
        // Both defect routes give the same perimeter.
        let a = perimeter_star_with(&sd, &m, s, &quad, DefectRoute::HeatApply).unwrap().value;
        let b = perimeter_star_with(&sd, &m, s, &quad, DefectRoute::Spectral).unwrap().value;
        assert!(rel(a, b) < 1e-9);
    }
}

#[test]
fn coarea_is_exact_for_level_functions() {
    let (g, sd) = plane(24);
    let quad = QuadratureSpec::default();
    let inner = mask(&g, &boxed([0.0, 0.0], [0.3, 0.3]));
    let mid = mask(&g, &boxed([0.1, 0.0], [0.6, 0.5]));
    let outer = mask(&g, &boxed([0.0, 0.1], [1.0, 0.8]));
    let single = coarea_defect(&sd, &mid.as_field(), 0.25, &quad).unwrap();
    assert_eq!(single.defect, 0.0);
    assert_eq!(single.levels, 1);
    let stair: Vec<f64> = (0..g.len())
        .map(|n| {
            0.5 * outer.indicator[n] as u8 as f64 + 1.0 * mid.indicator[n] as u8 as f64 + 0.25 * inner.indicator[n] as u8 as f64
        })
        .collect();
    for s in [0.1, 0.3] {
        let r = coarea_defect(&sd, &stair, s, &quad).unwrap();
        assert_eq!(r.levels, 3);
        assert!(r.defect < 1e-10, "{r:?}");
    }
    assert!(coarea_defect(&sd, &vec![-1.0; g.len()], 0.25, &quad).is_err());
}

#[test]
fn binned_coarea_tracks_full_level_sum() {
    let (g, sd) = plane(24);
    let quad = QuadratureSpec::new(1e-6, 1e4, 8);
    let u = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1]) / 0.3).exp());
    let full = coarea_defect(&sd, &u, 0.25, &quad).unwrap();
    let binned = coarea_defect_binned(&sd, &u, 0.25, &quad, 64).unwrap();
    assert!(full.defect < 1e-9, "{full:?}");
    assert!(binned.defect < 0.01, "{binned:?}");
    assert!(rel(binned.level_sum, full.level_sum) < 0.01);
}

#[test]
fn mollification_increases_to_the_fractional_power() {
    let (g, sd) = plane(32);
    let m = mask(&g, &boxed([0.0, 0.0], [0.6, 0.5]));
    let quad = QuadratureSpec::default();
    let floor = 2.0 * g.max_spacing();
    let widths: Vec<f64> = [8.0, 4.0, 2.0, 1.0].iter().map(|k| k * floor).collect();
    for s in [0.1, 0.25, 0.4] {
        let r = perimeter_via_mollification(&sd, &m, s, &widths, &quad).unwrap();
        assert!(r.monotone, "{r:?}");
        assert!(r.values.iter().all(|v| *v <= r.unmollified * (1.0 + 1e-8)));
        assert!(r.estimate <= r.star_bound * (1.0 + 1e-6), "{r:?}");
    }
    assert!(perimeter_via_mollification(&sd, &m, 0.25, &[0.5 * floor], &quad).is_err());
    assert!(perimeter_via_mollification(&sd, &m, 0.25, &[floor, 2.0 * floor], &quad).is_err());
}

#[test]
fn perimeter_scales_on_paired_grids() {
    let base = GridSpec::grushin_plane(32, 2.0);
    let set = boxed([0.1, 0.0], [0.5, 0.4]);
    let quad = QuadratureSpec::new(1e-8, 1e6, 16);
    let (g1, s1) = setup(base.clone());
    let m1 = mask(&g1, &set);
    for s in [0.1, 0.25, 0.4] {
        let p1 = perimeter_star(&s1, &m1, s, &quad).unwrap().value;
        for lambda in [0.75, 1.5] {
            let (g2, s2) = setup(base.dilated(lambda));
            let m2 = mask(&g2, &SetSpec::dilate(lambda, set.clone()));
            assert_eq!(m1.count(), m2.count());
            let p2 = perimeter_star(&s2, &m2, s, &quad).unwrap().value;
            let slope = (p2 / p1).ln() / f64::ln(lambda);
            let want = 3.0 - 2.0 * s;
            assert!((slope / want - 1.0).abs() < 0.03, "s={s} λ={lambda}: {slope}");
        }
    }
}


#[test]
fn defect_is_symmetric_under_complementation() {
    let (g, sd) = plane(32);
    let inside = SetMask::from_indicator(g.interior_mask(1.0), g.cell_volume());
    let e = mask(&g, &boxed([0.2, 0.0], [0.4, 0.3]));
    let comp = SetMask::from_indicator(
        inside.indicator.iter().zip(&e.indicator).map(|(a, b)| *a && !*b).collect(),
        g.cell_volume(),
    );
    let ts = log_space(1e-4, 1.0, 13);
    let de = indicator_defects(&sd, &e, &ts, DefectRoute::HeatApply);
    let dc = indicator_defects(&sd, &comp, &ts, DefectRoute::HeatApply);
    let di = indicator_defects(&sd, &inside, &ts, DefectRoute::HeatApply);
    for k in 0..ts.len() {
        assert!((de[k] - dc[k]).abs() <= di[k] + 1e-12, "t={}", ts[k]);
    }
}

#[test]
fn sup_perimeter_is_dominated_by_the_integral() {
    let (g, sd) = plane(32);
    let quad = QuadratureSpec::default();
    let ts = log_space(1e-5, 1e2, 57);
    for set in [boxed([0.0, 0.0], [0.5, 0.5]), boxed([0.5, 0.3], [0.3, 0.7])] {
        let m = mask(&g, &set);
        for s in [0.1, 0.25, 0.4] {
            let inf = perimeter_infty(&sd, &m, s, &ts).unwrap();
            let star = perimeter_star(&sd, &m, s, &quad).unwrap().value;
            assert!(inf > 0.0 && inf < star, "s={s}: {inf} vs {star}");
        }
    }
}

#[test]
fn small_s_limit_on_unit_box() {
    let (g, sd) = plane(48);
    let m = mask(&g, &boxed([0.0, 0.0], [0.5, 0.5]));
    let quad = QuadratureSpec::default();
    let scan = small_s_limit_scan(&sd, &m, &[0.2, 0.1, 0.05], &quad).unwrap();
    assert!(rel(scan.extrapolated, scan.target) < 0.1, "{scan:?}");
    let longer = QuadratureSpec {
        t_max: 2.0 * quad.t_max,
        ..quad.clone()
    };
    let again = small_s_limit_scan(&sd, &m, &[0.2, 0.1, 0.05], &longer).unwrap();
    assert!(rel(again.extrapolated, scan.extrapolated) < 0.02);
    let dropped = QuadratureSpec {
        tail_policy: TailPolicy::Drop,
        ..quad
    };
    assert!(small_s_limit_scan(&sd, &m, &[0.2, 0.1], &dropped).is_err());
}

#[test]
fn half_limit_sandwich_on_a_box() {
    let (g, sd) = plane(48);
    let m = mask(&g, &boxed([0.0, 0.0], [0.6, 0.5]));
    let quad = QuadratureSpec::default();
    let t_res = 4.0 * g.max_spacing().powi(2);
    let r = half_limit_bracket(&sd, &m, &[0.3, 0.4, 0.45, 0.48], t_res, &quad).unwrap();
    let sw = &r.sandwich;
    for i in 0..sw.values.len() {
        assert!(sw.values[i] >= 0.9 * sw.lower[i] && sw.values[i] <= 1.1 * sw.upper[i], "{sw:?}");
    }
    assert!(r.plateau_spread < 1.2, "{}", r.plateau_spread);
}

#[test]
fn isoperimetric_ratios_and_sobolev_route() {
    let (g, sd) = plane(32);
    let quad = QuadratureSpec::default();
    let ts = log_space(1e-5, 1e2, 57);
    let specs = [
        ("box_a", boxed([0.0, 0.0], [0.5, 0.5])),
        ("box_b", boxed([0.0, 0.0], [0.8, 0.3])),
        ("box_c", boxed([0.0, 0.0], [0.3, 0.9])),
    ];
    let family: Vec<(String, SetMask)> = specs.iter().map(|(l, s)| (l.to_string(), mask(&g, s))).collect();
    for s in [0.1, 0.25, 0.4] {
        let scan = isoperimetric_scan(&sd, &family, s, &quad, &ts).unwrap();
        assert!((scan.exponent - (3.0 - 2.0 * s) / 3.0).abs() < 1e-15);
        assert!(scan.rows.iter().all(|r| r.ratio_star > 0.0 && r.ratio_ls > 0.0 && r.ratio_inf > 0.0));
        // Nested sets from the family obey the Sobolev-route inequality.
        let small = mask(&g, &boxed([0.0, 0.0], [0.3, 0.3]));
        let mut with_small = family.clone();
        with_small.push(("small".into(), small.clone()));
        let scan = isoperimetric_scan(&sd, &with_small, s, &quad, &ts).unwrap();
        let route = sobolev_route_check(&sd, &[&family[0].1, &small], s, &quad, scan.min_star).unwrap();
        assert!(route.holds, "{route:?}");
    }
    let empty = vec![("none".to_string(), SetMask::from_indicator(vec![false; g.len()], g.cell_volume()))];
    assert!(isoperimetric_scan(&sd, &empty, 0.25, &quad, &ts).is_err());
}

#[test]
fn boundary_sets_warn() {
    let (g, sd) = plane(24);
    let m = mask(&g, &boxed([1.8, 0.0], [0.3, 0.3]));
    let r = perimeter_star(&sd, &m, 0.25, &QuadratureSpec::default()).unwrap();
    assert!(r.warning.is_some());
    let inner = mask(&g, &boxed([0.0, 0.0], [0.3, 0.3]));
    assert!(truncation_warning(&g, &inner).is_none());
}
