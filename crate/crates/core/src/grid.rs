//! Tensor grids on a truncated box in R^m x R^k, sampling, quadrature and
//! rasterization of analytic sets.
//!
//! Nodes are interior nodes of a Dirichlet layout: on an axis with half-width
//! `H` and `N` points the coordinates are `-H + i*h` for `i = 1..=N` with
//! `h = 2H/(N+1)`. Node indices are row-major with axis 0 slowest, so the x
//! axes come first and a node index factors as `ix * ny + iy`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub half_width: Vec<f64>,
    pub points: Vec<usize>,
}

impl GridSpec {
    /// Grushin plane (m = k = 1, alpha = 1) on a square box.
    pub fn grushin_plane(points: usize, half_width: f64) -> Self {
        GridSpec {
            m: 1,
            k: 1,
            alpha: 1.0,
            half_width: vec![half_width; 2],
            points: vec![points; 2],
        }
    }

    pub fn n(&self) -> usize {
        self.m + self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::config("grid.m", "must be >= 1"));
        }
        if self.k < 1 {
            return Err(Error::config("grid.k", "must be >= 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("grid.alpha", "must be a finite number >= 0"));
        }
        let n = self.n();
        if self.half_width.len() != n {
            return Err(Error::config(
                "grid.half_width",
                format!("expected {n} entries, got {}", self.half_width.len()),
            ));
        }
        if self.points.len() != n {
            return Err(Error::config(
                "grid.points",
                format!("expected {n} entries, got {}", self.points.len()),
            ));
        }
        for (i, &h) in self.half_width.iter().enumerate() {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("grid.half_width[{i}]"), "must be > 0"));
            }
        }
        for (i, &p) in self.points.iter().enumerate() {
            if p < 3 {
                return Err(Error::config(format!("grid.points[{i}]"), "must be >= 3"));
            }
        }
        Ok(())
    }

    /// Homogeneous dimension Q = m + (alpha + 1) k.
    pub fn hom_dimension(&self) -> f64 {
        self.m as f64 + (self.alpha + 1.0) * self.k as f64
    }

    /// Paired grid for a dilation by `lambda`: x half-widths scale by lambda,
    /// y half-widths by lambda^(alpha+1), node counts are unchanged.
    pub fn dilated(&self, lambda: f64) -> GridSpec {
        let mut out = self.clone();
        let ly = lambda.powf(self.alpha + 1.0);
        for (i, h) in out.half_width.iter_mut().enumerate() {
            *h *= if i < self.m { lambda } else { ly };
        }
        out
    }

    pub fn with_alpha(&self, alpha: f64) -> GridSpec {
        GridSpec {
            alpha,
            ..self.clone()
        }
    }
}

/// Homogeneous dimension of a spec; free-function form of [`GridSpec::hom_dimension`].
pub fn hom_dimension(spec: &GridSpec) -> f64 {
    spec.hom_dimension()
}

#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    h: Vec<f64>,
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
    nx: usize,
    ny: usize,
    cell_volume: f64,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n();
        let mut h = Vec::with_capacity(n);
        let mut axes = Vec::with_capacity(n);
        for i in 0..n {
            let pts = spec.points[i];
            let hw = spec.half_width[i];
            let step = 2.0 * hw / (pts as f64 + 1.0);
            h.push(step);
            axes.push((1..=pts).map(|j| -hw + j as f64 * step).collect::<Vec<_>>());
        }
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * spec.points[i + 1];
        }
        let len = spec.points.iter().product();
        let nx = spec.points[..spec.m].iter().product();
        let ny = spec.points[spec.m..].iter().product();
        let cell_volume = h.iter().product();
        Ok(Grid {
            spec,
            h,
            axes,
            strides,
            len,
            nx,
            ny,
            cell_volume,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn m(&self) -> usize {
        self.spec.m
    }
    pub fn k(&self) -> usize {
        self.spec.k
    }
    pub fn n_axes(&self) -> usize {
        self.spec.n()
    }
    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }
    /// Number of distinct x-positions (product of x-axis point counts).
    pub fn nx(&self) -> usize {
        self.nx
    }
    /// Number of distinct y-positions (product of y-axis point counts).
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn spacing(&self) -> &[f64] {
        &self.h
    }
    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }
    pub fn hom_dimension(&self) -> f64 {
        self.spec.hom_dimension()
    }
    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.spec.points[axis]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.n_axes()).map(|a| self.axis_index(node, a)).collect()
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coord(&self, node: usize, axis: usize) -> f64 {
        self.axes[axis][self.axis_index(node, axis)]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.n_axes()).map(|a| self.coord(node, a)).collect()
    }

    /// |x|^2 of the x-part of a node.
    pub fn x_norm_sq(&self, node: usize) -> f64 {
        (0..self.spec.m).map(|a| self.coord(node, a).powi(2)).sum()
    }

    /// Index of the x-position of a node (`node / ny`).
    pub fn x_index(&self, node: usize) -> usize {
        node / self.ny
    }

    /// Node whose coordinates are closest to `point`, clamped into the grid.
    pub fn nearest_node(&self, point: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.n_axes())
            .map(|a| {
                let hw = self.spec.half_width[a];
                let f = (point[a] + hw) / self.h[a] - 1.0;
                (f.round().max(0.0) as usize).min(self.spec.points[a] - 1)
            })
            .collect();
        self.node(&idx)
    }

    /// Euclidean distance from a node to the box boundary (min over axes).
    pub fn boundary_distance(&self, node: usize) -> f64 {
        (0..self.n_axes())
            .map(|a| self.spec.half_width[a] - self.coord(node, a).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Nodes at distance >= margin from the boundary.
    pub fn interior_mask(&self, margin: f64) -> Vec<bool> {
        (0..self.len)
            .map(|g| self.boundary_distance(g) >= margin)
            .collect()
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        let mut buf = vec![0.0; self.n_axes()];
        (0..self.len)
            .map(|g| {
                for (a, b) in buf.iter_mut().enumerate() {
                    *b = self.coord(g, a);
                }
                f(&buf)
            })
            .collect()
    }

    /// Midpoint-rule integral.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.cell_volume * u.iter().sum::<f64>()
    }

    /// Discrete inner product `cell_volume * sum u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.cell_volume * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// L^p norm; `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, u: &[f64], p: f64) -> f64 {
        lp_norm(u, p, self.cell_volume)
    }
}

/// L^p norm of node values with uniform weight `cell_volume`.
pub fn lp_norm(u: &[f64], p: f64, cell_volume: f64) -> f64 {
    if p.is_infinite() {
        return u.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return cell_volume * u.iter().map(|v| v.abs()).sum::<f64>();
    }
    if p == 2.0 {
        return (cell_volume * u.iter().map(|v| v * v).sum::<f64>()).sqrt();
    }
    (cell_volume * u.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Analytic set descriptions. Coordinates are full (x, y) points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    EuclideanBox {
        center: Vec<f64>,
        half_sides: Vec<f64>,
    },
    EuclideanBall {
        center: Vec<f64>,
        radius: f64,
    },
    MetricBall {
        center: Vec<f64>,
        radius: f64,
    },
    Dilate {
        lambda: f64,
        inner: Box<SetSpec>,
    },
    Superlevel {
        function_id: String,
        threshold: f64,
    },
}

impl SetSpec {
    pub fn dilate(lambda: f64, inner: SetSpec) -> SetSpec {
        SetSpec::Dilate {
            lambda,
            inner: Box::new(inner),
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        match self {
            SetSpec::EuclideanBox { half_sides, .. } => {
                if half_sides.iter().any(|h| !(*h >= 0.0)) {
                    return Err(Error::config(format!("{key}.half_sides"), "must be >= 0"));
                }
            }
            SetSpec::EuclideanBall { radius, .. } | SetSpec::MetricBall { radius, .. } => {
                if !(*radius >= 0.0) {
                    return Err(Error::config(format!("{key}.radius"), "must be >= 0"));
                }
            }
            SetSpec::Dilate { lambda, inner } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::config(format!("{key}.lambda"), "must be > 0"));
                }
                inner.validate(&format!("{key}.inner"))?;
            }
            SetSpec::Superlevel { .. } => {}
        }
        Ok(())
    }

    /// Pushes dilations inward where the dilate is again an analytic set of the
    /// same kind, and composes nested dilations into one.
    ///
    /// Boxes and metric balls are closed under `delta_lambda`; Euclidean balls
    /// and superlevel sets keep an explicit dilation wrapper.
    pub fn normalized(&self, m: usize, alpha: f64) -> SetSpec {
        match self {
            SetSpec::Dilate { lambda, inner } => {
                let mut lam = *lambda;
                let mut cur = inner.normalized(m, alpha);
                while let SetSpec::Dilate { lambda: l2, inner: i2 } = cur {
                    lam *= l2;
                    cur = *i2;
                }
                let ly = lam.powf(alpha + 1.0);
                let scale = |v: &[f64]| -> Vec<f64> {
                    v.iter()
                        .enumerate()
                        .map(|(i, c)| if i < m { c * lam } else { c * ly })
                        .collect()
                };
                match cur {
                    SetSpec::EuclideanBox { center, half_sides } => SetSpec::EuclideanBox {
                        center: scale(&center),
                        half_sides: scale(&half_sides),
                    },
                    SetSpec::MetricBall { center, radius } => SetSpec::MetricBall {
                        center: scale(&center),
                        radius: radius * lam,
                    },
                    other => SetSpec::Dilate {
                        lambda: lam,
                        inner: Box::new(other),
                    },
                }
            }
            other => other.clone(),
        }
    }
}

/// Auxiliary fields needed by metric balls and superlevel sets.
pub trait AuxFields {
    /// Distance field d(center, .) on the grid, if available.
    fn distance_from(&self, center: &[f64]) -> Option<Vec<f64>>;
    /// Named grid function, if available.
    fn function(&self, id: &str) -> Option<Vec<f64>>;
}

/// A single precomputed field, used either as the distance field of the one
/// metric ball being rasterized or as the function of a superlevel set.
pub struct SingleField<'a>(pub &'a [f64]);

impl AuxFields for SingleField<'_> {
    fn distance_from(&self, _center: &[f64]) -> Option<Vec<f64>> {
        Some(self.0.to_vec())
    }
    fn function(&self, _id: &str) -> Option<Vec<f64>> {
        Some(self.0.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetMask {
    pub indicator: Vec<bool>,
    pub measure: f64,
    pub cell_volume: f64,
}

impl SetMask {
    pub fn from_indicator(indicator: Vec<bool>, cell_volume: f64) -> Self {
        let count = indicator.iter().filter(|b| **b).count();
        SetMask {
            indicator,
            measure: count as f64 * cell_volume,
            cell_volume,
        }
    }

    pub fn count(&self) -> usize {
        self.indicator.iter().filter(|b| **b).count()
    }

    /// 0/1 grid function.
    pub fn as_field(&self) -> Vec<f64> {
        self.indicator
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Rasterizes a set by node-center membership.
pub fn rasterize(spec: &SetSpec, grid: &Grid, aux: Option<&dyn AuxFields>) -> Result<SetMask> {
    let norm = spec.normalized(grid.m(), grid.alpha());
    let ind = membership(&norm, grid, aux)?;
    Ok(SetMask::from_indicator(ind, grid.cell_volume()))
}

fn membership(spec: &SetSpec, grid: &Grid, aux: Option<&dyn AuxFields>) -> Result<Vec<bool>> {
    let n = grid.n_axes();
    let check_len = |v: &[f64], key: &str| -> Result<()> {
        if v.len() != n {
            Err(Error::config(key, format!("expected {n} coordinates")))
        } else {
            Ok(())
        }
    };
    match spec {
        SetSpec::Dilate { lambda, inner } => {
            // Only sets that are not closed under dilation reach this branch.
            let ly = lambda.powf(grid.alpha() + 1.0);
            let m = grid.m();
            let pred = point_predicate(inner, n)?;
            let mut buf = vec![0.0; n];
            Ok((0..grid.len())
                .map(|g| {
                    for (a, b) in buf.iter_mut().enumerate() {
                        let c = grid.coord(g, a);
                        *b = if a < m { c / lambda } else { c / ly };
                    }
                    pred(&buf)
                })
                .collect())
        }
        SetSpec::MetricBall { center, radius } => {
            check_len(center, "set.center")?;
            let field = aux
                .and_then(|a| a.distance_from(center))
                .ok_or_else(|| Error::config("set.metric_ball", "distance field required"))?;
            if field.len() != grid.len() {
                return Err(Error::config("set.metric_ball", "distance field has wrong length"));
            }
            Ok(field.iter().map(|d| *d < *radius).collect())
        }
        SetSpec::Superlevel {
            function_id,
            threshold,
        } => {
            let f = aux
                .and_then(|a| a.function(function_id))
                .ok_or_else(|| {
                    Error::config("set.superlevel", format!("function `{function_id}` required"))
                })?;
            if f.len() != grid.len() {
                return Err(Error::config("set.superlevel", "function has wrong length"));
            }
            Ok(f.iter().map(|v| *v > *threshold).collect())
        }
        other => {
            let pred = point_predicate(other, n)?;
            Ok(grid.sample(|p| if pred(p) { 1.0 } else { 0.0 })
                .into_iter()
                .map(|v| v > 0.5)
                .collect())
        }
    }
}

type Predicate = Box<dyn Fn(&[f64]) -> bool>;

fn point_predicate(spec: &SetSpec, n: usize) -> Result<Predicate> {
    match spec.clone() {
        SetSpec::EuclideanBox { center, half_sides } => {
            if center.len() != n || half_sides.len() != n {
                return Err(Error::config("set.euclidean_box", format!("expected {n} coordinates")));
            }
            Ok(Box::new(move |p: &[f64]| {
                p.iter()
                    .zip(center.iter().zip(&half_sides))
                    .all(|(x, (c, h))| (x - c).abs() <= *h)
            }))
        }
        SetSpec::EuclideanBall { center, radius } => {
            if center.len() != n {
                return Err(Error::config("set.euclidean_ball", format!("expected {n} coordinates")));
            }
            Ok(Box::new(move |p: &[f64]| {
                p.iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum::<f64>() <= radius * radius
            }))
        }
        _ => Err(Error::config(
            "set",
            "only boxes and Euclidean balls can be tested at off-grid points",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_interior() {
        let g = Grid::new(GridSpec::grushin_plane(64, 2.0)).unwrap();
        let h = 4.0 / 65.0;
        assert!((g.spacing()[0] - h).abs() < 1e-15);
        assert!((g.axis(0)[0] + 2.0 - h).abs() < 1e-14);
        assert!((g.axis(0)[63] - 2.0 + h).abs() < 1e-14);
        assert_eq!(g.nx(), 64);
        assert_eq!(g.len(), 4096);
        let node = g.node(&[3, 17]);
        assert_eq!(node, 3 * 64 + 17);
        assert_eq!(g.multi_index(node), vec![3, 17]);
        assert_eq!(g.x_index(node), 3);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = GridSpec::grushin_plane(2, 1.0);
        assert!(matches!(s.validate(), Err(Error::Config { key, .. }) if key == "grid.points[0]"));
        s.points = vec![4, 4];
        s.half_width = vec![1.0, -1.0];
        assert!(matches!(s.validate(), Err(Error::Config { key, .. }) if key == "grid.half_width[1]"));
    }

    #[test]
    fn nearest_node_roundtrip() {
        let g = Grid::new(GridSpec::grushin_plane(17, 1.0)).unwrap();
        for node in [0, 5, 100, 288] {
            assert_eq!(g.nearest_node(&g.coords(node)), node);
        }
        assert_eq!(g.coords(g.nearest_node(&[0.0, 0.0])), vec![0.0, 0.0]);
    }

    #[test]
    fn dilated_spec_scales_anisotropically() {
        let s = GridSpec::grushin_plane(8, 2.0).dilated(2.0);
        assert_eq!(s.half_width, vec![4.0, 8.0]);
    }
}
