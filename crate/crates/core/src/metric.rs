//! Carnot-Carathéodory distance by fast sweeping on the degenerate eikonal
//! equation `|∇_x u|² + |x|^{2α} |∇_y u|² = 1`, metric balls and the
//! ball-volume model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::{gauss_legendre, linear_fit};

pub const MAX_SWEEP_ROUNDS: usize = 500;
pub const SWEEP_TOL: f64 = 1e-10;
/// Index radius of the near-source seeding.
pub const SEED_RADIUS: usize = 8;

#[derive(Clone, Debug)]
pub struct DistanceField {
    pub source: usize,
    pub values: Vec<f64>,
    /// Completed rounds of 2^n directional sweeps.
    pub sweeps: usize,
    /// Largest change in the final round.
    pub max_update: f64,
}

/// Per-node neighbour table and update weights, shared by all sources.
pub struct Sweeper<'a> {
    grid: &'a Grid,
    /// For node g and axis a: (lower neighbour, upper neighbour) or usize::MAX.
    neighbours: Vec<[usize; 2]>,
    /// Weight per node and axis: 1/h² on x axes, c(x)/h² on y axes.
    weights: Vec<f64>,
    orders: Vec<Vec<usize>>,
}

impl<'a> Sweeper<'a> {
    pub fn new(grid: &'a Grid) -> Self {
        let n_axes = grid.n_axes();
        let m = grid.m();
        let alpha = grid.alpha();
        let pts = &grid.spec().points;
        let h = grid.spacing();
        let len = grid.len();
        let mut neighbours = Vec::with_capacity(len * n_axes);
        let mut weights = Vec::with_capacity(len * n_axes);
        for g in 0..len {
            let c = if alpha == 0.0 { 1.0 } else { grid.x_norm_sq(g).powf(alpha) };
            for a in 0..n_axes {
                let i = grid.axis_index(g, a);
                let st = grid.stride(a);
                let lo = if i > 0 { g - st } else { usize::MAX };
                let hi = if i + 1 < pts[a] { g + st } else { usize::MAX };
                neighbours.push([lo, hi]);
                weights.push(if a < m { 1.0 } else { c } / (h[a] * h[a]));
            }
        }
        let orders = (0..1usize << n_axes)
            .map(|mask| {
                (0..len)
                    .map(|k| {
                        let mut node = 0;
                        for (a, &n_a) in pts.iter().enumerate().take(n_axes) {
                            let mut i = grid.axis_index(k, a);
                            if mask >> a & 1 == 1 {
                                i = n_a - 1 - i;
                            }
                            node += i * grid.stride(a);
                        }
                        node
                    })
                    .collect()
            })
            .collect();
        Sweeper {
            grid,
            neighbours,
            weights,
            orders,
        }
    }

    /// Godunov update: the root of `sum_a w_a (u - a_a)_+² = 1`.
    #[inline]
    fn update(&self, u: &[f64], g: usize) -> f64 {
        let n_axes = self.grid.n_axes();
        let mut terms: [(f64, f64); 8] = [(0.0, 0.0); 8];
        let mut cnt = 0;
        for a in 0..n_axes {
            let w = self.weights[g * n_axes + a];
            if w == 0.0 {
                continue;
            }
            let [lo, hi] = self.neighbours[g * n_axes + a];
            let vlo = if lo == usize::MAX { f64::INFINITY } else { u[lo] };
            let vhi = if hi == usize::MAX { f64::INFINITY } else { u[hi] };
            let v = vlo.min(vhi);
            if v.is_finite() {
                terms[cnt] = (v, w);
                cnt += 1;
            }
        }
        if cnt == 0 {
            return f64::INFINITY;
        }
        let t = &mut terms[..cnt];
        t.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (mut sa, mut sb, mut sc) = (0.0, 0.0, -1.0);
        let mut val = f64::INFINITY;
        for (k, &(v, w)) in t.iter().enumerate() {
            sa += w;
            sb += w * v;
            sc += w * v * v;
            let disc = sb * sb - sa * sc;
            val = (sb + disc.max(0.0).sqrt()) / sa;
            if k + 1 == t.len() || val <= t[k + 1].0 {
                break;
            }
        }
        val
    }

    /// Seeds nodes within `SEED_RADIUS` index steps of the source with the
    /// local-metric length of the straight segment. These are upper bounds on
    /// the distance that the sweeps may still lower; they remove most of the
    /// point-source error of the first-order scheme.
    fn seed_near_source(&self, u: &mut [f64], source: usize) {
        let grid = self.grid;
        let n_axes = grid.n_axes();
        let pts = &grid.spec().points;
        let idx = grid.multi_index(source);
        let here = grid.coords(source);
        let r = SEED_RADIUS as i64;
        let width = (2 * r + 1) as usize;
        let mut off = vec![0usize; n_axes];
        'outer: loop {
            let mut nb = vec![0usize; n_axes];
            let mut inside = true;
            for a in 0..n_axes {
                let j = idx[a] as i64 + off[a] as i64 - r;
                if j < 0 || j >= pts[a] as i64 {
                    inside = false;
                    break;
                }
                nb[a] = j as usize;
            }
            if inside {
                let node = grid.node(&nb);
                if node != source {
                    let l = segment_length(&here, &grid.coords(node), grid.m(), grid.alpha());
                    u[node] = u[node].min(l);
                }
            }
            let mut a = 0;
            loop {
                if a == n_axes {
                    break 'outer;
                }
                off[a] += 1;
                if off[a] < width {
                    break;
                }
                off[a] = 0;
                a += 1;
            }
        }
    }

    pub fn solve(&self, source: usize) -> Result<DistanceField> {
        let len = self.grid.len();
        if self.grid.n_axes() > 8 {
            return Err(Error::config("grid.points", "the eikonal solver supports at most 8 axes"));
        }
        if source >= len {
            return Err(Error::config("source", format!("node {source} is outside the grid")));
        }
        let mut u = vec![f64::INFINITY; len];
        u[source] = 0.0;
        self.seed_near_source(&mut u, source);
        let mut rounds = 0;
        let mut last = f64::INFINITY;
        while rounds < MAX_SWEEP_ROUNDS {
            rounds += 1;
            let mut max_up: f64 = 0.0;
            for order in &self.orders {
                for &g in order {
                    if g == source {
                        continue;
                    }
                    let cand = self.update(&u, g);
                    if cand < u[g] {
                        let change = if u[g].is_finite() { u[g] - cand } else { f64::INFINITY };
                        max_up = max_up.max(change);
                        u[g] = cand;
                    }
                }
            }
            last = max_up;
            if max_up < SWEEP_TOL {
                break;
            }
        }
        if last >= SWEEP_TOL {
            return Err(Error::Numerical(format!(
                "fast sweeping did not converge from source {source}: last update {last:.3e} after {rounds} rounds"
            )));
        }
        Ok(DistanceField {
            source,
            values: u,
            sweeps: rounds,
            max_update: last,
        })
    }
}

/// Distance field from one source node.
pub fn cc_distance(grid: &Grid, source: usize) -> Result<DistanceField> {
    Sweeper::new(grid).solve(source)
}

/// Distance fields from many sources, solved in parallel.
pub fn cc_distances(grid: &Grid, sources: &[usize]) -> Result<Vec<DistanceField>> {
    let sw = Sweeper::new(grid);
    sources.par_iter().map(|&s| sw.solve(s)).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BallVolume {
    pub volume: f64,
    /// Set when the ball reaches the outermost node layer.
    pub touches_boundary: bool,
}

/// `cell_volume * #{g : d(source, g) < r}`.
pub fn ball_volume(grid: &Grid, field: &DistanceField, r: f64) -> BallVolume {
    let h = grid.max_spacing();
    let mut count = 0usize;
    let mut touches = false;
    for (g, d) in field.values.iter().enumerate() {
        if *d < r {
            count += 1;
            if grid.boundary_distance(g) < 1.5 * h {
                touches = true;
            }
        }
    }
    BallVolume {
        volume: count as f64 * grid.cell_volume(),
        touches_boundary: touches,
    }
}

/// Ball-volume model `r^n (r + |x|)^{kα}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct VolumeModel;

impl VolumeModel {
    pub fn model(&self, n: usize, k: usize, alpha: f64, x_norm: f64, r: f64) -> f64 {
        r.powi(n as i32) * (r + x_norm).powf(k as f64 * alpha)
    }

    pub fn at_node(&self, grid: &Grid, node: usize, r: f64) -> f64 {
        self.model(grid.n_axes(), grid.k(), grid.alpha(), grid.x_norm_sq(node).sqrt(), r)
    }
}

/// Log-log slope of the ball volume against r.
pub fn volume_scaling_fit(grid: &Grid, field: &DistanceField, r_grid: &[f64]) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = r_grid
        .iter()
        .map(|&r| (r.ln(), ball_volume(grid, field, r).volume.ln()))
        .unzip();
    linear_fit(&xs, &ys).0
}

/// Local-metric length of the straight segment from `a` to `b`:
/// `∫ sqrt(|dx|² + |dy|² / |x(τ)|^{2α}) dτ`, Gauss-Legendre in τ.
pub fn segment_length(a: &[f64], b: &[f64], m: usize, alpha: f64) -> f64 {
    let dx2: f64 = (0..m).map(|i| (b[i] - a[i]).powi(2)).sum();
    let dy2: f64 = (m..a.len()).map(|i| (b[i] - a[i]).powi(2)).sum();
    if dy2 == 0.0 || alpha == 0.0 {
        return (dx2 + dy2).sqrt();
    }
    let (gx, gw) = gauss_legendre(8);
    gx.iter()
        .zip(&gw)
        .map(|(z, w)| {
            let tau = 0.5 * (z + 1.0);
            let x2: f64 = (0..m).map(|i| (a[i] + tau * (b[i] - a[i])).powi(2)).sum();
            let c = x2.powf(alpha);
            if c == 0.0 {
                f64::INFINITY
            } else {
                0.5 * w * (dx2 + dy2 / c).sqrt()
            }
        })
        .sum()
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Dijkstra distances on the (3^n - 1)-connected node graph of `grid` with
/// local-metric edge lengths; the graph-shortest-path oracle for the eikonal
/// solver.
pub fn graph_distance(grid: &Grid, source: usize) -> Vec<f64> {
    let n_axes = grid.n_axes();
    let pts = &grid.spec().points;
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n_axes as u32))
        .map(|code| {
            let mut c = code;
            (0..n_axes)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect()
        })
        .filter(|o: &Vec<i64>| o.iter().any(|d| *d != 0))
        .collect();
    let mut dist = vec![f64::INFINITY; grid.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, g)) = heap.pop() {
        if d > dist[g] {
            continue;
        }
        let idx = grid.multi_index(g);
        let here = grid.coords(g);
        'next: for off in &offsets {
            let mut nb = vec![0usize; n_axes];
            for a in 0..n_axes {
                let j = idx[a] as i64 + off[a];
                if j < 0 || j >= pts[a] as i64 {
                    continue 'next;
                }
                nb[a] = j as usize;
            }
            let node = grid.node(&nb);
            let w = segment_length(&here, &grid.coords(node), grid.m(), grid.alpha());
            let nd = d + w;
            if nd < dist[node] {
                dist[node] = nd;
                heap.push(HeapItem(nd, node));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn update_solves_two_term_equation() {
        let g = Grid::new(GridSpec::grushin_plane(5, 1.0).with_alpha(0.0)).unwrap();
        let sw = Sweeper::new(&g);
        let mut u = vec![f64::INFINITY; g.len()];
        let c = g.node(&[2, 2]);
        u[g.node(&[1, 2])] = 0.0;
        u[g.node(&[2, 1])] = 0.0;
        let h = g.spacing()[0];
        // 2 (u/h)² = 1
        assert!((sw.update(&u, c) - h / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn segment_length_along_x_is_euclidean() {
        assert_eq!(segment_length(&[0.0, 1.0], &[0.3, 1.0], 1, 1.0), 0.3);
        let l = segment_length(&[1.0, 0.0], &[1.0, 0.1], 1, 1.0);
        assert!((l - 0.1).abs() < 1e-12);
    }
}
