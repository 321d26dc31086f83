//! The discretized Grushin-Laplace operator `L = -Δ_x - |x|^{2α} Δ_y`, its
//! spectral decomposition and the functional calculus built on it
//! (fractional powers by two routes, Riesz potentials, a Krylov fallback).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::LogRule;

/// Node budget for the dense eigensolve.
pub const DENSE_BUDGET: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientRule {
    NodeValue,
    #[default]
    CellAverage,
}

/// Compressed sparse row storage for a square matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn mul_vec(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|i| self.vals[i] * u[self.cols[i]])
                    .sum()
            })
            .collect()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&i| self.cols[i] == c)
            .map_or(0.0, |i| self.vals[i])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[i])] += self.vals[i];
            }
        }
        m
    }

    /// Largest |A_rc - A_cr| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                worst = worst.max((self.vals[i] - self.get(self.cols[i], r)).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct GrushinOperator {
    grid: Arc<Grid>,
    rule: CoefficientRule,
    /// |x|^{2α} (or its cell average) per x-position.
    coeff_x: Vec<f64>,
    matrix: CsrMatrix,
}

/// Cell average of |x|^{2α} over the x-cell centred at `x`.
fn cell_average(x: &[f64], h: &[f64], alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    if x.len() == 1 {
        let f = |z: f64| z * z.abs().powf(2.0 * alpha) / (2.0 * alpha + 1.0);
        return (f(x[0] + 0.5 * h[0]) - f(x[0] - 0.5 * h[0])) / h[0];
    }
    // Tensor Gauss-Legendre; exact enough for the smooth-away-from-0 integrand.
    let (gx, gw) = crate::quadrature::gauss_legendre(8);
    let m = x.len();
    let mut total = 0.0;
    let mut idx = vec![0usize; m];
    loop {
        let mut w = 1.0;
        let mut r2 = 0.0;
        for a in 0..m {
            w *= 0.5 * gw[idx[a]];
            let z = x[a] + 0.5 * h[a] * gx[idx[a]];
            r2 += z * z;
        }
        total += w * r2.powf(alpha);
        let mut a = 0;
        loop {
            if a == m {
                return total;
            }
            idx[a] += 1;
            if idx[a] < gx.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

impl GrushinOperator {
    pub fn assemble(grid: Arc<Grid>, rule: CoefficientRule) -> Self {
        let m = grid.m();
        let n_axes = grid.n_axes();
        let alpha = grid.alpha();
        let h = grid.spacing().to_vec();
        let ny = grid.ny();
        let coeff_x: Vec<f64> = (0..grid.nx())
            .map(|ix| {
                let node = ix * ny;
                let x: Vec<f64> = (0..m).map(|a| grid.coord(node, a)).collect();
                match rule {
                    CoefficientRule::NodeValue => {
                        if alpha == 0.0 {
                            1.0
                        } else {
                            x.iter().map(|v| v * v).sum::<f64>().powf(alpha)
                        }
                    }
                    CoefficientRule::CellAverage => cell_average(&x, &h[..m], alpha),
                }
            })
            .collect();

        let n = grid.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n * (2 * n_axes + 1));
        let mut vals = Vec::with_capacity(n * (2 * n_axes + 1));
        row_ptr.push(0);
        let points = &grid.spec().points;
        for g in 0..n {
            let c = coeff_x[g / ny];
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * n_axes + 1);
            let mut diag = 0.0;
            for a in 0..n_axes {
                let w = if a < m { 1.0 } else { c } / (h[a] * h[a]);
                diag += 2.0 * w;
                let i = grid.axis_index(g, a);
                let st = grid.stride(a);
                if i > 0 {
                    entries.push((g - st, -w));
                }
                if i + 1 < points[a] {
                    entries.push((g + st, -w));
                }
            }
            entries.push((g, diag));
            entries.sort_by_key(|e| e.0);
            for (col, v) in entries {
                cols.push(col);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        GrushinOperator {
            grid,
            rule,
            coeff_x,
            matrix: CsrMatrix {
                row_ptr,
                cols,
                vals,
            },
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn rule(&self) -> CoefficientRule {
        self.rule
    }
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
    /// Coefficient per x-position.
    pub fn coefficient_x(&self) -> &[f64] {
        &self.coeff_x
    }
    /// Coefficient per node.
    pub fn coefficient_field(&self) -> Vec<f64> {
        let ny = self.grid.ny();
        (0..self.grid.len()).map(|g| self.coeff_x[g / ny]).collect()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }

    /// Dense x-operator `-Δ_x + mu * diag(c)` on the x-positions.
    fn x_block(&self, mu: f64) -> DMatrix<f64> {
        let g = &self.grid;
        let m = g.m();
        let nx = g.nx();
        let pts = &g.spec().points[..m];
        let h = &g.spacing()[..m];
        let mut strides = vec![1usize; m];
        for a in (0..m.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * pts[a + 1];
        }
        let mut b = DMatrix::zeros(nx, nx);
        for ix in 0..nx {
            let mut d = mu * self.coeff_x[ix];
            for a in 0..m {
                let w = 1.0 / (h[a] * h[a]);
                d += 2.0 * w;
                let i = (ix / strides[a]) % pts[a];
                if i > 0 {
                    b[(ix, ix - strides[a])] = -w;
                }
                if i + 1 < pts[a] {
                    b[(ix, ix + strides[a])] = -w;
                }
            }
            b[(ix, ix)] = d;
        }
        b
    }
}

/// Orthonormal eigenbasis of the 1-D Dirichlet Laplacian with `n` interior
/// points and spacing `h`: sine vectors and eigenvalues `4/h^2 sin^2(j pi / (2(n+1)))`.
pub fn sine_basis(n: usize, h: f64) -> (Vec<f64>, DMatrix<f64>) {
    let np1 = (n + 1) as f64;
    let values = (1..=n)
        .map(|j| 4.0 / (h * h) * (std::f64::consts::PI * j as f64 / (2.0 * np1)).sin().powi(2))
        .collect();
    let norm = (2.0 / np1).sqrt();
    let vectors = DMatrix::from_fn(n, n, |i, j| {
        norm * (std::f64::consts::PI * ((i + 1) * (j + 1)) as f64 / np1).sin()
    });
    (values, vectors)
}

/// Eigenpairs of the y-Laplacian on the y-axes (tensor product of sine bases),
/// ordered as the y-part of the node index.
fn y_modes(grid: &Grid) -> (Vec<f64>, DMatrix<f64>) {
    let m = grid.m();
    let mut values = vec![0.0];
    let mut vectors = DMatrix::from_element(1, 1, 1.0);
    for a in m..grid.n_axes() {
        let (va, ba) = sine_basis(grid.spec().points[a], grid.spacing()[a]);
        let (r1, r2) = (vectors.nrows(), ba.nrows());
        let kron = DMatrix::from_fn(r1 * r2, r1 * r2, |i, j| {
            vectors[(i / r2, j / r2)] * ba[(i % r2, j % r2)]
        });
        let mut nv = Vec::with_capacity(values.len() * va.len());
        for v1 in &values {
            for v2 in &va {
                nv.push(v1 + v2);
            }
        }
        values = nv;
        vectors = kron;
    }
    (values, vectors)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Count {
    All,
    Leading(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    /// Separable solve (exact y sine modes, dense x blocks).
    #[default]
    Separable,
    /// Dense eigensolve of the full matrix; the independent oracle.
    Dense,
}

#[derive(Clone, Debug)]
struct XBlock {
    vectors: DMatrix<f64>,
    /// Sorted position of each retained column.
    position: Vec<usize>,
}

#[derive(Clone, Debug)]
enum Basis {
    Dense(DMatrix<f64>),
    Separable {
        y_vectors: DMatrix<f64>,
        blocks: Vec<XBlock>,
    },
}

/// Eigenpairs of the discrete operator. Vectors are stored with unit
/// Euclidean norm; the eigenfunctions orthonormal under
/// `<u,v> = cell_volume * sum u_i v_i` are `vector / sqrt(cell_volume)`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    grid: Arc<Grid>,
    eigenvalues: Vec<f64>,
    basis: Basis,
}

pub fn eigendecompose(op: &GrushinOperator, count: Count, method: Method) -> Result<SpectralData> {
    let grid = op.grid.clone();
    let n = grid.len();
    let keep = match count {
        Count::All => n,
        Count::Leading(r) => {
            if r == 0 || r > n {
                return Err(Error::config("count", format!("leading count must be in 1..={n}")));
            }
            r
        }
    };
    match method {
        Method::Dense => {
            if n > DENSE_BUDGET {
                return Err(Error::config(
                    "count",
                    format!("{n} nodes exceed the dense budget of {DENSE_BUDGET}; use the separable solve"),
                ));
            }
            let dense = op.matrix.to_dense();
            let eig = SymmetricEigen::try_new(dense, 1e-15, 0).ok_or_else(|| {
                Error::Numerical("dense symmetric eigensolver did not converge".into())
            })?;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            order.truncate(keep);
            let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = DMatrix::from_fn(n, keep, |r, c| eig.eigenvectors[(r, order[c])]);
            let sd = SpectralData {
                grid,
                eigenvalues,
                basis: Basis::Dense(vectors),
            };
            Ok(sd)
        }
        Method::Separable => {
            let (mu, y_vectors) = y_modes(&grid);
            let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
            let mut raw: Vec<(Vec<f64>, DMatrix<f64>)> = Vec::with_capacity(mu.len());
            for (j, &mu_j) in mu.iter().enumerate() {
                let eig = SymmetricEigen::try_new(op.x_block(mu_j), 1e-15, 0).ok_or_else(|| {
                    Error::Numerical(format!("x-block eigensolver did not converge for y-mode {j}"))
                })?;
                let vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
                for (l, v) in vals.iter().enumerate() {
                    pairs.push((*v, j, l));
                }
                raw.push((vals, eig.eigenvectors));
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            pairs.truncate(keep);
            let mut slots: Vec<Vec<(usize, usize)>> = vec![Vec::new(); mu.len()];
            for (pos, &(_, j, l)) in pairs.iter().enumerate() {
                slots[j].push((l, pos));
            }
            let blocks = raw
                .into_iter()
                .zip(slots)
                .map(|((_, vecs), sl)| {
                    let vectors = DMatrix::from_fn(vecs.nrows(), sl.len(), |r, c| vecs[(r, sl[c].0)]);
                    XBlock {
                        vectors,
                        position: sl.iter().map(|s| s.1).collect(),
                    }
                })
                .collect();
            Ok(SpectralData {
                grid,
                eigenvalues: pairs.iter().map(|p| p.0).collect(),
                basis: Basis::Separable { y_vectors, blocks },
            })
        }
    }
}

impl SpectralData {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
    pub fn is_separable(&self) -> bool {
        matches!(self.basis, Basis::Separable { .. })
    }

    /// The y sine basis of a separable decomposition (columns unit-norm).
    pub fn y_vectors(&self) -> Option<&DMatrix<f64>> {
        match &self.basis {
            Basis::Separable { y_vectors, .. } => Some(y_vectors),
            Basis::Dense(_) => None,
        }
    }

    /// Retained x-block vectors of y-mode `j` with their sorted positions.
    /// Empty for a dense decomposition.
    pub fn block_columns(&self, j: usize) -> Vec<(usize, DVector<f64>)> {
        match &self.basis {
            Basis::Separable { blocks, .. } => blocks[j]
                .position
                .iter()
                .enumerate()
                .map(|(k, &pos)| (pos, blocks[j].vectors.column(k).into_owned()))
                .collect(),
            Basis::Dense(_) => Vec::new(),
        }
    }

    /// Euclidean coefficients `e_n . u` in eigenvalue order.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        match &self.basis {
            Basis::Dense(v) => (v.transpose() * DVector::from_column_slice(u)).as_slice().to_vec(),
            Basis::Separable { y_vectors, blocks } => {
                let (nx, ny) = (self.grid.nx(), self.grid.ny());
                let uh = DMatrix::from_row_slice(nx, ny, u) * y_vectors;
                let mut out = vec![0.0; self.len()];
                for (j, b) in blocks.iter().enumerate() {
                    if b.position.is_empty() {
                        continue;
                    }
                    let c = b.vectors.tr_mul(&uh.column(j));
                    for (k, &pos) in b.position.iter().enumerate() {
                        out[pos] = c[k];
                    }
                }
                out
            }
        }
    }

    /// `sum_n c_n e_n`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        match &self.basis {
            Basis::Dense(v) => (v * DVector::from_column_slice(c)).as_slice().to_vec(),
            Basis::Separable { y_vectors, blocks } => {
                let (nx, ny) = (self.grid.nx(), self.grid.ny());
                let mut uh = DMatrix::zeros(nx, ny);
                for (j, b) in blocks.iter().enumerate() {
                    if b.position.is_empty() {
                        continue;
                    }
                    let cj = DVector::from_iterator(b.position.len(), b.position.iter().map(|&p| c[p]));
                    uh.set_column(j, &(&b.vectors * cj));
                }
                // Row-major output of uh * S^T is the column-major storage of S * uh^T.
                let t = y_vectors * uh.transpose();
                t.as_slice().to_vec()
            }
        }
    }

    /// `f(L) u` restricted to the retained modes.
    pub fn apply_fn<F: Fn(f64) -> f64>(&self, u: &[f64], f: F) -> Vec<f64> {
        let mut c = self.coefficients(u);
        for (ci, l) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= f(*l);
        }
        self.synthesize(&c)
    }

    /// `f(L)` applied to coefficients already computed by [`Self::coefficients`].
    pub fn apply_fn_coeffs<F: Fn(f64) -> f64>(&self, c: &[f64], f: F) -> Vec<f64> {
        let scaled: Vec<f64> = c.iter().zip(&self.eigenvalues).map(|(ci, l)| ci * f(*l)).collect();
        self.synthesize(&scaled)
    }

    /// Unit-Euclidean eigenvector `n` as a grid vector.
    pub fn unit_vector(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.len()];
        c[n] = 1.0;
        self.synthesize(&c)
    }

    /// Eigenfunction `n`, orthonormal under the weighted inner product.
    pub fn eigenfunction(&self, n: usize) -> Vec<f64> {
        let s = 1.0 / self.grid.cell_volume().sqrt();
        self.unit_vector(n).into_iter().map(|v| v * s).collect()
    }

    /// All retained unit vectors as columns of a dense matrix.
    pub fn dense_vectors(&self) -> DMatrix<f64> {
        match &self.basis {
            Basis::Dense(v) => v.clone(),
            Basis::Separable { .. } => {
                let n = self.grid.len();
                let mut out = DMatrix::zeros(n, self.len());
                for k in 0..self.len() {
                    out.set_column(k, &DVector::from_vec(self.unit_vector(k)));
                }
                out
            }
        }
    }

    /// Max over retained pairs of `|L e - λ e| / (1 + λ)`.
    pub fn max_residual(&self, op: &GrushinOperator) -> f64 {
        (0..self.len())
            .map(|k| {
                let e = self.unit_vector(k);
                let le = op.apply(&e);
                let l = self.eigenvalues[k];
                let r: f64 = le.iter().zip(&e).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>().sqrt();
                r / (1.0 + l)
            })
            .fold(0.0, f64::max)
    }

    /// Max entry of `|Φ^T W Φ - I|` for the weighted eigenfunctions.
    pub fn gram_defect(&self) -> f64 {
        let v = self.dense_vectors();
        let g = v.tr_mul(&v);
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `e^{-tL} u`.
    pub fn heat(&self, t: f64, u: &[f64]) -> Vec<f64> {
        if t == 0.0 {
            return u.to_vec();
        }
        self.apply_fn(u, |l| (-t * l).exp())
    }
}

/// `L^s u = sum λ^s <u,φ>φ`.
pub fn fractional_power_spectral(spec: &SpectralData, s: f64, u: &[f64]) -> Result<Vec<f64>> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::config("s", "must lie in (0, 1]"));
    }
    Ok(spec.apply_fn(u, |l| l.powf(s)))
}

#[derive(Clone, Debug)]
pub struct QuadratureResult {
    pub value: Vec<f64>,
    /// Estimated L^2 error (weighted norm).
    pub error_estimate: f64,
    pub warning: Option<String>,
}

fn weighted_l2(grid: &Grid, v: &[f64]) -> f64 {
    grid.lp_norm(v, 2.0)
}

/// `L^s u = -(s/Γ(1-s)) ∫ t^{-s-1}(e^{-tL}u - u) dt` by log-quadrature on the
/// nodes of `rule`. Below `t_min` the integrand is replaced by its first-order
/// Taylor term `-tLu`. Beyond `t_max` the `-u` part is integrated exactly and
/// the remaining semigroup part is dropped; its size enters the error estimate.
pub fn fractional_power_balakrishnan(
    op: &GrushinOperator,
    spec: &SpectralData,
    s: f64,
    u: &[f64],
    rule: &LogRule,
    tolerance: f64,
) -> Result<QuadratureResult> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::config("s", "must lie in (0, 1)"));
    }
    let grid = spec.grid();
    let n = u.len();
    let (t0, t1) = (rule.t_min(), rule.t_max());
    let c = spec.coefficients(u);
    let mut fine = vec![0.0; n];
    let samples: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&t| {
            let h = spec.apply_fn_coeffs(&c, |l| (-t * l).exp());
            let ts = t.powf(-s);
            h.iter().zip(u).map(|(a, b)| ts * (a - b)).collect()
        })
        .collect();
    for (w, v) in rule.weights.iter().zip(&samples) {
        for (f, x) in fine.iter_mut().zip(v) {
            *f += w * x;
        }
    }
    let coarse = coarse_vector(rule, &samples);

    let lu = op.apply(u);
    let llu = op.apply(&lu);
    let head_scale = t0.powf(1.0 - s) / (1.0 - s);
    let tail_scale = t1.powf(-s) / s;
    let pref = s / gamma(1.0 - s);
    let value: Vec<f64> = (0..n)
        .map(|i| -pref * (fine[i] - lu[i] * head_scale - u[i] * tail_scale))
        .collect();

    let late = spec.heat(t1, u);
    let tail_bound = weighted_l2(grid, &late) * tail_scale;
    let head_bound = weighted_l2(grid, &llu) * t0.powf(2.0 - s) / (2.0 * (2.0 - s));
    let diff: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| a - b).collect();
    let trap = weighted_l2(grid, &diff);
    let error_estimate = pref * (tail_bound + head_bound + trap);
    let warning = (error_estimate > tolerance * weighted_l2(grid, &value).max(f64::MIN_POSITIVE))
        .then(|| format!("Balakrishnan error estimate {error_estimate:.3e} exceeds tolerance"));
    Ok(QuadratureResult {
        value,
        error_estimate,
        warning,
    })
}

/// Trapezoid on every other node of `rule` (the last interval is kept when the
/// node count is even), applied to vector samples.
fn coarse_vector(rule: &LogRule, samples: &[Vec<f64>]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..rule.len()).step_by(2).collect();
    if *idx.last().unwrap() != rule.len() - 1 {
        idx.push(rule.len() - 1);
    }
    let n = samples[0].len();
    let mut out = vec![0.0; n];
    for w in idx.windows(2) {
        let dl = (rule.nodes[w[1]] / rule.nodes[w[0]]).ln() * 0.5;
        for i in 0..n {
            out[i] += dl * (samples[w[0]][i] + samples[w[1]][i]);
        }
    }
    out
}

/// `I_α̃ u = L^{-α̃/2} u` on the spectral side.
pub fn riesz_potential(spec: &SpectralData, alpha_tilde: f64, u: &[f64]) -> Result<Vec<f64>> {
    let q = spec.grid().hom_dimension();
    if !(alpha_tilde > 0.0 && alpha_tilde < q) {
        return Err(Error::config("alpha_tilde", format!("must lie in (0, {q})")));
    }
    if spec.eigenvalues().first().is_none_or(|l| *l <= 0.0) {
        return Err(Error::Numerical("Riesz potential needs a positive spectrum".into()));
    }
    Ok(spec.apply_fn(u, |l| l.powf(-0.5 * alpha_tilde)))
}

/// `I_α̃ u = (1/Γ(α̃/2)) ∫ t^{α̃/2-1} e^{-tL}u dt` by log-quadrature with the
/// head `u t_min^{α̃/2}/(α̃/2)`; the tail beyond `t_max` is bounded, not added.
pub fn riesz_potential_quadrature(
    spec: &SpectralData,
    alpha_tilde: f64,
    u: &[f64],
    rule: &LogRule,
) -> Result<QuadratureResult> {
    let q = spec.grid().hom_dimension();
    if !(alpha_tilde > 0.0 && alpha_tilde < q) {
        return Err(Error::config("alpha_tilde", format!("must lie in (0, {q})")));
    }
    let a = 0.5 * alpha_tilde;
    let grid = spec.grid();
    let c = spec.coefficients(u);
    let samples: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&t| {
            let ta = t.powf(a);
            spec.apply_fn_coeffs(&c, |l| (-t * l).exp()).into_iter().map(|v| v * ta).collect()
        })
        .collect();
    let n = u.len();
    let mut acc = vec![0.0; n];
    for (w, v) in rule.weights.iter().zip(&samples) {
        for (f, x) in acc.iter_mut().zip(v) {
            *f += w * x;
        }
    }
    let coarse = coarse_vector(rule, &samples);
    let g = gamma(a);
    let head = rule.t_min().powf(a) / a;
    let value: Vec<f64> = (0..n).map(|i| (acc[i] + u[i] * head) / g).collect();
    let lambda1 = spec.eigenvalues()[0];
    let t1 = rule.t_max();
    let late = spec.heat(t1, u);
    let tail_bound = weighted_l2(grid, &late) * t1.powf(a - 1.0).max(t1.powf(a)) / lambda1.min(1.0) / g;
    let diff: Vec<f64> = acc.iter().zip(&coarse).map(|(x, y)| x - y).collect();
    Ok(QuadratureResult {
        value,
        error_estimate: tail_bound + weighted_l2(grid, &diff) / g,
        warning: None,
    })
}

/// Krylov (Lanczos) approximation of `e^{-tL}u` using only sparse products;
/// the fallback for grids beyond the dense budget. Returns the result and the
/// change between the last two Krylov dimensions as an error indicator.
pub fn heat_apply_krylov(op: &GrushinOperator, t: f64, u: &[f64], max_dim: usize, tol: f64) -> (Vec<f64>, f64) {
    let n = u.len();
    let beta0 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if beta0 == 0.0 || t == 0.0 {
        return (u.to_vec(), 0.0);
    }
    let mut basis: Vec<Vec<f64>> = vec![u.iter().map(|v| v / beta0).collect()];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    for j in 0..max_dim.min(n) {
        let mut w = op.apply(&basis[j]);
        let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
        alphas.push(a);
        // Full reorthogonalization keeps the small projected problem faithful.
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= d * bi;
                }
            }
        }
        let dim = alphas.len();
        let tri = DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                alphas[r]
            } else if r + 1 == c {
                betas[r]
            } else if c + 1 == r {
                betas[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let mut coeff = vec![0.0; dim];
        for k in 0..dim {
            let wk = (-t * eig.eigenvalues[k]).exp() * eig.eigenvectors[(0, k)];
            for (r, c) in coeff.iter_mut().enumerate() {
                *c += wk * eig.eigenvectors[(r, k)];
            }
        }
        let mut approx = vec![0.0; n];
        for (c, b) in coeff.iter().zip(&basis) {
            for (x, bi) in approx.iter_mut().zip(b) {
                *x += beta0 * c * bi;
            }
        }
        if let Some(p) = &prev {
            last_change = approx.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if last_change <= tol * beta0 {
                return (approx, last_change);
            }
        }
        let bnorm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm < 1e-14 * beta0.max(1.0) {
            return (approx, 0.0);
        }
        betas.push(bnorm);
        basis.push(w.into_iter().map(|v| v / bnorm).collect());
        prev = Some(approx);
    }
    (prev.unwrap_or_else(|| u.to_vec()), last_change)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn small(points: usize, alpha: f64) -> (Arc<Grid>, GrushinOperator) {
        let g = Arc::new(Grid::new(GridSpec::grushin_plane(points, 2.0).with_alpha(alpha)).unwrap());
        let op = GrushinOperator::assemble(g.clone(), CoefficientRule::CellAverage);
        (g, op)
    }

    #[test]
    fn matrix_is_symmetric_with_nonpositive_offdiagonal() {
        let (_, op) = small(9, 1.0);
        assert!(op.matrix().asymmetry() < 1e-14);
        let m = op.matrix();
        for r in 0..m.dim() {
            for i in m.row_ptr[r]..m.row_ptr[r + 1] {
                if m.cols[i] != r {
                    assert!(m.vals[i] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn cell_average_at_origin_is_positive() {
        // 9 points on [-2,2]: node at x = 0, cell [-0.2, 0.2], average of x^2 = 0.04/3.
        let (_, op) = small(9, 1.0);
        assert!((op.coefficient_x()[4] - 0.04 / 3.0).abs() < 1e-15);
        let g = Arc::new(Grid::new(GridSpec::grushin_plane(9, 2.0)).unwrap());
        let nv = GrushinOperator::assemble(g, CoefficientRule::NodeValue);
        assert_eq!(nv.coefficient_x()[4], 0.0);
    }

    #[test]
    fn separable_coefficients_roundtrip() {
        let (g, op) = small(10, 1.0);
        let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
        let u = g.sample(|p| (p[0] * 1.3).sin() + p[1] * p[0]);
        let back = sd.synthesize(&sd.coefficients(&u));
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn krylov_matches_spectral() {
        let (g, op) = small(12, 1.0);
        let sd = eigendecompose(&op, Count::All, Method::Separable).unwrap();
        let u = g.sample(|p| (-(p[0] * p[0] + p[1] * p[1])).exp());
        let exact = sd.heat(0.05, &u);
        let (kr, _) = heat_apply_krylov(&op, 0.05, &u, 80, 1e-12);
        let err: f64 = exact.iter().zip(&kr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn leading_modes_are_the_smallest() {
        let (_, op) = small(8, 1.0);
        let all = eigendecompose(&op, Count::All, Method::Separable).unwrap();
        let lead = eigendecompose(&op, Count::Leading(10), Method::Separable).unwrap();
        assert_eq!(lead.eigenvalues(), &all.eigenvalues()[..10]);
        assert!(lead.max_residual(&op) < 1e-10);
    }
}
