//! Grid-sampled functions, midpoint quadrature, the Epanechnikov smoothing
//! kernel with its boundary correction, and the two dense linear-algebra
//! routines the rest of the crate needs.
//!
//! Every function on the observation window is stored by its values at the
//! midpoints of `T` equal cells, so integrals reduce to `step * sum`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{P3lsError, Result};

/// Closed observation interval `[start, end]`, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(P3lsError::InvalidWindow {
                start,
                end,
                size: 0,
            });
        }
        Ok(Self { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Midpoints of `size` equal cells partitioning a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    start: f64,
    end: f64,
    size: usize,
}

impl Grid {
    pub fn uniform(start: f64, end: f64, size: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start || size < 2 {
            return Err(P3lsError::InvalidWindow { start, end, size });
        }
        Ok(Self { start, end, size })
    }

    pub fn on_window(window: Window, size: usize) -> Result<Self> {
        Self::uniform(window.start, window.end, size)
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn window(&self) -> Window {
        Window {
            start: self.start,
            end: self.end,
        }
    }

    /// Cell width Δ.
    pub fn step(&self) -> f64 {
        (self.end - self.start) / self.size as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start + (k as f64 + 0.5) * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size).map(|k| self.point(k)).collect()
    }

    /// Indices `k` whose midpoint lies within `radius` of `x`.
    pub(crate) fn index_range_near(&self, x: f64, radius: f64) -> std::ops::Range<usize> {
        let step = self.step();
        // t_k = start + (k + 0.5) step, so |t_k - x| <= r  <=>  k in [lo, hi]
        let lo = ((x - radius - self.start) / step - 0.5).ceil().max(0.0);
        let hi = ((x + radius - self.start) / step - 0.5).floor();
        if hi < 0.0 || lo >= self.size as f64 {
            return 0..0;
        }
        let lo = lo as usize;
        let hi = (hi as usize).min(self.size - 1);
        if lo > hi {
            0..0
        } else {
            lo..hi + 1
        }
    }
}

/// Builds the uniform midpoint grid on `[start, end]`.
pub fn make_uniform_grid(start: f64, end: f64, size: usize) -> Result<Grid> {
    Grid::uniform(start, end, size)
}

/// A function on the window sampled at the grid midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(P3lsError::DimensionMismatch(format!(
                "curve has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(P3lsError::NonFiniteEntry);
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.points().into_iter().map(f).collect(),
        }
    }

    pub(crate) fn from_values_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, other: &Curve) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(P3lsError::GridMismatch)
        }
    }

    pub fn scaled(&self, c: f64) -> Curve {
        Curve::from_values_unchecked(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        self.ensure_same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.ensure_same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Curve) -> Result<()> {
        self.ensure_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Curve, f: impl Fn(f64, f64) -> f64) -> Curve {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Curve::from_values_unchecked(self.grid, values)
    }

    /// Piecewise-linear interpolation between midpoints, held constant
    /// beyond the first and last midpoint.
    pub fn interpolate(&self, x: f64) -> f64 {
        let step = self.grid.step();
        let pos = (x - self.grid.start) / step - 0.5;
        let last = self.values.len() - 1;
        if pos <= 0.0 {
            return self.values[0];
        }
        if pos >= last as f64 {
            return self.values[last];
        }
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

/// A bivariate function sampled at all pairs of grid midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMatrix {
    grid: Grid,
    entries: DMatrix<f64>,
}

impl GridMatrix {
    pub fn new(grid: Grid, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != grid.len() || entries.ncols() != grid.len() {
            return Err(P3lsError::DimensionMismatch(format!(
                "{}x{} matrix for a grid of {}",
                entries.nrows(),
                entries.ncols(),
                grid.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(P3lsError::NonFiniteEntry);
        }
        Ok(Self { grid, entries })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// The integral operator `f ↦ ∫ f(s) M(s, t) ds` applied by midpoint rule.
    pub fn apply(&self, f: &Curve) -> Result<Curve> {
        if *f.grid() != self.grid {
            return Err(P3lsError::GridMismatch);
        }
        let v = self.entries.tr_mul(&f.as_dvector()) * self.grid.step();
        Ok(Curve::from_values_unchecked(self.grid, v.as_slice().to_vec()))
    }
}

/// Midpoint rule: `Δ · Σ_k f(t_k)`.
pub fn quadrature(f: &Curve) -> f64 {
    f.grid.step() * f.values.iter().sum::<f64>()
}

/// `∫ u v` by midpoint rule.
pub fn inner_l2(u: &Curve, v: &Curve) -> Result<f64> {
    u.ensure_same_grid(v)?;
    let s: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(u.grid.step() * s)
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(P3lsError::InvalidBandwidth(h))
    }
}

/// Epanechnikov `κ_h(u) = κ(u/h)/h` without argument checks.
#[inline]
pub(crate) fn epanechnikov(u: f64, h: f64) -> f64 {
    let z = u / h;
    if z.abs() <= 1.0 {
        0.75 * (1.0 - z * z) / h
    } else {
        0.0
    }
}

/// Antiderivative of the unit Epanechnikov kernel, clamped to `[-1, 1]`.
#[inline]
fn epanechnikov_cdf(z: f64) -> f64 {
    let z = z.clamp(-1.0, 1.0);
    0.5 + 0.75 * (z - z * z * z / 3.0)
}

/// Scaled Epanechnikov kernel `κ_h(u)`.
pub fn kernel_weight(u: f64, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(epanechnikov(u, h))
}

#[inline]
pub(crate) fn edge_mass(s: f64, h: f64, window: Window) -> f64 {
    // ∫_start^end κ_h(s - x) dx = F((s - start)/h) - F((s - end)/h)
    epanechnikov_cdf((s - window.start) / h) - epanechnikov_cdf((s - window.end) / h)
}

/// Kernel mass `a(s; h)` that falls inside the window.
pub fn edge_correction(s: f64, h: f64, window: Window) -> Result<f64> {
    check_bandwidth(h)?;
    if !window.contains(s) {
        return Err(P3lsError::OutOfWindow {
            time: s,
            start: window.start,
            end: window.end,
        });
    }
    Ok(edge_mass(s, h, window))
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenvectors stored as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition of `(M + Mᵀ)/2`.
///
/// Each eigenvector's sign is fixed so that its entry of largest magnitude is
/// positive.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    if !m.is_square() {
        return Err(P3lsError::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(P3lsError::NonFiniteEntry);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.iter().copied().fold(0.0f64, |best, v| {
            if v.abs() > best.abs() {
                v
            } else {
                best
            }
        });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(SymEigen {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Relative cutoff below which singular values are treated as zero.
pub const SINGULAR_VALUE_CUTOFF: f64 = 1e-10;

/// Minimum-norm least-squares solution of `design · w ≈ response`.
pub fn solve_least_squares(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, p) = design.shape();
    if n == 0 || p == 0 || response.len() != n {
        return Err(P3lsError::DimensionMismatch(format!(
            "design {}x{} with response of length {}",
            n,
            p,
            response.len()
        )));
    }
    if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
        return Err(P3lsError::NonFiniteEntry);
    }
    let svd = design.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let largest = svd.singular_values.max();
    let cutoff = SINGULAR_VALUE_CUTOFF * largest;

    let mut w = DVector::zeros(p);
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= cutoff || sigma == 0.0 {
            continue;
        }
        let coef = u.column(k).dot(response) / sigma;
        w += vt.row(k).transpose() * coef;
    }
    Ok(w)
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
