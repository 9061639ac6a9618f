//! Functional principal component regression on kernel-smoothed
//! log-intensities, the unsupervised baseline.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{P3lsError, Result};
use crate::numerics::{edge_mass, epanechnikov, inner_l2, solve_least_squares, sym_eigen, Curve, Grid};
use crate::pointprocess::PointPattern;

/// Smoothed intensities are floored here before taking logs.
pub const LOG_FLOOR: f64 = 1e-6;

/// Eigenvalues at or below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

/// Edge-corrected kernel intensity `λ̃(t) = Σ_x κ_h(x − t) / a(t; h)`.
pub fn kernel_intensity(pattern: &PointPattern, grid: Grid, h: f64) -> Result<Curve> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(P3lsError::InvalidBandwidth(h));
    }
    let window = grid.window();
    let mut values = vec![0.0; grid.len()];
    for &x in pattern.events() {
        for k in grid.index_range_near(x, h) {
            values[k] += epanechnikov(x - grid.point(k), h);
        }
    }
    for (k, v) in values.iter_mut().enumerate() {
        *v /= edge_mass(grid.point(k), h, window);
    }
    Curve::new(grid, values)
}

/// `log(max(λ̃, LOG_FLOOR))`.
pub fn smoothed_log_intensity(pattern: &PointPattern, grid: Grid, h: f64) -> Result<Curve> {
    let lambda = kernel_intensity(pattern, grid, h)?;
    let values = lambda.values().iter().map(|v| v.max(LOG_FLOOR).ln()).collect();
    Curve::new(grid, values)
}

/// Empirical functional principal components.
#[derive(Debug, Clone)]
pub struct Fpca {
    pub mean: Curve,
    /// Operator eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// L²-normalized eigenfunctions, largest-magnitude value positive.
    pub components: Vec<Curve>,
}

impl Fpca {
    /// Number of components with eigenvalue above the rank tolerance.
    pub fn rank(&self) -> usize {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0);
        if !(top > 0.0) {
            return 0;
        }
        self.eigenvalues.iter().take_while(|&&v| v > RANK_TOL * top).count()
    }

    pub fn scores(&self, curve: &Curve, p: usize) -> Result<Vec<f64>> {
        let centered = curve.sub(&self.mean)?;
        self.components[..p].iter().map(|c| inner_l2(&centered, c)).collect()
    }
}

/// Eigendecomposition of `(1/n) Σ X^c_i(s) X^c_i(t)`.
pub fn fpca(curves: &[Curve]) -> Result<Fpca> {
    let first = curves.first().ok_or(P3lsError::TooFewSubjects { needed: 2, got: 0 })?;
    let grid = *first.grid();
    let n = curves.len();
    let t = grid.len();
    let mut x = DMatrix::zeros(t, n);
    for (i, c) in curves.iter().enumerate() {
        if *c.grid() != grid {
            return Err(P3lsError::GridMismatch);
        }
        x.set_column(i, &c.as_dvector());
    }
    let mean_values: Vec<f64> = (0..t).map(|k| x.row(k).sum() / n as f64).collect();
    for k in 0..t {
        let m = mean_values[k];
        x.row_mut(k).add_scalar_mut(-m);
    }
    let step = grid.step();
    let cov = &x * x.transpose() * (step / n as f64);
    let eig = sym_eigen(&cov)?;
    let scale = 1.0 / step.sqrt();
    let components = (0..t)
        .map(|l| Curve::new(grid, eig.eigenvectors.column(l).iter().map(|v| v * scale).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Fpca {
        mean: Curve::new(grid, mean_values)?,
        eigenvalues: eig.eigenvalues,
        components,
    })
}

#[derive(Debug, Clone)]
pub struct FpcrModel {
    pub grid: Grid,
    pub p: usize,
    pub mean_curve: Curve,
    pub components: Vec<Curve>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub h: f64,
}

impl FpcrModel {
    pub fn predict_curve(&self, curve: &Curve) -> Result<f64> {
        let centered = curve.sub(&self.mean_curve)?;
        let mut y = self.intercept;
        for (c, phi) in self.coefficients.iter().zip(&self.components) {
            y += c * inner_l2(&centered, phi)?;
        }
        Ok(y)
    }

    /// `Σ_j coefficient_j · component_j`, comparable to a PLS coefficient function.
    pub fn implied_coefficient(&self) -> Curve {
        let mut b = Curve::zeros(self.grid);
        for (c, phi) in self.coefficients.iter().zip(&self.components) {
            b.axpy(*c, phi).expect("components share the model grid");
        }
        b
    }
}

/// Smoothing and FPCA, shared by fits that differ only in `p` or response.
#[derive(Debug, Clone)]
pub struct PreparedFpcr {
    pub h: f64,
    pub curves: Vec<Curve>,
    pub fpca: Fpca,
}

impl PreparedFpcr {
    pub fn new(patterns: &[PointPattern], grid: Grid, h: f64) -> Result<Self> {
        let curves = patterns
            .par_iter()
            .map(|p| smoothed_log_intensity(p, grid, h))
            .collect::<Result<Vec<_>>>()?;
        Self::from_curves(curves, h)
    }

    pub fn from_curves(curves: Vec<Curve>, h: f64) -> Result<Self> {
        let fpca = fpca(&curves)?;
        Ok(Self { h, curves, fpca })
    }

    pub fn model(&self, y: &[f64], p: usize) -> Result<FpcrModel> {
        let n = self.curves.len();
        if y.len() != n {
            return Err(P3lsError::DimensionMismatch(format!("{n} curves and {} responses", y.len())));
        }
        if n <= p {
            return Err(P3lsError::TooFewSubjects { needed: p + 1, got: n });
        }
        let rank = self.fpca.rank();
        if rank == 0 || rank < p {
            return Err(P3lsError::RankDeficient(format!(
                "covariance has rank {rank}, {p} components requested"
            )));
        }
        let mut design = DMatrix::zeros(n, p + 1);
        for (i, c) in self.curves.iter().enumerate() {
            design[(i, 0)] = 1.0;
            for (j, s) in self.fpca.scores(c, p)?.into_iter().enumerate() {
                design[(i, j + 1)] = s;
            }
        }
        let coef = solve_least_squares(&design, &DVector::from_column_slice(y))?;
        Ok(FpcrModel {
            grid: *self.fpca.mean.grid(),
            p,
            mean_curve: self.fpca.mean.clone(),
            components: self.fpca.components[..p].to_vec(),
            intercept: coef[0],
            coefficients: coef.iter().skip(1).copied().collect(),
            h: self.h,
        })
    }
}

pub fn fit_fpcr(patterns: &[PointPattern], y: &[f64], p: usize, h: f64, grid: Grid) -> Result<FpcrModel> {
    if patterns.len() <= p || patterns.len() < 2 {
        return Err(P3lsError::TooFewSubjects {
            needed: (p + 1).max(2),
            got: patterns.len(),
        });
    }
    PreparedFpcr::new(patterns, grid, h)?.model(y, p)
}

pub fn predict_fpcr(model: &FpcrModel, newdata: &PointPattern) -> Result<f64> {
    let curve = smoothed_log_intensity(newdata, model.grid, model.h)?;
    model.predict_curve(&curve)
}
