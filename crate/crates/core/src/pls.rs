//! Partial least squares on estimated log-intensities.
//!
//! The PLS directions span the Krylov sequence `K̂(b), K̂²(b), …` where
//! `K̂(b)` is the empirical cross-covariance between the reconstructed
//! log-intensities and the response, and each further iterate applies the
//! covariance operator once more. The directions are orthonormalized under
//! the covariance-weighted inner product, the response is regressed on the
//! projections of the centered curves, and the coefficient function is the
//! resulting linear combination of directions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{estimate_covariance, select_q, CovarianceEstimate};
use crate::error::{P3lsError, Result};
use crate::intensity::{fit_scores, EigenBasis, IntensityEstimate};
use crate::numerics::{
    condition_number, inner_l2, solve_least_squares, sym_eigen, Curve, Grid, GridMatrix, Window,
};
use crate::pointprocess::{bin_counts, BinPartition, CountVector, PointPattern};

/// Gram-Schmidt drops a candidate whose residual norm falls below this
/// fraction of its original norm.
pub const DEPENDENCE_TOL: f64 = 1e-8;

/// `H` is flagged when its condition number reaches this value.
pub const ILL_CONDITIONED: f64 = 1e8;

/// `⟨u, v⟩ = ∫∫ u(s) K(s, t) v(t) ds dt` for a positive semi-definite `K`.
#[derive(Debug, Clone)]
pub struct WeightedInnerProduct {
    cov: GridMatrix,
}

impl WeightedInnerProduct {
    pub fn new(cov: GridMatrix) -> Self {
        Self { cov }
    }

    /// Uses the positive part `K̂⁺` of a covariance estimate.
    pub fn from_covariance(cov: &CovarianceEstimate) -> Self {
        Self::new(cov.positive_part())
    }

    pub fn grid(&self) -> &Grid {
        self.cov.grid()
    }

    pub fn matrix(&self) -> &GridMatrix {
        &self.cov
    }

    pub fn inner(&self, u: &Curve, v: &Curve) -> Result<f64> {
        weighted_inner(u, v, self)
    }

    pub fn norm(&self, u: &Curve) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }

    /// Gram matrix of `curves` under this inner product.
    pub fn gram(&self, curves: &[Curve]) -> Result<DMatrix<f64>> {
        let p = curves.len();
        let mut g = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                g[(i, j)] = self.inner(&curves[i], &curves[j])?;
            }
        }
        Ok(g)
    }
}

/// `Δ² uᵀ K v`.
pub fn weighted_inner(u: &Curve, v: &Curve, ip: &WeightedInnerProduct) -> Result<f64> {
    if u.grid() != ip.grid() || v.grid() != ip.grid() {
        return Err(P3lsError::GridMismatch);
    }
    let k = ip.cov.entries();
    let n = u.len();
    let (uv, vv) = (u.values(), v.values());
    let mut acc = 0.0;
    for s in 0..n {
        if uv[s] == 0.0 {
            continue;
        }
        let col = k.column(s);
        let mut row = 0.0;
        for t in 0..n {
            row += col[t] * vv[t];
        }
        acc += uv[s] * row;
    }
    let step = u.grid().step();
    Ok(step * step * acc)
}

fn mean_curve(curves: &[Curve]) -> Result<Curve> {
    let first = curves.first().ok_or(P3lsError::TooFewSubjects { needed: 1, got: 0 })?;
    let grid = *first.grid();
    let mut acc = vec![0.0; grid.len()];
    for c in curves {
        if *c.grid() != grid {
            return Err(P3lsError::GridMismatch);
        }
        for (a, v) in acc.iter_mut().zip(c.values()) {
            *a += v;
        }
    }
    let n = curves.len() as f64;
    Curve::new(grid, acc.into_iter().map(|a| a / n).collect())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `K̂(b)(t) = n⁻¹ Σ_i (X̂_i(t) − X̄(t))(Y_i − Ȳ)`.
pub fn estimate_kb(xhats: &[Curve], y: &[f64]) -> Result<Curve> {
    if xhats.len() < 2 {
        return Err(P3lsError::TooFewSubjects {
            needed: 2,
            got: xhats.len(),
        });
    }
    if xhats.len() != y.len() {
        return Err(P3lsError::DimensionMismatch(format!(
            "{} curves and {} responses",
            xhats.len(),
            y.len()
        )));
    }
    let xbar = mean_curve(xhats)?;
    let ybar = mean(y);
    let grid = *xbar.grid();
    let mut acc = vec![0.0; grid.len()];
    for (x, &yi) in xhats.iter().zip(y) {
        let yc = yi - ybar;
        for ((a, xv), mv) in acc.iter_mut().zip(x.values()).zip(xbar.values()) {
            *a += (xv - mv) * yc;
        }
    }
    let n = y.len() as f64;
    Curve::new(grid, acc.into_iter().map(|a| a / n).collect())
}

/// `[K̂¹(b), …, K̂^p(b)]`, each iterate obtained by applying the integral
/// operator with kernel `khat` to its predecessor.
pub fn iterate_kb(kb: &Curve, khat: &GridMatrix, p: usize) -> Result<Vec<Curve>> {
    if p == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(p);
    out.push(kb.clone());
    for _ in 1..p {
        let next = khat.apply(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Output of [`gram_schmidt`]: the orthonormal curves and the indices of the
/// candidates that produced them.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub curves: Vec<Curve>,
    pub kept: Vec<usize>,
}

/// Modified Gram-Schmidt under `ip`.
///
/// Each candidate is swept against the accepted directions twice (the second
/// sweep removes what roundoff left behind) and is discarded when its
/// residual norm is below [`DEPENDENCE_TOL`] times its original norm.
pub fn gram_schmidt(candidates: &[Curve], ip: &WeightedInnerProduct) -> Result<Orthonormalized> {
    if candidates.is_empty() {
        return Err(P3lsError::NoIndependentCandidates);
    }
    let mut curves: Vec<Curve> = Vec::new();
    let mut kept = Vec::new();
    for (idx, v) in candidates.iter().enumerate() {
        let original = ip.norm(v)?;
        let mut u = v.clone();
        for _sweep in 0..2 {
            for e in &curves {
                let c = ip.inner(&u, e)?;
                u.axpy(-c, e)?;
            }
        }
        let residual = ip.norm(&u)?;
        if residual < DEPENDENCE_TOL * (original + 1e-30) || residual == 0.0 {
            continue;
        }
        curves.push(u.scaled(1.0 / residual));
        kept.push(idx);
    }
    if curves.is_empty() {
        return Err(P3lsError::NoIndependentCandidates);
    }
    Ok(Orthonormalized { curves, kept })
}

/// Projections `z_ij = ∫ X_i^c ψ_j` of centered curves.
pub fn projection_matrix(centered: &[Curve], psis: &[Curve]) -> Result<DMatrix<f64>> {
    let mut z = DMatrix::zeros(centered.len(), psis.len());
    for (i, x) in centered.iter().enumerate() {
        for (j, psi) in psis.iter().enumerate() {
            z[(i, j)] = inner_l2(x, psi)?;
        }
    }
    Ok(z)
}

fn centered_curves(xhats: &[Curve]) -> Result<(Curve, Vec<Curve>)> {
    let xbar = mean_curve(xhats)?;
    let centered = xhats.iter().map(|x| x.sub(&xbar)).collect::<Result<Vec<_>>>()?;
    Ok((xbar, centered))
}

/// Least-squares coefficients of the centered response on the projections of
/// the centered curves onto `psis`.
pub fn fit_beta(xhats: &[Curve], y: &[f64], psis: &[Curve]) -> Result<Vec<f64>> {
    if xhats.is_empty() || xhats.len() != y.len() {
        return Err(P3lsError::DimensionMismatch(format!(
            "{} curves and {} responses",
            xhats.len(),
            y.len()
        )));
    }
    if psis.is_empty() {
        return Ok(Vec::new());
    }
    let (_, centered) = centered_curves(xhats)?;
    let ybar = mean(y);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ybar));
    let z = projection_matrix(&centered, psis)?;
    Ok(solve_least_squares(&z, &yc)?.iter().copied().collect())
}

/// `Σ_j β_j ψ_j`.
pub fn assemble_bhat(betas: &[f64], psis: &[Curve], grid: Grid) -> Result<Curve> {
    if betas.len() != psis.len() {
        return Err(P3lsError::DimensionMismatch(format!(
            "{} coefficients for {} directions",
            betas.len(),
            psis.len()
        )));
    }
    let mut values = vec![0.0; grid.len()];
    for (b, psi) in betas.iter().zip(psis) {
        if *psi.grid() != grid {
            return Err(P3lsError::GridMismatch);
        }
        for (v, x) in values.iter_mut().zip(psi.values()) {
            *v += b * x;
        }
    }
    Curve::new(grid, values)
}

/// How many PLS directions to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum PSelection {
    Fixed { p: usize },
    /// Minimizes `n log(RSS/n) + p log n` over `1..=p_max`.
    Bic { p_max: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub h: f64,
    pub variance_threshold: f64,
    pub grid_size: usize,
    /// Bin count `M`; defaults to the grid size so bins coincide with cells.
    pub bins: Option<usize>,
    pub window: Option<Window>,
    pub selection: PSelection,
    /// Expand around the estimated mean log-intensity instead of zero.
    pub mean_offset: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            h: 2.0,
            variance_threshold: 0.9,
            grid_size: 100,
            bins: None,
            window: None,
            selection: PSelection::Fixed { p: 1 },
            mean_offset: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(P3lsError::InvalidBandwidth(self.h));
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return Err(P3lsError::InvalidConfig(format!(
                "variance threshold must lie in (0, 1], got {}",
                self.variance_threshold
            )));
        }
        if self.grid_size < 2 {
            return Err(P3lsError::InvalidConfig("grid needs at least two points".into()));
        }
        if self.bins == Some(0) {
            return Err(P3lsError::InvalidConfig("bin count must be positive".into()));
        }
        if let PSelection::Bic { p_max } = self.selection {
            if p_max == 0 {
                return Err(P3lsError::InvalidConfig("p_max must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Settings a model was fitted with, echoed into the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub h: f64,
    pub q: usize,
    pub bins: usize,
    pub grid_size: usize,
    pub variance_threshold: f64,
    pub selection: PSelection,
    pub mean_offset: bool,
    /// Whether the widest bin respects `|B| ≤ |I| n^{-1/2}`.
    pub bin_width_within_bound: bool,
    pub n_train: usize,
}

/// A fitted point-process PLS model.
#[derive(Debug, Clone)]
pub struct PlsModel {
    pub grid: Grid,
    pub basis: EigenBasis,
    pub spectrum: Vec<f64>,
    pub psis: Vec<Curve>,
    pub betas: Vec<f64>,
    pub bhat: Curve,
    pub xbar: Curve,
    pub ybar: f64,
    pub config: ModelConfig,
}

impl PlsModel {
    /// Number of directions actually in use.
    pub fn p(&self) -> usize {
        self.psis.len()
    }

    pub fn partition(&self) -> &BinPartition {
        self.basis.partition()
    }

    /// `Ȳ + ∫ (X₀ − X̄) b̂`.
    pub fn predict_curve(&self, x0: &Curve) -> Result<f64> {
        let centered = x0.sub(&self.xbar)?;
        Ok(self.ybar + inner_l2(&centered, &self.bhat)?)
    }

    /// Reconstructed log-intensity of a new subject under the training basis.
    pub fn estimate_intensity(&self, data: NewData<'_>) -> Result<IntensityEstimate> {
        let counts = match data {
            NewData::Events(p) => bin_counts(p, self.partition())?,
            NewData::Counts(c) => c.clone(),
        };
        fit_scores(&counts, &self.basis)
    }
}

/// A new subject presented either as event times or as counts on the
/// model's bins.
#[derive(Debug, Clone, Copy)]
pub enum NewData<'a> {
    Events(&'a PointPattern),
    Counts(&'a CountVector),
}

pub fn predict(model: &PlsModel, newdata: NewData<'_>) -> Result<f64> {
    let est = model.estimate_intensity(newdata)?;
    model.predict_curve(&est.curve)
}

/// Stages of the fit that do not depend on the number of directions:
/// covariance, eigenbasis, per-subject scores and `K̂(b)`.
#[derive(Debug, Clone)]
pub struct PreparedFit {
    pub grid: Grid,
    pub cov: CovarianceEstimate,
    pub inner: WeightedInnerProduct,
    pub basis: EigenBasis,
    pub estimates: Vec<IntensityEstimate>,
    pub xbar: Curve,
    pub centered: Vec<Curve>,
    pub y: Vec<f64>,
    pub ybar: f64,
    pub kb: Curve,
    pub config: ModelConfig,
}

fn common_window(patterns: &[PointPattern], explicit: Option<Window>) -> Result<Window> {
    let window = match explicit {
        Some(w) => Window::new(w.start, w.end)?,
        None => patterns[0].window(),
    };
    let tol = 1e-9 * window.length();
    for p in patterns {
        let w = p.window();
        if (w.start - window.start).abs() > tol || (w.end - window.end).abs() > tol {
            return Err(P3lsError::WindowMismatch(format!(
                "subject {} observed on [{}, {}], expected [{}, {}]",
                p.subject_id(),
                w.start,
                w.end,
                window.start,
                window.end
            )));
        }
    }
    Ok(window)
}

impl PreparedFit {
    pub fn new(patterns: &[PointPattern], y: &[f64], cfg: &FitConfig) -> Result<Self> {
        cfg.validate()?;
        if patterns.len() < 3 {
            return Err(P3lsError::TooFewSubjects {
                needed: 3,
                got: patterns.len(),
            });
        }
        if patterns.len() != y.len() {
            return Err(P3lsError::DimensionMismatch(format!(
                "{} subjects and {} responses",
                patterns.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(P3lsError::InvalidConfig("responses must be finite".into()));
        }
        let n = patterns.len();
        let window = common_window(patterns, cfg.window)?;
        let grid = Grid::on_window(window, cfg.grid_size)?;
        let bins = cfg.bins.unwrap_or(cfg.grid_size);
        let partition = BinPartition::uniform(window, bins)?;
        let bound = window.length() / (n as f64).sqrt();
        let within_bound = partition.max_width() <= bound * (1.0 + 1e-12);
        if !within_bound {
            log::warn!(
                "bin width {:.4} exceeds the recommended |I|/sqrt(n) = {:.4}",
                partition.max_width(),
                bound
            );
        }

        let cov = estimate_covariance(patterns, grid, cfg.h)?;
        let q = select_q(&cov, cfg.variance_threshold)?.min(bins);
        let mut basis = EigenBasis::from_covariance(&cov, q, partition.clone())?;
        if cfg.mean_offset {
            let mu = cov.mean_log_intensity().ok_or_else(|| {
                P3lsError::InvalidConfig("mean intensity estimate is not positive everywhere".into())
            })?;
            basis = basis.with_offset(mu)?;
        }
        let estimates = patterns
            .par_iter()
            .map(|p| fit_scores(&bin_counts(p, &partition)?, &basis))
            .collect::<Result<Vec<_>>>()?;
        let unconverged = estimates.iter().filter(|e| !e.converged).count();
        if unconverged > 0 {
            log::warn!("score fit did not converge for {unconverged} of {n} subjects");
        }
        let xhats: Vec<Curve> = estimates.iter().map(|e| e.curve.clone()).collect();
        let (xbar, centered) = centered_curves(&xhats)?;
        let kb = estimate_kb(&xhats, y)?;
        let inner = WeightedInnerProduct::from_covariance(&cov);
        Ok(Self {
            grid,
            inner,
            basis,
            estimates,
            xbar,
            centered,
            y: y.to_vec(),
            ybar: mean(y),
            kb,
            config: ModelConfig {
                h: cfg.h,
                q,
                bins,
                grid_size: cfg.grid_size,
                variance_threshold: cfg.variance_threshold,
                selection: cfg.selection,
                mean_offset: cfg.mean_offset,
                bin_width_within_bound: within_bound,
                n_train: n,
            },
            cov,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn xhats(&self) -> Vec<Curve> {
        self.estimates.iter().map(|e| e.curve.clone()).collect()
    }

    /// `[K̂¹(b), …, K̂^count(b)]` under the raw covariance estimate.
    pub fn iterates(&self, count: usize) -> Result<Vec<Curve>> {
        iterate_kb(&self.kb, &self.cov.khat, count)
    }

    fn centered_response(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.y.iter().map(|v| v - self.ybar))
    }

    /// Model with `p` requested directions; fewer are used when Gram-Schmidt
    /// drops dependent iterates.
    pub fn model_with_p(&self, p: usize) -> Result<PlsModel> {
        let (psis, betas) = if p == 0 {
            (Vec::new(), Vec::new())
        } else {
            let psis = gram_schmidt(&self.iterates(p)?, &self.inner)?.curves;
            let z = projection_matrix(&self.centered, &psis)?;
            let betas: Vec<f64> = solve_least_squares(&z, &self.centered_response())?.iter().copied().collect();
            (psis, betas)
        };
        let bhat = assemble_bhat(&betas, &psis, self.grid)?;
        let mut config = self.config.clone();
        if let PSelection::Fixed { .. } = config.selection {
            config.selection = PSelection::Fixed { p };
        }
        Ok(PlsModel {
            grid: self.grid,
            basis: self.basis.clone(),
            spectrum: self.cov.eigenvalues.clone(),
            psis,
            betas,
            bhat,
            xbar: self.xbar.clone(),
            ybar: self.ybar,
            config,
        })
    }

    /// Training fitted values `Ȳ + ∫ X_i^c b̂`.
    pub fn fitted_values(&self, model: &PlsModel) -> Result<Vec<f64>> {
        self.centered
            .iter()
            .map(|x| Ok(self.ybar + inner_l2(x, &model.bhat)?))
            .collect()
    }

    pub fn training_rss(&self, model: &PlsModel) -> Result<f64> {
        Ok(self
            .fitted_values(model)?
            .iter()
            .zip(&self.y)
            .map(|(f, y)| (y - f) * (y - f))
            .sum())
    }

    /// Fits `p = 1..=p_max` and keeps the one with the smallest BIC.
    pub fn select_p_bic(&self, p_max: usize) -> Result<PlsModel> {
        let n = self.n() as f64;
        let mut best: Option<(f64, PlsModel)> = None;
        for p in 1..=p_max {
            let model = match self.model_with_p(p) {
                Ok(m) => m,
                Err(e) => {
                    log::debug!("p = {p} failed: {e}");
                    continue;
                }
            };
            let rss = self.training_rss(&model)?;
            let bic = n * (rss / n).ln() + model.p() as f64 * n.ln();
            if bic.is_nan() {
                continue;
            }
            if best.as_ref().is_none_or(|(b, _)| bic < *b) {
                best = Some((bic, model));
            }
        }
        let (_, mut model) = best.ok_or(P3lsError::PSelectionFailed)?;
        model.config.selection = PSelection::Bic { p_max };
        Ok(model)
    }

    pub fn model(&self) -> Result<PlsModel> {
        match self.config.selection {
            PSelection::Fixed { p } => self.model_with_p(p),
            PSelection::Bic { p_max } => self.select_p_bic(p_max),
        }
    }
}

/// Fits the full pipeline: covariance, eigenbasis, scores, PLS directions,
/// coefficients.
pub fn fit_p3ls(patterns: &[PointPattern], y: &[f64], cfg: &FitConfig) -> Result<PlsModel> {
    PreparedFit::new(patterns, y, cfg)?.model()
}

/// Finite-dimensional solution in the iterate basis: `γ = H⁻¹α` with
/// `h_jk = ∫ K^{j+1}(b) K^k(b)` and `α_j = ∫ K(b) K^j(b)`.
#[derive(Debug, Clone)]
pub struct GammaCheck {
    pub gamma: Vec<f64>,
    pub h: DMatrix<f64>,
    pub alpha: Vec<f64>,
    /// Smallest eigenvalue of `H`.
    pub min_eigenvalue: f64,
    pub condition_number: f64,
    pub ill_conditioned: bool,
}

/// Needs `p + 1` iterates because `h_jk` reaches one step further.
pub fn gamma_cross_check(iterates: &[Curve], p: usize) -> Result<GammaCheck> {
    if p == 0 || iterates.len() < p + 1 {
        return Err(P3lsError::DimensionMismatch(format!(
            "{} iterates cannot support p = {p}; need p + 1",
            iterates.len()
        )));
    }
    let mut h = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in 0..p {
            h[(j, k)] = inner_l2(&iterates[j + 1], &iterates[k])?;
        }
    }
    let alpha: Vec<f64> = (0..p)
        .map(|j| inner_l2(&iterates[0], &iterates[j]))
        .collect::<Result<_>>()?;
    let cond = condition_number(&h);
    let min_eigenvalue = sym_eigen(&h)?.eigenvalues.last().copied().unwrap_or(0.0);
    let gamma = solve_least_squares(&h, &DVector::from_column_slice(&alpha))?;
    Ok(GammaCheck {
        gamma: gamma.iter().copied().collect(),
        h,
        alpha,
        min_eigenvalue,
        condition_number: cond,
        ill_conditioned: !(cond < ILL_CONDITIONED),
    })
}

/// `Σ_j γ_j ∫ X^c K^j(b)` for each centered curve.
pub fn fitted_from_gamma(centered: &[Curve], iterates: &[Curve], gamma: &[f64]) -> Result<Vec<f64>> {
    centered
        .iter()
        .map(|x| {
            gamma
                .iter()
                .zip(iterates)
                .map(|(g, it)| Ok(g * inner_l2(x, it)?))
                .sum::<Result<f64>>()
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    grid: Grid,
    bin_edges: Vec<f64>,
    config: ModelConfig,
    spectrum: Vec<f64>,
    eigenfunctions: Vec<Vec<f64>>,
    mean_log_intensity: Option<Vec<f64>>,
    psis: Vec<Vec<f64>>,
    betas: Vec<f64>,
    bhat: Vec<f64>,
    xbar: Vec<f64>,
    ybar: f64,
}

const MODEL_FORMAT: &str = "p3ls-model";
const MODEL_VERSION: u32 = 1;

impl PlsModel {
    pub fn to_json(&self) -> String {
        let values = |c: &Curve| c.values().to_vec();
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            grid: self.grid,
            bin_edges: self.partition().edges().to_vec(),
            config: self.config.clone(),
            spectrum: self.spectrum.clone(),
            eigenfunctions: self.basis.functions().iter().map(values).collect(),
            mean_log_intensity: self.basis.offset().map(values),
            psis: self.psis.iter().map(values).collect(),
            betas: self.betas.clone(),
            bhat: values(&self.bhat),
            xbar: values(&self.xbar),
            ybar: self.ybar,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| P3lsError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(P3lsError::Format(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        let grid = Grid::uniform(file.grid.start(), file.grid.end(), file.grid.len())
            .map_err(|e| P3lsError::Format(e.to_string()))?;
        let curve = |v: Vec<f64>| Curve::new(grid, v).map_err(|e| P3lsError::Format(e.to_string()));
        let partition = BinPartition::from_edges(file.bin_edges).map_err(|e| P3lsError::Format(e.to_string()))?;
        let functions = file.eigenfunctions.into_iter().map(curve).collect::<Result<Vec<_>>>()?;
        let mut basis = EigenBasis::new(functions, partition).map_err(|e| P3lsError::Format(e.to_string()))?;
        if let Some(mu) = file.mean_log_intensity {
            basis = basis.with_offset(curve(mu)?)?;
        }
        let psis = file.psis.into_iter().map(curve).collect::<Result<Vec<_>>>()?;
        if psis.len() != file.betas.len() {
            return Err(P3lsError::Format("directions and coefficients differ in count".into()));
        }
        Ok(Self {
            grid,
            basis,
            spectrum: file.spectrum,
            psis,
            betas: file.betas,
            bhat: curve(file.bhat)?,
            xbar: curve(file.xbar)?,
            ybar: file.ybar,
            config: file.config,
        })
    }
}
