//! Per-subject log-intensity recovery: Poisson log-linear regression of bin
//! counts on the leading covariance eigenfunctions, then reconstruction of
//! the truncated expansion on the grid.

use nalgebra::{DMatrix, DVector};

use crate::covariance::CovarianceEstimate;
use crate::error::{P3lsError, Result};
use crate::numerics::{inner_l2, solve_least_squares, Curve, Grid};
use crate::pointprocess::{BinPartition, CountVector};

pub const SCORE_GRADIENT_TOL: f64 = 1e-8;
pub const SCORE_MAX_ITERATIONS: usize = 100;
const MAX_STEP_HALVINGS: usize = 60;

/// Leading eigenfunctions together with their values at the bin midpoints.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    grid: Grid,
    functions: Vec<Curve>,
    partition: BinPartition,
    /// `M × q`: row ℓ holds `φ_1(t̄_ℓ), …, φ_q(t̄_ℓ)`.
    at_midpoints: DMatrix<f64>,
    /// Fixed log-intensity added to every linear predictor.
    offset: Option<Curve>,
    offset_at_midpoints: Option<DVector<f64>>,
}

impl EigenBasis {
    /// `functions` must be L²-orthonormal on their common grid.
    pub fn new(functions: Vec<Curve>, partition: BinPartition) -> Result<Self> {
        let first = functions
            .first()
            .ok_or_else(|| P3lsError::InvalidConfig("eigenbasis needs at least one function".into()))?;
        let grid = *first.grid();
        for f in &functions {
            if *f.grid() != grid {
                return Err(P3lsError::GridMismatch);
            }
        }
        let gw = grid.window();
        let pw = partition.window();
        let tol = 1e-9 * gw.length();
        if (gw.start - pw.start).abs() > tol || (gw.end - pw.end).abs() > tol {
            return Err(P3lsError::WindowMismatch("bins and grid cover different windows".into()));
        }
        let q = functions.len();
        if partition.len() < q {
            return Err(P3lsError::DimensionMismatch(format!(
                "{} bins cannot identify {q} scores",
                partition.len()
            )));
        }
        for i in 0..q {
            for j in 0..=i {
                let ip = inner_l2(&functions[i], &functions[j])?;
                let target = if i == j { 1.0 } else { 0.0 };
                if (ip - target).abs() > 1e-8 {
                    return Err(P3lsError::InvalidConfig(format!(
                        "basis functions {i} and {j} are not orthonormal (inner product {ip})"
                    )));
                }
            }
        }
        let aligned = partition.len() == grid.len();
        let midpoints = partition.midpoints();
        let at_midpoints = DMatrix::from_fn(partition.len(), q, |l, j| {
            if aligned {
                functions[j].values()[l]
            } else {
                functions[j].interpolate(midpoints[l])
            }
        });
        Ok(Self {
            grid,
            functions,
            partition,
            at_midpoints,
            offset: None,
            offset_at_midpoints: None,
        })
    }

    /// Adds a known curve `μ` to the expansion, so that the linear predictor
    /// becomes `μ + Σ ξ_ℓ φ_ℓ`.
    pub fn with_offset(mut self, offset: Curve) -> Result<Self> {
        if *offset.grid() != self.grid {
            return Err(P3lsError::GridMismatch);
        }
        let aligned = self.partition.len() == self.grid.len();
        let mid = self.partition.midpoints();
        self.offset_at_midpoints = Some(DVector::from_iterator(
            mid.len(),
            mid.iter()
                .enumerate()
                .map(|(l, &t)| if aligned { offset.values()[l] } else { offset.interpolate(t) }),
        ));
        self.offset = Some(offset);
        Ok(self)
    }

    pub fn offset(&self) -> Option<&Curve> {
        self.offset.as_ref()
    }

    /// The `q` leading eigenfunctions of a covariance estimate.
    pub fn from_covariance(cov: &CovarianceEstimate, q: usize, partition: BinPartition) -> Result<Self> {
        if q == 0 || q > cov.eigenfunctions.len() {
            return Err(P3lsError::InvalidConfig(format!(
                "cannot take {q} of {} eigenfunctions",
                cov.eigenfunctions.len()
            )));
        }
        Self::new(cov.eigenfunctions[..q].to_vec(), partition)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn functions(&self) -> &[Curve] {
        &self.functions
    }

    pub fn partition(&self) -> &BinPartition {
        &self.partition
    }

    pub fn at_midpoints(&self) -> &DMatrix<f64> {
        &self.at_midpoints
    }

    pub fn q(&self) -> usize {
        self.functions.len()
    }
}

/// Fitted scores and reconstructed log-intensity of one subject.
#[derive(Debug, Clone)]
pub struct IntensityEstimate {
    pub subject_id: String,
    pub scores: Vec<f64>,
    pub curve: Curve,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood at the start and after every accepted Newton step.
    pub log_likelihood_path: Vec<f64>,
}

impl IntensityEstimate {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_path.last().expect("at least the initial value")
    }
}

/// `Σ_ℓ N_ℓ η_ℓ − |B_ℓ| exp(η_ℓ)`, the Poisson log-likelihood without the
/// `log N_ℓ!` constant.
pub fn poisson_log_likelihood(counts: &[u64], widths: &[f64], eta: &[f64]) -> f64 {
    counts
        .iter()
        .zip(widths)
        .zip(eta)
        .map(|((&n, &w), &e)| n as f64 * e - w * e.exp())
        .sum()
}

fn same_partition(a: &BinPartition, b: &BinPartition) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let tol = 1e-9 * a.window().length();
    a.edges().iter().zip(b.edges()).all(|(x, y)| (x - y).abs() <= tol)
}

/// Poisson maximum-likelihood scores by Newton's method with step halving.
///
/// Starts from the least-squares projection of `log((N + 0.5)/|B|)` and
/// stops once the gradient ∞-norm drops below [`SCORE_GRADIENT_TOL`] or after
/// [`SCORE_MAX_ITERATIONS`] steps. When the likelihood stops changing in
/// floating point first, the fit still counts as converged if the Newton
/// decrement is below the resolution of the log-likelihood.
pub fn fit_scores(counts: &CountVector, basis: &EigenBasis) -> Result<IntensityEstimate> {
    if !same_partition(counts.partition(), basis.partition()) {
        return Err(P3lsError::WindowMismatch(format!(
            "counts of subject {} use a different bin partition than the basis",
            counts.subject_id()
        )));
    }
    let n = counts.counts();
    if n.iter().all(|&c| c == 0) {
        return Err(P3lsError::DegenerateLikelihood(counts.subject_id().to_string()));
    }
    let widths = counts.partition().widths();
    let a = basis.at_midpoints();
    let total: f64 = n.iter().map(|&c| c as f64).sum();
    let nf = DVector::from_iterator(n.len(), n.iter().map(|&c| c as f64));

    let offset = basis
        .offset_at_midpoints
        .clone()
        .unwrap_or_else(|| DVector::zeros(n.len()));
    let start = DVector::from_iterator(
        n.len(),
        n.iter().zip(&widths).map(|(&c, &w)| ((c as f64 + 0.5) / w).ln()),
    ) - &offset;
    let mut xi = solve_least_squares(a, &start)?;
    let mut eta = a * &xi + &offset;
    let mut ll = poisson_log_likelihood(n, &widths, eta.as_slice());
    let mut path = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < SCORE_MAX_ITERATIONS {
        let mu = DVector::from_iterator(
            n.len(),
            eta.iter().zip(&widths).map(|(e, w)| w * e.exp()),
        );
        let grad = a.tr_mul(&(&nf - &mu));
        let grad_norm = grad.amax();
        if grad_norm < SCORE_GRADIENT_TOL {
            converged = true;
            break;
        }
        let weighted = DMatrix::from_fn(a.nrows(), a.ncols(), |l, j| a[(l, j)] * mu[l]);
        let hess = a.tr_mul(&weighted);
        let step = match hess.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => solve_least_squares(&hess, &grad)?,
        };
        // predicted gain of a full Newton step
        let decrement = 0.5 * grad.dot(&step);
        let at_floor =
            grad_norm < SCORE_GRADIENT_TOL * total.max(1.0) || decrement <= 1e-10 * ll.abs().max(1.0);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_STEP_HALVINGS {
            let candidate = &xi + &step * t;
            let cand_eta = a * &candidate + &offset;
            let cand_ll = poisson_log_likelihood(n, &widths, cand_eta.as_slice());
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((candidate, cand_eta, cand_ll));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((candidate, cand_eta, cand_ll)) => {
                let stalled = cand_ll == ll;
                xi = candidate;
                eta = cand_eta;
                ll = cand_ll;
                path.push(ll);
                if stalled {
                    converged = at_floor;
                    break;
                }
            }
            None => {
                // no ascent along the Newton direction: roundoff floor reached
                converged = at_floor;
                break;
            }
        }
    }

    let scores: Vec<f64> = xi.iter().copied().collect();
    let curve = reconstruct_log_intensity(&scores, basis)?;
    Ok(IntensityEstimate {
        subject_id: counts.subject_id().to_string(),
        scores,
        curve,
        converged,
        iterations,
        log_likelihood_path: path,
    })
}

/// `Σ_ℓ scores_ℓ φ_ℓ` on the grid.
pub fn reconstruct_log_intensity(scores: &[f64], basis: &EigenBasis) -> Result<Curve> {
    if scores.len() != basis.q() {
        return Err(P3lsError::DimensionMismatch(format!(
            "{} scores for {} basis functions",
            scores.len(),
            basis.q()
        )));
    }
    let grid = basis.grid;
    let mut values = match &basis.offset {
        Some(c) => c.values().to_vec(),
        None => vec![0.0; grid.len()],
    };
    for (k, v) in values.iter_mut().enumerate() {
        for (s, f) in scores.iter().zip(&basis.functions) {
            *v += s * f.values()[k];
        }
    }
    Curve::new(grid, values)
}
