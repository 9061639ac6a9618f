//! Event-time data, binning, histogram jitter and log-Gaussian Cox process
//! simulation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bspline::BSplineBasis;
use crate::error::{P3lsError, Result};
use crate::numerics::{Curve, Grid, GridMatrix, Window};

/// Event times of one subject inside an observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    subject_id: String,
    events: Vec<f64>,
    window: Window,
}

impl PointPattern {
    /// Sorts the events; fails if any lies outside the window.
    pub fn new(subject_id: impl Into<String>, mut events: Vec<f64>, window: Window) -> Result<Self> {
        for &t in &events {
            if !t.is_finite() || !window.contains(t) {
                return Err(P3lsError::OutOfWindow {
                    time: t,
                    start: window.start,
                    end: window.end,
                });
            }
        }
        events.sort_by(f64::total_cmp);
        Ok(Self {
            subject_id: subject_id.into(),
            events,
            window,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events in `[a, b)`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.events.partition_point(|&t| t < a);
        let hi = self.events.partition_point(|&t| t < b);
        hi - lo
    }

    /// The same events measured in a rescaled clock `t ↦ offset + scale·t`.
    pub fn rescaled(&self, scale: f64, offset: f64) -> Result<Self> {
        let window = Window::new(offset + scale * self.window.start, offset + scale * self.window.end)?;
        let events = self.events.iter().map(|t| offset + scale * t).collect();
        Self::new(self.subject_id.clone(), events, window)
    }
}

/// Contiguous bins `[e₀, e₁), [e₁, e₂), …, [e_{M-1}, e_M]` covering a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPartition {
    edges: Vec<f64>,
}

impl BinPartition {
    pub fn uniform(window: Window, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(P3lsError::InvalidConfig("a partition needs at least one bin".into()));
        }
        let width = window.length() / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|k| window.start + k as f64 * width).collect();
        edges.push(window.end);
        Ok(Self { edges })
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(P3lsError::InvalidConfig("a partition needs at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(P3lsError::InvalidConfig("partition edges must increase strictly".into()));
        }
        Ok(Self { edges })
    }

    pub fn window(&self) -> Window {
        Window {
            start: self.edges[0],
            end: *self.edges.last().expect("non-empty edges"),
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    /// Bin index of `t`; the last bin is closed on the right.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let window = self.window();
        if !window.contains(t) {
            return None;
        }
        let idx = self.edges.partition_point(|&e| e <= t);
        Some(idx.saturating_sub(1).min(self.len() - 1))
    }
}

/// Per-bin event counts `N_ℓ` of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct CountVector {
    subject_id: String,
    partition: BinPartition,
    counts: Vec<u64>,
}

impl CountVector {
    pub fn new(subject_id: impl Into<String>, partition: BinPartition, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != partition.len() {
            return Err(P3lsError::DimensionMismatch(format!(
                "{} counts for {} bins",
                counts.len(),
                partition.len()
            )));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            partition,
            counts,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn partition(&self) -> &BinPartition {
        &self.partition
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn same_window(a: Window, b: Window) -> bool {
    let tol = 1e-9 * (a.length().abs() + b.length().abs());
    (a.start - b.start).abs() <= tol && (a.end - b.end).abs() <= tol
}

/// Counts events per bin.
pub fn bin_counts(pattern: &PointPattern, partition: &BinPartition) -> Result<CountVector> {
    if !same_window(pattern.window(), partition.window()) {
        return Err(P3lsError::WindowMismatch(format!(
            "pattern window [{}, {}] vs partition [{}, {}]",
            pattern.window.start,
            pattern.window.end,
            partition.window().start,
            partition.window().end
        )));
    }
    let mut counts = vec![0u64; partition.len()];
    for &t in pattern.events() {
        let idx = partition.locate(t).ok_or(P3lsError::OutOfWindow {
            time: t,
            start: partition.window().start,
            end: partition.window().end,
        })?;
        counts[idx] += 1;
    }
    CountVector::new(pattern.subject_id.clone(), partition.clone(), counts)
}

/// Replaces each bin count by that many uniform event times inside the bin.
pub fn jitter_histogram<R: Rng + ?Sized>(counts: &CountVector, rng: &mut R) -> PointPattern {
    let partition = counts.partition();
    let mut events = Vec::with_capacity(counts.total() as usize);
    for (l, &n) in counts.counts().iter().enumerate() {
        let (a, b) = (partition.edges[l], partition.edges[l + 1]);
        for _ in 0..n {
            // random_range on floats stays strictly below b
            events.push(rng.random_range(a..b));
        }
    }
    events.sort_by(f64::total_cmp);
    PointPattern {
        subject_id: counts.subject_id.clone(),
        events,
        window: partition.window(),
    }
}

/// Largest admissible expected count per grid cell during simulation.
pub const MAX_CELL_MEAN: f64 = 1e9;

/// Draws a Poisson process whose intensity is `exp(X(t_k))` on each grid cell.
pub fn simulate_inhomogeneous_poisson<R: Rng + ?Sized>(
    subject_id: impl Into<String>,
    log_intensity: &Curve,
    rng: &mut R,
) -> Result<PointPattern> {
    let grid = *log_intensity.grid();
    let step = grid.step();
    let means: Vec<f64> = log_intensity.values().iter().map(|x| x.exp() * step).collect();
    if let Some(&worst) = means.iter().find(|&&m| !(m <= MAX_CELL_MEAN)) {
        return Err(P3lsError::IntensityOverflow(worst));
    }
    let mut events = Vec::new();
    for (k, &mean) in means.iter().enumerate() {
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean)
            .map_err(|e| P3lsError::InvalidConfig(format!("poisson mean {mean}: {e}")))?
            .sample(rng) as u64;
        let lo = grid.start() + k as f64 * step;
        let hi = if k + 1 == grid.len() { grid.end() } else { lo + step };
        for _ in 0..n {
            events.push(rng.random_range(lo..hi));
        }
    }
    events.sort_by(f64::total_cmp);
    Ok(PointPattern {
        subject_id: subject_id.into(),
        events,
        window: grid.window(),
    })
}

/// Parameters of the B-spline log-Gaussian Cox generator used in the
/// simulation study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub eta: f64,
    pub mean_shift: f64,
    pub n_bspline: usize,
    pub window: Window,
    pub case: u8,
    pub noise_sd: f64,
    pub intercept: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eta: 10.0,
            mean_shift: 2.8,
            n_bspline: 20,
            window: Window {
                start: 0.0,
                end: 24.0,
            },
            case: 1,
            noise_sd: 1.0,
            intercept: 0.0,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(P3lsError::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if !(1..=4).contains(&self.case) {
            return Err(P3lsError::UnknownCase(self.case));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(P3lsError::InvalidConfig(format!(
                "noise_sd must be non-negative, got {}",
                self.noise_sd
            )));
        }
        if self.n_bspline < 4 {
            return Err(P3lsError::InvalidConfig("need at least 4 cubic B-splines".into()));
        }
        Window::new(self.window.start, self.window.end)?;
        Ok(())
    }
}

/// The cubic B-spline basis of a [`SimConfig`], together with its grid
/// samples.
#[derive(Debug, Clone)]
pub struct SimBasis {
    pub grid: Grid,
    pub splines: BSplineBasis,
    pub on_grid: Vec<Curve>,
}

impl SimBasis {
    pub fn new(cfg: &SimConfig, grid: Grid) -> Result<Self> {
        cfg.validate()?;
        let splines = BSplineBasis::cubic(cfg.window, cfg.n_bspline)?;
        let on_grid = splines.on_grid(&grid);
        Ok(Self {
            grid,
            splines,
            on_grid,
        })
    }

    /// `Σ_j c_j φ_j` on the grid.
    pub fn combine(&self, coefficients: &[f64]) -> Result<Curve> {
        if coefficients.len() != self.on_grid.len() {
            return Err(P3lsError::DimensionMismatch(format!(
                "{} coefficients for {} splines",
                coefficients.len(),
                self.on_grid.len()
            )));
        }
        let mut out = Curve::zeros(self.grid);
        for (c, phi) in coefficients.iter().zip(&self.on_grid) {
            out.axpy(*c, phi)?;
        }
        Ok(out)
    }
}

/// Random spline weights: `ω₁ = 0`, the second and last `~ N(12, 4²)`, the
/// rest `~ N(20, 10²)`.
pub fn draw_omegas<R: Rng + ?Sized>(n_bspline: usize, rng: &mut R) -> Vec<f64> {
    let edge = Normal::new(12.0, 4.0).expect("valid normal");
    let inner = Normal::new(20.0, 10.0).expect("valid normal");
    (0..n_bspline)
        .map(|j| match j {
            0 => 0.0,
            1 => edge.sample(rng),
            j if j + 1 == n_bspline => edge.sample(rng),
            _ => inner.sample(rng),
        })
        .collect()
}

/// Log-intensity `Σ_j (ω_j/η + shift) φ_j` and its spline coefficients.
pub fn log_intensity_from_omegas(cfg: &SimConfig, basis: &SimBasis, omegas: &[f64]) -> Result<(Curve, Vec<f64>)> {
    let coefficients: Vec<f64> = omegas.iter().map(|w| w / cfg.eta + cfg.mean_shift).collect();
    let curve = basis.combine(&coefficients)?;
    Ok((curve, coefficients))
}

/// One random log-intensity from the simulation-study generator.
pub fn sample_sim_log_intensity<R: Rng + ?Sized>(
    cfg: &SimConfig,
    basis: &SimBasis,
    rng: &mut R,
) -> Result<(Curve, Vec<f64>)> {
    let omegas = draw_omegas(cfg.n_bspline, rng);
    log_intensity_from_omegas(cfg, basis, &omegas)
}

/// Gaussian process on a grid with given mean and covariance, sampled
/// through a Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    mean: Curve,
    factor: DMatrix<f64>,
}

impl GaussianProcess {
    pub fn new(mean: Curve, covariance: &GridMatrix) -> Result<Self> {
        if mean.grid() != covariance.grid() {
            return Err(P3lsError::GridMismatch);
        }
        let k = covariance.entries();
        let scale = k.diagonal().amax().max(f64::MIN_POSITIVE);
        // a tiny diagonal load keeps smooth kernels factorizable
        for jitter in [0.0, 1e-12, 1e-10, 1e-8] {
            let mut loaded = k.clone();
            for i in 0..loaded.nrows() {
                loaded[(i, i)] += jitter * scale;
            }
            if let Some(chol) = loaded.cholesky() {
                return Ok(Self {
                    mean,
                    factor: chol.l(),
                });
            }
        }
        Err(P3lsError::InvalidConfig(
            "covariance is not positive semi-definite".into(),
        ))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Curve {
        let n = self.mean.len();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let draw = &self.factor * z;
        let values = self
            .mean
            .values()
            .iter()
            .zip(draw.iter())
            .map(|(m, d)| m + d)
            .collect();
        Curve::new(*self.mean.grid(), values).expect("finite draw")
    }
}
