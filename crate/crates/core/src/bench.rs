//! Simulation study harness: data generation for the four coefficient
//! patterns, error metrics, seeded replicate orchestration and bandwidth
//! cross-validation.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{P3lsError, Result};
use crate::fpcr::{smoothed_log_intensity, PreparedFpcr};
use crate::intensity::fit_scores;
use crate::numerics::{inner_l2, quadrature, Curve, Grid};
use crate::pls::{FitConfig, PSelection, PreparedFit};
use crate::pointprocess::{
    bin_counts, jitter_histogram, sample_sim_log_intensity, simulate_inhomogeneous_poisson, BinPartition,
    PointPattern, SimBasis, SimConfig,
};

/// Spline coefficients `ϑ` of the true coefficient function for a case.
pub fn case_coefficients(case: u8) -> Result<Vec<f64>> {
    let sign = |j: usize| -> f64 {
        match case {
            1 => 1.0,
            2 => {
                if j <= 10 {
                    1.0
                } else {
                    -1.0
                }
            }
            3 => match j {
                2..=6 => 1.0,
                7..=12 => -1.0,
                _ => 1.0,
            },
            _ => match j {
                2..=5 => -1.0,
                6..=10 => 1.0,
                11..=15 => -1.0,
                _ => 1.0,
            },
        }
    };
    if !(1..=4).contains(&case) {
        return Err(P3lsError::UnknownCase(case));
    }
    Ok((1..=20).map(|j| if j == 1 { 0.0 } else { sign(j) }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    P3ls,
    Fpcr,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::P3ls => "p3ls",
            Method::Fpcr => "fpcr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether methods see the raw event times or only their histogram,
/// re-expanded by uniform jitter within bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataMode {
    Events,
    Histogram,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Generator settings, including the case and the master seed.
    pub sim: SimConfig,
    pub n_total: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub replicates: usize,
    pub p_min: usize,
    pub p_max: usize,
    pub h: f64,
    pub bins: usize,
    pub grid_size: usize,
    pub variance_threshold: f64,
    pub methods: Vec<Method>,
    pub data_mode: DataMode,
    /// Passed to [`FitConfig::mean_offset`].
    pub mean_offset: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            n_total: 200,
            n_train: 100,
            n_test: 100,
            replicates: 20,
            p_min: 1,
            p_max: 10,
            h: 2.0,
            bins: 100,
            grid_size: 100,
            variance_threshold: 0.9,
            methods: vec![Method::P3ls, Method::Fpcr],
            data_mode: DataMode::Events,
            mean_offset: true,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.n_train + self.n_test > self.n_total {
            return Err(P3lsError::InvalidConfig(format!(
                "n_train + n_test = {} exceeds n_total = {}",
                self.n_train + self.n_test,
                self.n_total
            )));
        }
        if self.replicates == 0 {
            return Err(P3lsError::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.p_min == 0 || self.p_min > self.p_max {
            return Err(P3lsError::InvalidConfig(format!(
                "invalid component range {}..={}",
                self.p_min, self.p_max
            )));
        }
        if self.n_train < 3 || self.n_test == 0 {
            return Err(P3lsError::InvalidConfig("need at least 3 training and 1 test subject".into()));
        }
        if self.methods.is_empty() {
            return Err(P3lsError::InvalidConfig("no methods selected".into()));
        }
        self.fit_config(PSelection::Fixed { p: self.p_max }).validate()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::on_window(self.sim.window, self.grid_size)
    }

    pub fn fit_config(&self, selection: PSelection) -> FitConfig {
        FitConfig {
            h: self.h,
            variance_threshold: self.variance_threshold,
            grid_size: self.grid_size,
            bins: Some(self.bins),
            window: Some(self.sim.window),
            selection,
            mean_offset: self.mean_offset,
        }
    }

    /// Random stream of replicate `r`, disjoint from every other replicate.
    pub fn replicate_rng(&self, replicate: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.sim.seed);
        rng.set_stream(replicate as u64 + 1);
        rng
    }
}

/// Simulated subjects with their ground truth.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub patterns: Vec<PointPattern>,
    pub y: Vec<f64>,
    pub truth_b: Curve,
    pub truth_x: Vec<Curve>,
}

impl Replicate {
    /// Subjects `range` as a separate replicate sharing the same truth.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Replicate {
        Replicate {
            patterns: self.patterns[range.clone()].to_vec(),
            y: self.y[range.clone()].to_vec(),
            truth_b: self.truth_b.clone(),
            truth_x: self.truth_x[range].to_vec(),
        }
    }
}

/// `n_total` subjects: each draws a log-intensity, a response
/// `a + ∫ b X + ε`, and a point pattern.
pub fn generate_replicate<R: Rng + ?Sized>(cfg: &StudyConfig, rng: &mut R) -> Result<Replicate> {
    generate_subjects(&cfg.sim, cfg.grid()?, cfg.n_total, rng)
}

pub fn generate_subjects<R: Rng + ?Sized>(sim: &SimConfig, grid: Grid, n: usize, rng: &mut R) -> Result<Replicate> {
    sim.validate()?;
    let basis = SimBasis::new(sim, grid)?;
    let truth_b = basis.combine(&case_coefficients(sim.case)?)?;
    let mut patterns = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut truth_x = Vec::with_capacity(n);
    let width = n.to_string().len();
    for i in 0..n {
        let (x, _) = sample_sim_log_intensity(sim, &basis, rng)?;
        let noise: f64 = rng.sample(StandardNormal);
        y.push(sim.intercept + inner_l2(&truth_b, &x)? + sim.noise_sd * noise);
        patterns.push(simulate_inhomogeneous_poisson(format!("s{:0width$}", i + 1), &x, rng)?);
        truth_x.push(x);
    }
    Ok(Replicate {
        patterns,
        y,
        truth_b,
        truth_x,
    })
}

/// `∫ (b − b̂)²`.
pub fn mse_estimation(b_true: &Curve, b_est: &Curve) -> Result<f64> {
    let d = b_true.sub(b_est)?;
    Ok(quadrature(&Curve::new(*d.grid(), d.values().iter().map(|v| v * v).collect())?))
}

/// `m⁻¹ Σ (y − ŷ)²`.
pub fn mspe(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(P3lsError::DimensionMismatch(format!(
            "{} responses and {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Median of the finite values, `NaN` when there are none.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile of the finite values.
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = prob.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub replicate: usize,
    pub method: Method,
    pub p: usize,
    pub rmsee: f64,
    pub rmspe: f64,
    /// `"ok"` or `"failed: <reason>"`.
    pub status: String,
    /// Directions actually used, below `p` when iterates became dependent.
    pub p_effective: usize,
    /// `max |G − I|` for the PLS directions under the `K̂⁺` inner product.
    pub gram_error: Option<f64>,
}

impl StudyRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(replicate: usize, method: Method, p: usize, err: &P3lsError) -> Self {
        Self {
            replicate,
            method,
            p,
            rmsee: f64::NAN,
            rmspe: f64::NAN,
            status: format!("failed: {err}"),
            p_effective: 0,
            gram_error: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    /// Ordered by replicate, then method in config order, then `p`.
    pub records: Vec<StudyRecord>,
    pub elapsed_seconds: f64,
}

impl StudyResult {
    /// `rMSPE` values of successful records for one method and `p`.
    pub fn rmspe(&self, method: Method, p: usize) -> Vec<f64> {
        self.select(method, p).map(|r| r.rmspe).collect()
    }

    pub fn rmsee(&self, method: Method, p: usize) -> Vec<f64> {
        self.select(method, p).map(|r| r.rmsee).collect()
    }

    fn select(&self, method: Method, p: usize) -> impl Iterator<Item = &StudyRecord> {
        self.records
            .iter()
            .filter(move |r| r.method == method && r.p == p && r.is_ok())
    }

    pub fn median_rmspe(&self, method: Method, p: usize) -> f64 {
        median(&self.rmspe(method, p))
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }

    /// Five-number summaries per method, `p` and metric.
    pub fn quantiles(&self) -> Vec<QuantileRow> {
        let mut rows = Vec::new();
        for &method in &self.config.methods {
            for p in self.config.p_min..=self.config.p_max {
                for (metric, values) in [("rmsee", self.rmsee(method, p)), ("rmspe", self.rmspe(method, p))] {
                    rows.push(QuantileRow {
                        method,
                        p,
                        metric,
                        count: values.len(),
                        min: quantile(&values, 0.0),
                        q1: quantile(&values, 0.25),
                        median: quantile(&values, 0.5),
                        q3: quantile(&values, 0.75),
                        max: quantile(&values, 1.0),
                    });
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRow {
    pub method: Method,
    pub p: usize,
    pub metric: &'static str,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn as_histogram<R: Rng + ?Sized>(patterns: &[PointPattern], partition: &BinPartition, rng: &mut R) -> Result<Vec<PointPattern>> {
    patterns
        .iter()
        .map(|p| Ok(jitter_histogram(&bin_counts(p, partition)?, rng)))
        .collect()
}

/// Fits and scores both methods for every `p` on one train/test split.
pub fn evaluate_split(
    cfg: &StudyConfig,
    replicate: usize,
    train: &Replicate,
    test: &Replicate,
) -> Vec<StudyRecord> {
    let mut records = Vec::new();
    for &method in &cfg.methods {
        let result = match method {
            Method::P3ls => evaluate_p3ls(cfg, replicate, train, test),
            Method::Fpcr => evaluate_fpcr(cfg, replicate, train, test),
        };
        match result {
            Ok(mut r) => records.append(&mut r),
            Err(e) => {
                log::warn!("replicate {replicate}, {method}: {e}");
                records.extend((cfg.p_min..=cfg.p_max).map(|p| StudyRecord::failed(replicate, method, p, &e)));
            }
        }
    }
    records
}

fn evaluate_p3ls(cfg: &StudyConfig, replicate: usize, train: &Replicate, test: &Replicate) -> Result<Vec<StudyRecord>> {
    let prepared = PreparedFit::new(
        &train.patterns,
        &train.y,
        &cfg.fit_config(PSelection::Fixed { p: cfg.p_max }),
    )?;
    let test_curves = test
        .patterns
        .iter()
        .map(|p| Ok(fit_scores(&bin_counts(p, prepared.basis.partition())?, &prepared.basis)?.curve))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for p in cfg.p_min..=cfg.p_max {
        let record = prepared.model_with_p(p).and_then(|model| {
            let preds = test_curves
                .iter()
                .map(|c| model.predict_curve(c))
                .collect::<Result<Vec<_>>>()?;
            let gram = prepared.inner.gram(&model.psis)?;
            let gram_error = (gram - nalgebra::DMatrix::identity(model.p(), model.p())).amax();
            Ok(StudyRecord {
                replicate,
                method: Method::P3ls,
                p,
                rmsee: mse_estimation(&train.truth_b, &model.bhat)?.sqrt(),
                rmspe: mspe(&test.y, &preds)?.sqrt(),
                status: "ok".into(),
                p_effective: model.p(),
                gram_error: Some(gram_error),
            })
        });
        out.push(record.unwrap_or_else(|e| StudyRecord::failed(replicate, Method::P3ls, p, &e)));
    }
    Ok(out)
}

fn evaluate_fpcr(cfg: &StudyConfig, replicate: usize, train: &Replicate, test: &Replicate) -> Result<Vec<StudyRecord>> {
    let grid = cfg.grid()?;
    let prepared = PreparedFpcr::new(&train.patterns, grid, cfg.h)?;
    let test_curves = test
        .patterns
        .iter()
        .map(|p| smoothed_log_intensity(p, grid, cfg.h))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for p in cfg.p_min..=cfg.p_max {
        let record = prepared.model(&train.y, p).and_then(|model| {
            let preds = test_curves
                .iter()
                .map(|c| model.predict_curve(c))
                .collect::<Result<Vec<_>>>()?;
            Ok(StudyRecord {
                replicate,
                method: Method::Fpcr,
                p,
                rmsee: mse_estimation(&train.truth_b, &model.implied_coefficient())?.sqrt(),
                rmspe: mspe(&test.y, &preds)?.sqrt(),
                status: "ok".into(),
                p_effective: p,
                gram_error: None,
            })
        });
        out.push(record.unwrap_or_else(|e| StudyRecord::failed(replicate, Method::Fpcr, p, &e)));
    }
    Ok(out)
}

/// One replicate: generate, split into the first `n_train` and next `n_test`
/// subjects, optionally reduce to histograms, fit and score.
pub fn run_replicate(cfg: &StudyConfig, replicate: usize) -> Vec<StudyRecord> {
    let mut rng = cfg.replicate_rng(replicate);
    let prepared = generate_replicate(cfg, &mut rng).and_then(|data| {
        let mut train = data.subset(0..cfg.n_train);
        let mut test = data.subset(cfg.n_train..cfg.n_train + cfg.n_test);
        if cfg.data_mode == DataMode::Histogram {
            let partition = BinPartition::uniform(cfg.sim.window, cfg.bins)?;
            train.patterns = as_histogram(&train.patterns, &partition, &mut rng)?;
            test.patterns = as_histogram(&test.patterns, &partition, &mut rng)?;
        }
        Ok((train, test))
    });
    match prepared {
        Ok((train, test)) => evaluate_split(cfg, replicate, &train, &test),
        Err(e) => {
            log::warn!("replicate {replicate}: {e}");
            cfg.methods
                .iter()
                .flat_map(|&m| (cfg.p_min..=cfg.p_max).map(move |p| (m, p)))
                .map(|(m, p)| StudyRecord::failed(replicate, m, p, &e))
                .collect()
        }
    }
}

/// All replicates, in parallel; the result depends only on `cfg`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let started = Instant::now();
    let per_replicate: Vec<Vec<StudyRecord>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect();
    Ok(StudyResult {
        config: cfg.clone(),
        records: per_replicate.into_iter().flatten().collect(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Held-out error of one `(h, fold)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub h: f64,
    pub fold: usize,
    pub rmspe: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvTable {
    pub cells: Vec<CvCell>,
    /// `(h, average rMSPE over successful folds)`.
    pub summary: Vec<(f64, f64)>,
}

impl CvTable {
    /// Ratio of the largest to the smallest average error across `h`.
    pub fn spread(&self) -> f64 {
        let avgs: Vec<f64> = self.summary.iter().map(|(_, a)| *a).filter(|a| a.is_finite()).collect();
        let max = avgs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = avgs.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn best_h(&self) -> Option<f64> {
        self.summary
            .iter()
            .filter(|(_, a)| a.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(h, _)| *h)
    }
}

/// Contiguous index blocks `[k n / folds, (k + 1) n / folds)`.
pub fn contiguous_folds(n: usize, folds: usize) -> Vec<std::ops::Range<usize>> {
    (0..folds).map(|k| k * n / folds..(k + 1) * n / folds).collect()
}

/// K-fold cross-validated rMSPE of the PLS predictor for each bandwidth.
///
/// `base` supplies everything but `h`; its selection rule is used as is.
pub fn cross_validate_h(
    patterns: &[PointPattern],
    y: &[f64],
    base: &FitConfig,
    h_grid: &[f64],
    folds: usize,
) -> Result<CvTable> {
    if folds < 2 {
        return Err(P3lsError::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    if h_grid.is_empty() {
        return Err(P3lsError::InvalidConfig("empty bandwidth grid".into()));
    }
    if patterns.len() != y.len() {
        return Err(P3lsError::DimensionMismatch(format!(
            "{} subjects and {} responses",
            patterns.len(),
            y.len()
        )));
    }
    if patterns.len() < folds {
        return Err(P3lsError::TooFewSubjects {
            needed: folds,
            got: patterns.len(),
        });
    }
    for &h in h_grid {
        if !(h > 0.0 && h.is_finite()) {
            return Err(P3lsError::InvalidBandwidth(h));
        }
    }
    let blocks = contiguous_folds(patterns.len(), folds);
    let tasks: Vec<(f64, usize)> = h_grid
        .iter()
        .flat_map(|&h| (0..folds).map(move |k| (h, k)))
        .collect();
    let cells: Vec<CvCell> = tasks
        .par_iter()
        .map(|&(h, k)| {
            let held = blocks[k].clone();
            let train_idx: Vec<usize> = (0..patterns.len()).filter(|i| !held.contains(i)).collect();
            let train_p: Vec<PointPattern> = train_idx.iter().map(|&i| patterns[i].clone()).collect();
            let train_y: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
            let cfg = FitConfig { h, ..base.clone() };
            let outcome = PreparedFit::new(&train_p, &train_y, &cfg).and_then(|prep| {
                let model = prep.model()?;
                let preds = patterns[held.clone()]
                    .iter()
                    .map(|p| crate::pls::predict(&model, crate::pls::NewData::Events(p)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(mspe(&y[held.clone()], &preds)?.sqrt())
            });
            match outcome {
                Ok(rmspe) => CvCell {
                    h,
                    fold: k,
                    rmspe,
                    status: "ok".into(),
                },
                Err(e) => {
                    log::warn!("h = {h}, fold {k}: {e}");
                    CvCell {
                        h,
                        fold: k,
                        rmspe: f64::NAN,
                        status: format!("failed: {e}"),
                    }
                }
            }
        })
        .collect();
    let summary = h_grid
        .iter()
        .map(|&h| {
            let ok: Vec<f64> = cells
                .iter()
                .filter(|c| c.h == h && c.status == "ok")
                .map(|c| c.rmspe)
                .collect();
            let avg = if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().sum::<f64>() / ok.len() as f64
            };
            (h, avg)
        })
        .collect();
    Ok(CvTable { cells, summary })
}

/// Bandwidth cross-validation on the training subjects of the first study
/// replicate, with `p` fixed.
pub fn study_cross_validation(cfg: &StudyConfig, p: usize, h_grid: &[f64], folds: usize) -> Result<CvTable> {
    cfg.validate()?;
    let data = generate_replicate(cfg, &mut cfg.replicate_rng(0))?;
    let train = data.subset(0..cfg.n_train);
    cross_validate_h(
        &train.patterns,
        &train.y,
        &cfg.fit_config(PSelection::Fixed { p }),
        h_grid,
        folds,
    )
}
