//! Command-line front end: argument definitions and the subcommand
//! implementations behind the `p3ls` binary.

pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use p3ls::bench::{self, DataMode, Method, StudyConfig};
use p3ls::covariance::estimate_covariance;
use p3ls::numerics::{Grid, Window};
use p3ls::pls::{predict, FitConfig, NewData, PSelection, PreparedFit};
use p3ls::pointprocess::{bin_counts, jitter_histogram, BinPartition, PointPattern, SimConfig};
use p3ls::{P3lsError, Result};

#[derive(Debug, Parser)]
#[command(name = "p3ls", version, about = "Point process partial least squares")]
pub struct Cli {
    /// Worker threads; defaults to the available cores. Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate subjects from the B-spline log-Gaussian Cox generator.
    Simulate(SimulateArgs),
    /// Fit a model from event times or bin counts and responses.
    Fit(FitArgs),
    /// Predict responses for new subjects with a saved model.
    Predict(PredictArgs),
    /// Estimate the log-intensity covariance and its spectrum.
    Cov(CovArgs),
    /// Run the simulation study comparing P3LS with FPCR.
    Bench(BenchArgs),
    /// Cross-validate the smoothing bandwidth.
    #[command(name = "cv-h")]
    CvH(CvArgs),
}

/// Observation window as `start,end`.
fn parse_window(raw: &str) -> std::result::Result<Window, String> {
    let (a, b) = raw
        .split_once(',')
        .ok_or_else(|| format!("expected `start,end`, got `{raw}`"))?;
    let start: f64 = a.trim().parse().map_err(|_| format!("invalid start `{a}`"))?;
    let end: f64 = b.trim().parse().map_err(|_| format!("invalid end `{b}`"))?;
    Window::new(start, end).map_err(|e| e.to_string())
}

fn parse_case(raw: &str) -> std::result::Result<u8, String> {
    match raw.parse::<u8>() {
        Ok(c @ 1..=4) => Ok(c),
        _ => Err(format!("case must be 1, 2, 3 or 4, got `{raw}`")),
    }
}

fn parse_bandwidth(raw: &str) -> std::result::Result<f64, String> {
    match raw.trim().parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(h),
        _ => Err(format!("bandwidth must be a positive number, got `{raw}`")),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_case)]
    pub case: u8,
    /// Number of subjects.
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = "P3LS_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out_events: PathBuf,
    #[arg(long)]
    pub out_responses: PathBuf,
    /// Writes the true coefficient function as `t,b`.
    #[arg(long)]
    pub out_truth: Option<PathBuf>,
    /// Writes bin counts as well (histogram data).
    #[arg(long)]
    pub out_counts: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false)]
pub struct InputArgs {
    /// Event times, `subject_id,time`.
    #[arg(long, group = "input")]
    pub events: Option<PathBuf>,
    /// Bin counts, `subject_id,bin_start,bin_end,count`.
    #[arg(long, group = "input")]
    pub counts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectRule {
    Bic,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub responses: PathBuf,
    /// Observation window `start,end`; inferred from the data when absent.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    #[arg(long, default_value_t = 2.0)]
    pub h: f64,
    /// Number of bins; defaults to the grid size, or to the bins of a counts file.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 0.9)]
    pub var_threshold: f64,
    /// Fixed number of PLS components.
    #[arg(long, conflicts_with = "select_p")]
    pub p: Option<usize>,
    /// Choose the number of components by an information criterion.
    #[arg(long, value_enum)]
    pub select_p: Option<SelectRule>,
    #[arg(long, default_value_t = 10)]
    pub p_max: usize,
    /// Expand log-intensities around zero instead of the estimated mean.
    #[arg(long)]
    pub no_mean_offset: bool,
    /// Seed for jittering counts into event times.
    #[arg(long, env = "P3LS_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out_model: PathBuf,
    /// Writes fitted scores as `subject_id,ell,score`.
    #[arg(long)]
    pub out_scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CovArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    #[arg(long, default_value_t = 2.0)]
    pub h: f64,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[arg(long)]
    pub out_cov: PathBuf,
    #[arg(long)]
    pub out_spectrum: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = parse_case)]
    pub case: u8,
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[arg(long, default_value_t = 10)]
    pub p_max: usize,
    #[arg(long, env = "P3LS_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 100)]
    pub n_test: usize,
    #[arg(long, default_value_t = 2.0)]
    pub h: f64,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.9)]
    pub var_threshold: f64,
    /// Fit from jittered bin counts instead of the raw event times.
    #[arg(long)]
    pub histogram: bool,
    #[arg(long)]
    pub no_mean_offset: bool,
    /// Results, `replicate,method,p,rmsee,rmspe,status`.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-method, per-p quantiles for boxplots.
    #[arg(long)]
    pub out_quantiles: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    #[arg(long, value_parser = parse_bandwidth, value_delimiter = ',', default_value = "1,2,3,4")]
    pub h_grid: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    /// Components used in every fold.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 0.9)]
    pub var_threshold: f64,
    #[arg(long)]
    pub no_mean_offset: bool,
    /// Per-fold table `h,fold,rmspe,status`.
    #[arg(long)]
    pub out: PathBuf,
    /// Averages `h,avg_rmspe`; defaults to `<out>` with a `.summary.csv` suffix.
    #[arg(long)]
    pub out_summary: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Cov(a) => cov(a),
        Command::Bench(a) => bench_cmd(a),
        Command::CvH(a) => cv_h(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let sim = SimConfig {
        case: a.case,
        noise_sd: a.noise_sd,
        seed: a.seed,
        ..SimConfig::default()
    };
    let grid = Grid::on_window(sim.window, a.grid_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let data = bench::generate_subjects(&sim, grid, a.n, &mut rng)?;
    let ids: Vec<&str> = data.patterns.iter().map(|p| p.subject_id()).collect();
    io::save_events(&a.out_events, &data.patterns)?;
    io::save_responses(&a.out_responses, &ids, &data.y)?;
    if let Some(path) = &a.out_truth {
        io::save_curve(path, "b", &data.truth_b)?;
    }
    if let Some(path) = &a.out_counts {
        let partition = BinPartition::uniform(sim.window, a.bins)?;
        let counts = data
            .patterns
            .iter()
            .map(|p| bin_counts(p, &partition))
            .collect::<Result<Vec<_>>>()?;
        io::save_counts(path, &counts)?;
    }
    let empty = data.patterns.iter().filter(|p| p.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} simulated subjects have no events and are absent from the events file");
    }
    Ok(())
}

/// Patterns from an events file, or jittered from a counts file, together
/// with the bin count a counts file implies.
fn load_patterns(input: &InputArgs, window: Option<Window>, seed: u64) -> Result<(Vec<PointPattern>, Option<usize>)> {
    match (&input.events, &input.counts) {
        (Some(path), _) => Ok((io::load_events(path, window)?, None)),
        (None, Some(path)) => {
            let counts = io::load_counts(path)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bins = counts[0].partition().len();
            Ok((counts.iter().map(|c| jitter_histogram(c, &mut rng)).collect(), Some(bins)))
        }
        (None, None) => Err(P3lsError::InvalidConfig("either --events or --counts is required".into())),
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let (patterns, implied_bins) = load_patterns(&a.input, a.window, a.seed)?;
    let responses = io::load_responses(&a.responses)?;
    let (selected, y) = io::align_responses(&patterns, |p| p.subject_id(), &responses)?;
    let selected: Vec<PointPattern> = selected.into_iter().cloned().collect();
    let selection = match (a.p, a.select_p) {
        (Some(p), _) => PSelection::Fixed { p },
        (None, Some(SelectRule::Bic)) => PSelection::Bic { p_max: a.p_max },
        (None, None) => PSelection::Fixed { p: 1 },
    };
    let cfg = FitConfig {
        h: a.h,
        variance_threshold: a.var_threshold,
        grid_size: a.grid_size,
        bins: a.bins.or(implied_bins),
        window: a.window,
        selection,
        mean_offset: !a.no_mean_offset,
    };
    let prepared = PreparedFit::new(&selected, &y, &cfg)?;
    let model = prepared.model()?;
    log::info!(
        "fitted q = {}, p = {} on {} subjects",
        model.config.q,
        model.p(),
        selected.len()
    );
    io::save_model(&a.out_model, &model)?;
    if let Some(path) = &a.out_scores {
        io::save_scores(path, &prepared.estimates)?;
    }
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let model = io::load_model(&a.model)?;
    let (ids, values): (Vec<String>, Vec<f64>) = match (&a.input.events, &a.input.counts) {
        (Some(path), _) => {
            let window = model.partition().window();
            let patterns = io::load_events(path, Some(window))?;
            let preds = patterns
                .iter()
                .map(|p| predict(&model, NewData::Events(p)))
                .collect::<Result<Vec<_>>>()?;
            (patterns.iter().map(|p| p.subject_id().to_string()).collect(), preds)
        }
        (None, Some(path)) => {
            let counts = io::load_counts(path)?;
            let preds = counts
                .iter()
                .map(|c| predict(&model, NewData::Counts(c)))
                .collect::<Result<Vec<_>>>()?;
            (counts.iter().map(|c| c.subject_id().to_string()).collect(), preds)
        }
        (None, None) => return Err(P3lsError::InvalidConfig("either --events or --counts is required".into())),
    };
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    io::save_predictions(&a.out, &refs, &values)
}

fn cov(a: CovArgs) -> Result<()> {
    let patterns = io::load_events(&a.events, a.window)?;
    let window = patterns[0].window();
    let grid = Grid::on_window(window, a.grid_size)?;
    let estimate = estimate_covariance(&patterns, grid, a.h)?;
    io::save_covariance(&a.out_cov, &estimate)?;
    io::save_spectrum(&a.out_spectrum, &estimate)
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let cfg = StudyConfig {
        sim: SimConfig {
            case: a.case,
            seed: a.seed,
            ..SimConfig::default()
        },
        n_total: a.n_train + a.n_test,
        n_train: a.n_train,
        n_test: a.n_test,
        replicates: a.replicates,
        p_min: 1,
        p_max: a.p_max,
        h: a.h,
        bins: a.bins,
        grid_size: 100,
        variance_threshold: a.var_threshold,
        methods: vec![Method::P3ls, Method::Fpcr],
        data_mode: if a.histogram {
            DataMode::Histogram
        } else {
            DataMode::Events
        },
        mean_offset: !a.no_mean_offset,
    };
    let result = bench::run_study(&cfg)?;
    log::info!(
        "{} replicates in {:.1}s, {} failed records",
        cfg.replicates,
        result.elapsed_seconds,
        result.failures()
    );
    io::save_study(&a.out, &result.records)?;
    if let Some(path) = &a.out_quantiles {
        io::save_quantiles(path, &result.quantiles())?;
    }
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn cv_h(a: CvArgs) -> Result<()> {
    let patterns = io::load_events(&a.events, a.window)?;
    let responses = io::load_responses(&a.responses)?;
    let (selected, y) = io::align_responses(&patterns, |p| p.subject_id(), &responses)?;
    let selected: Vec<PointPattern> = selected.into_iter().cloned().collect();
    let base = FitConfig {
        h: a.h_grid[0],
        variance_threshold: a.var_threshold,
        grid_size: a.grid_size,
        bins: Some(a.bins),
        window: a.window,
        selection: PSelection::Fixed { p: a.p },
        mean_offset: !a.no_mean_offset,
    };
    let table = bench::cross_validate_h(&selected, &y, &base, &a.h_grid, a.folds)?;
    io::save_cv_cells(&a.out, &table)?;
    let summary = a.out_summary.clone().unwrap_or_else(|| summary_path(&a.out));
    io::save_cv_summary(&summary, &table)
}
