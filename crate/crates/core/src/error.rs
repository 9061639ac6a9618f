use thiserror::Error;

/// Errors raised by the estimation pipeline and its file formats.
#[derive(Debug, Error)]
pub enum P3lsError {
    #[error("invalid window [{start}, {end}] with {size} grid points")]
    InvalidWindow { start: f64, end: f64, size: usize },

    #[error("invalid bandwidth {0}: must be positive and finite")]
    InvalidBandwidth(f64),

    #[error("time {time} lies outside the window [{start}, {end}]")]
    OutOfWindow { time: f64, start: f64, end: f64 },

    #[error("matrix contains a non-finite entry")]
    NonFiniteEntry,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("curves live on different grids")]
    GridMismatch,

    #[error("expected cell count {0:.3e} exceeds the simulation guard")]
    IntensityOverflow(f64),

    #[error("window mismatch: {0}")]
    WindowMismatch(String),

    #[error("at least {needed} subjects are required, got {got}")]
    TooFewSubjects { needed: usize, got: usize },

    #[error("every covariance cell was floored; bandwidth too small or data empty")]
    AllCellsFloored,

    #[error("covariance estimate has no positive eigenvalue")]
    NoPositiveEigenvalues,

    #[error("all counts are zero for subject {0}; the likelihood has no maximizer")]
    DegenerateLikelihood(String),

    #[error("every Gram-Schmidt candidate was numerically dependent")]
    NoIndependentCandidates,

    #[error("no candidate number of components could be fitted")]
    PSelectionFailed,

    #[error("design is rank deficient: {0}")]
    RankDeficient(String),

    #[error("unknown simulation case {0}; expected 1, 2, 3 or 4")]
    UnknownCase(u8),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{0}: file has no data rows")]
    EmptyFile(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, P3lsError>;
