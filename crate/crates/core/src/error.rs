use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("no eligible trajectories")]
    NoEligibleTrajectories,

    #[error("degenerate scale")]
    DegenerateScale,

    #[error("degenerate hull")]
    DegenerateHull,

    #[error("zero variance")]
    ZeroVariance,

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    #[error("matrix is not positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("only {achieved} of {requested} trajectories survived after {attempts} attempts")]
    Shortfall {
        achieved: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("unsupported checkpoint version {0}")]
    Version(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::NoEligibleTrajectories => "no_eligible_trajectories",
            Error::DegenerateScale => "degenerate_scale",
            Error::DegenerateHull => "degenerate_hull",
            Error::ZeroVariance => "zero_variance",
            Error::NumericalOverflow(_) => "numerical_overflow",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::Diverged { .. } => "diverged",
            Error::Shape(_) => "shape",
            Error::Shortfall { .. } => "shortfall",
            Error::Version(_) => "version",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
