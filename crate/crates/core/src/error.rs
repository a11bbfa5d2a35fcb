use thiserror::Error;

/// Errors raised by the simulator, moment oracle, estimator and study harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oscillation condition violated at k={k}: theta1*k^2 = {lhs} must exceed theta2^2/4 = {rhs}")]
    OscillationCondition { k: usize, lhs: f64, rhs: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate time grid: {0}")]
    DegenerateGrid(String),

    #[error("singular normal equations: det = {det:e} <= {threshold:e} (J1*J2 scaled tolerance)")]
    Singular { det: f64, threshold: f64 },

    #[error("normal-equation residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("trajectory for mode k={0} carries no noise increments")]
    MissingNoise(usize),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad parameters or inputs that a caller could have rejected up front.
    Config,
    /// Singular systems, domain errors and other numerical failures.
    Numerical,
    /// Filesystem and (de)serialization failures.
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::OscillationCondition { .. }
            | Error::DegenerateGrid(_)
            | Error::InsufficientData(_) => ErrorClass::Config,
            Error::Domain(_)
            | Error::Singular { .. }
            | Error::Residual { .. }
            | Error::MissingNoise(_)
            | Error::Index(_) => ErrorClass::Numerical,
            Error::Format(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorClass::Io,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::OscillationCondition { .. } => "oscillation_condition",
            Error::Domain(_) => "domain",
            Error::DegenerateGrid(_) => "degenerate_grid",
            Error::Singular { .. } => "singular",
            Error::Residual { .. } => "residual",
            Error::MissingNoise(_) => "missing_noise",
            Error::Index(_) => "index",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
