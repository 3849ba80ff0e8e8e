use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why an optimizer run ended without a usable minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerFailure {
    /// `max_iters` exhausted before the relative energy decrease fell below tolerance.
    NotConverged,
    /// Every trial step down to `step0 * 2^-30` left the admissible set.
    BoundaryStall,
}

impl std::fmt::Display for OptimizerFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptimizerFailure::NotConverged => f.write_str("did not converge"),
            OptimizerFailure::BoundaryStall => f.write_str("stalled at the admissibility boundary"),
        }
    }
}

/// Coarse classification used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input, shape or chart mismatches.
    Structural,
    /// Values outside the domain of an operation (non-SPD, boundary crossings).
    Domain,
    /// Path optimizer gave up; a best-so-far value is attached.
    Optimizer,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error(
        "matrix violates the SPD floor (smallest eigenvalue {min_eig:e}, required > {floor:e})"
    )]
    NotSpd { min_eig: f64, floor: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("chart mismatch (fingerprints {left} and {right})")]
    ChartMismatch { left: String, right: String },

    #[error("unknown point id `{0}`")]
    UnknownPoint(String),

    #[error("precondition violated at point `{point}`: {what}")]
    Precondition { point: String, what: String },

    #[error("geodesic leaves the domain at point `{point}` (factor {factor})")]
    Boundary { point: String, factor: f64 },

    #[error("optimizer {kind} after {iterations} iterations (best length {best_length})")]
    Optimizer {
        kind: OptimizerFailure,
        iterations: usize,
        best_length: f64,
        /// Flattened coordinates of the best admissible path seen.
        best_frames: Vec<Vec<f64>>,
    },

    #[error("at point `{point}`: {source}")]
    AtPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed{}: {message}", point.as_ref().map(|p| format!(" at point `{p}`")).unwrap_or_default())]
    Validation {
        point: Option<String>,
        message: String,
    },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn at_point(self, point: impl Into<String>) -> Error {
        Error::AtPoint {
            point: point.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Dimension { .. }
            | Error::ChartMismatch { .. }
            | Error::UnknownPoint(_)
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Io(_) => ErrorClass::Structural,
            Error::NotSpd { .. }
            | Error::NonFinite(_)
            | Error::Domain(_)
            | Error::Precondition { .. }
            | Error::Boundary { .. } => ErrorClass::Domain,
            Error::Optimizer { .. } => ErrorClass::Optimizer,
            Error::AtPoint { source, .. } => source.class(),
        }
    }

    /// Best length carried by an optimizer failure, looking through point wrappers.
    pub fn best_length(&self) -> Option<f64> {
        match self {
            Error::Optimizer { best_length, .. } => Some(*best_length),
            Error::AtPoint { source, .. } => source.best_length(),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
