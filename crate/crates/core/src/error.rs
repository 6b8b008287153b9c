use thiserror::Error;

/// Errors produced by the inference toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("too few points: need at least 3, got {n}")]
    TooFewPoints { n: usize },

    #[error("x and y have different lengths ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },

    #[error("collinear design: x has no spread (det(X'X) = {det:e})")]
    CollinearDesign { det: f64 },

    #[error("all weights are zero; the sum is a point mass at 0")]
    DegenerateSum,

    #[error("exact mode needs {m} uniform terms, above the limit of {limit}")]
    ExactModeTooLarge { m: usize, limit: usize },

    #[error("grid step {step} is too coarse, must be at most {max_step}")]
    GridTooCoarse { step: f64, max_step: f64 },

    #[error("replicates were generated with resampled x; the exact law conditions on a fixed design")]
    MismatchedDesign,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
