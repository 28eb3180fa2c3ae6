use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode {mode} out of range for a tensor with {order} modes")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("symmetric eigensolver did not converge")]
    EigenNoConvergence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("series is constant; regression is undefined")]
    ConstantSeries,

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("provider {provider}: {missing} of {total} hours missing in span (limit 5%)")]
    TooMuchMissing {
        provider: String,
        missing: usize,
        total: usize,
    },

    #[error("provider {provider}: gap of {hours} hours starting {start} cannot be repaired")]
    GapTooLong {
        provider: String,
        start: String,
        hours: usize,
    },

    #[error("empty time span after alignment")]
    EmptySpan,

    #[error("archive: {0}")]
    Archive(String),

    #[error("no rank candidate has a defined eigenvalue ratio on mode {0}")]
    UndefinedRatios(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
