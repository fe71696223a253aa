use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// The noise covariance has no usable inverse square root.
    #[error("cannot whiten: {0}")]
    CannotWhiten(String),

    /// A finite-sample estimate fell outside its valid domain.
    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("signal-to-noise ratio undefined: noise matrix has zero operator norm")]
    UndefinedSnr,

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("invalid override `{key}`: {reason}")]
    InvalidOverride { key: String, reason: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::CannotWhiten(_)
                | Error::EstimationFailure(_)
                | Error::Linalg(_)
                | Error::Numeric(_)
                | Error::UndefinedSnr
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
