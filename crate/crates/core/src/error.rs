use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("affine transform is singular (det = {0:e})")]
    SingularTransform(f64),
    #[error("mask has no pixel above 0.5")]
    EmptyMask,
    #[error("mask covers the whole image; nothing to condition on")]
    EmptyBackground,
    #[error("step {t} outside valid range {min}..={max}")]
    StepOutOfRange { t: usize, min: usize, max: usize },
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),
    #[error("empirical denoiser needs a nonempty dataset")]
    EmptyDataset,
    #[error("label {label} invalid for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("invalid scale {0}; must be > 0")]
    InvalidScale(f64),
    #[error("GLCM offset must be nonzero and levels >= 2")]
    BadOffset,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("covariance is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("background pool is empty")]
    EmptyPool,
    #[error("degenerate training set: {0}")]
    DegenerateDataset(String),
    #[error("missing variant {variant} for {source_path}")]
    MissingVariant { source_path: String, variant: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Internal(_) => 4,
            _ => 2,
        }
    }
}
