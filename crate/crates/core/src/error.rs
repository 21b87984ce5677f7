use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Pivoting found no pivot above the singularity threshold of a full-order matrix.
    #[error("singular matrix: no usable pivot at step {step} (|pivot| = {pivot:e}, threshold {threshold:e})")]
    SingularMatrix {
        step: usize,
        pivot: f64,
        threshold: f64,
    },

    /// Same as [`Error::SingularMatrix`], raised by a reduced (projected) system.
    #[error("singular reduced matrix at step {step} (|pivot| = {pivot:e})")]
    SingularReducedMatrix { step: usize, pivot: f64 },

    #[error("orthogonalization produced an empty basis: every column fell below the drop tolerance")]
    EmptyBasis,

    #[error("dimension {n} exceeds the dense SVD cap of {cap}; the standard estimator is disabled at this size (raise the cap or pick another estimator)")]
    DimensionTooLarge { n: usize, cap: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("greedy construction did not reach tol = {tol:e} within {iterations} iterations (last estimate {eps:e})")]
    NotConverged {
        iterations: usize,
        eps: f64,
        tol: f64,
    },

    #[error("degenerate training grid: {0}")]
    DegenerateGrid(String),

    #[error("invalid input: {0}")]
    InvalidSpec(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(
        context: &'static str,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for the errors that signal a numerically singular system.
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. } | Error::SingularReducedMatrix { .. }
        )
    }

    /// Re-tag a full-order singularity as a reduced one.
    pub(crate) fn into_reduced(self) -> Self {
        match self {
            Error::SingularMatrix { step, pivot, .. } => Error::SingularReducedMatrix { step, pivot },
            other => other,
        }
    }
}
