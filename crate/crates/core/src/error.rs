use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{0} requires a nonempty input")]
    Empty(&'static str),

    #[error("norm underflow in {0}: vector has zero length")]
    NormUnderflow(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("stale saliency for {object_id}: cached under model {cached}, current model is {expected}")]
    ChecksumMismatch {
        object_id: String,
        cached: String,
        expected: String,
    },

    #[error("training diverged in {phase} at epoch {epoch}: {term} is not finite")]
    Diverged {
        phase: &'static str,
        epoch: usize,
        term: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidArgument(_) | Error::Parse { .. }
        )
    }
}
