//! Crate-wide error type.
//!
//! Every fallible operation in the toolkit returns [`Result`]. Variants are
//! grouped by failure class rather than by module so callers (in particular
//! the CLI) can map them onto exit codes without inspecting message text.

use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Underlying I/O failure (file system, not format).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file exists but cannot be ingested (bad magic, truncated header,
    /// unsupported encoding, malformed record).
    #[error("cannot ingest {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    /// A configuration value is missing, unparsable, or inconsistent with
    /// other configuration (wrong class count, unknown key, bad scheme).
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter is outside its documented domain (negative duration,
    /// dropout rate ∉ [0,1), offset past the end of a clip).
    #[error("out of range: {0}")]
    Range(String),

    /// Input data violates a precondition (empty batch, clip shorter than
    /// the analysis window, mismatched lengths).
    #[error("invalid input: {0}")]
    Input(String),

    /// Tensor or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Arithmetic produced or received non-finite values.
    #[error("numerical error: {0}")]
    Numeric(String),

    /// A metric is undefined on the given data, e.g. a confusion-matrix
    /// column with zero ground-truth samples.
    #[error("metric undefined: no ground-truth samples for class `{class}`")]
    UndefinedMetric { class: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors callers should treat as bad configuration rather
    /// than a runtime failure (the CLI maps these to exit code 2).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
