use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures while reading a corpus manifest and embedding blob.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("blob does not start with the REMB magic bytes")]
    BadMagic,
    #[error("unsupported {what} version {found} (expected {expected})")]
    UnsupportedVersion {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("dimension mismatch: manifest declares {manifest}, blob declares {blob}")]
    DimMismatch { manifest: usize, blob: usize },
    #[error("blob truncated: case `{case_id}` needs rows up to {needed} but only {available} are present")]
    Truncated {
        case_id: String,
        needed: usize,
        available: usize,
    },
    #[error("duplicate case id `{0}`")]
    DuplicateId(String),
    #[error("row {row} referenced by {owner} is out of range ({count} rows)")]
    RowOutOfRange {
        owner: String,
        row: usize,
        count: usize,
    },
    #[error("unknown label `{label}` for {field}")]
    UnknownLabel { field: &'static str, label: String },
    #[error("non-finite embedding value in {0}")]
    NonFinite(String),
    #[error("anchor set for {task} has {found} classes, expected {expected}")]
    AnchorArity {
        task: String,
        found: usize,
        expected: usize,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("state error: {0}")]
    State(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("corpus load failed: {0}")]
    Load(#[from] LoadError),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Io,
    Validation,
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Io => 2,
            ErrorCategory::Validation => 3,
            ErrorCategory::Numeric => 4,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Config(_) => ErrorCategory::Usage,
            Error::Shape(_)
            | Error::Domain(_)
            | Error::State(_)
            | Error::Lookup(_)
            | Error::Load(_)
            | Error::Json(_) => ErrorCategory::Validation,
        }
    }
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
