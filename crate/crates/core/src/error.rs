use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid parameters or configuration.
    Usage,
    /// Filesystem or on-disk format problems.
    Format,
    /// Shape or dimension disagreements.
    Dimension,
    /// Zero norms, cancellations, empty passbands.
    Degenerate,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Format => "format",
            ErrorClass::Dimension => "dimension",
            ErrorClass::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected \"LVT1\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u32),

    #[error("unsupported tensor rank {0} (expected 1 or 2)")]
    BadRank(u32),

    #[error("zero-sized dimension in header: {0:?}")]
    ZeroDim(Vec<u64>),

    #[error("truncated header: needed {needed} bytes, file has {actual}")]
    TruncatedHeader { needed: usize, actual: usize },

    #[error("payload length mismatch: expected {expected} bytes, found {actual}")]
    PayloadLength { expected: usize, actual: usize },

    #[error("malformed metadata: {0}")]
    MalformedMeta(String),

    #[error("non-finite value at (row {row}, col {col})")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("role mismatch: expected {expected}, found {found}")]
    RoleMismatch { expected: String, found: String },

    #[error("layer mismatch: {0:?} vs {1:?}")]
    LayerMismatch(Option<u32>, Option<u32>),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{what} = {value} out of range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate pattern: no energy survives the passband")]
    DegeneratePattern,

    #[error("injection cancelled the hidden state exactly (zero norm after update)")]
    Cancellation,

    #[error("hidden state has zero norm")]
    ZeroNorm,

    #[error("token {token} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost pipeline stage, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, source } => source.stage().or(Some(stage)),
            _ => None,
        }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::Io { .. }
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion(_)
            | Error::UnsupportedDtype(_)
            | Error::BadRank(_)
            | Error::ZeroDim(_)
            | Error::TruncatedHeader { .. }
            | Error::PayloadLength { .. }
            | Error::MalformedMeta(_)
            | Error::NonFinite { .. } => ErrorClass::Format,
            Error::ShapeMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::RoleMismatch { .. }
            | Error::LayerMismatch(..) => ErrorClass::Dimension,
            Error::Empty(_)
            | Error::OutOfRange { .. }
            | Error::InvalidConfig(_)
            | Error::TokenOutOfRange { .. } => ErrorClass::Usage,
            Error::DegeneratePattern | Error::Cancellation | Error::ZeroNorm => {
                ErrorClass::Degenerate
            }
            Error::Stage { .. } => unreachable!("root() strips stages"),
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
