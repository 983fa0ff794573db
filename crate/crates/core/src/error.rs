use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("non-finite gradient at parameter index {index}")]
    NonFiniteGradient { index: usize },

    #[error("non-finite value in layer {layer}")]
    NonFiniteLayer { layer: usize },

    #[error("non-finite loss at head {head}, point {point}")]
    NonFiniteLoss { head: usize, point: usize },

    #[error("head index {index} out of range for {n_heads} heads")]
    HeadIndex { index: usize, n_heads: usize },

    #[error("invalid config value `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("unstable time step: {0}")]
    Unstable(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNonConvergence { sweeps: usize, off_norm: f64 },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint shape mismatch at {location}: {detail}")]
    CheckpointShape { location: String, detail: String },

    #[error("failed to parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("no overlap between compared fields: {0}")]
    EmptyOverlap(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short kebab-case tag used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NonFiniteGradient { .. } => "non-finite-gradient",
            Error::NonFiniteLayer { .. } => "non-finite-layer",
            Error::NonFiniteLoss { .. } => "non-finite-loss",
            Error::HeadIndex { .. } => "head-index",
            Error::InvalidConfig { .. } => "invalid-config",
            Error::Unstable(_) => "unstable",
            Error::EigenNonConvergence { .. } => "eigen-non-convergence",
            Error::CheckpointVersion { .. } => "checkpoint-version",
            Error::CheckpointShape { .. } => "checkpoint-shape",
            Error::Parse { .. } => "parse",
            Error::SizeMismatch(_) => "size-mismatch",
            Error::EmptyOverlap(_) => "empty-overlap",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
