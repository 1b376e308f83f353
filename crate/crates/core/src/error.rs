use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{file}: row {row}: {kind}")]
    Parse {
        file: String,
        row: usize,
        kind: ParseErrorKind,
    },

    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged: non-finite values in {tensor}")]
    Divergence { tensor: String },

    #[error("degenerate embedding: row {row} has norm below 1e-12")]
    DegenerateEmbedding { row: usize },

    #[error("imputation infeasible for sample {sample}: no donor view shares observed samples with the target view")]
    ImputationInfeasible { sample: usize },

    #[error("data model violation: {0}")]
    DataModel(String),

    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    /// Row or column count disagrees with the other inputs.
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    NonBinaryMask(String),
    InvalidNumber(String),
    NonFinite(String),
    InvalidLabel(String),
    /// Mask row with no observed view.
    NoObservedView,
    Empty,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            ParseErrorKind::NonBinaryMask(tok) => write!(f, "non-binary mask entry {tok:?}"),
            ParseErrorKind::InvalidNumber(tok) => write!(f, "invalid number {tok:?}"),
            ParseErrorKind::NonFinite(tok) => write!(f, "non-finite value {tok:?}"),
            ParseErrorKind::InvalidLabel(tok) => write!(f, "invalid label {tok:?}"),
            ParseErrorKind::NoObservedView => write!(f, "sample has no observed view"),
            ParseErrorKind::Empty => write!(f, "file contains no rows"),
        }
    }
}
