use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaceError {
    #[error("size error: {0}")]
    Size(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid site: {0}")]
    InvalidSite(String),
    #[error("degenerate conditioning event: {0}")]
    DegenerateEvent(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("support outside data qubits")]
    SupportOutsideData,
    #[error("nonzero syndrome")]
    NonzeroSyndrome,
    #[error("protocol structure error: {0}")]
    ProtocolStructure(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("degenerate contraction: {0}")]
    DegenerateContraction(String),
    #[error("unknown estimator tag `{0}`")]
    UnknownEstimator(String),
    #[error("missing coupling for clique {0:?}")]
    MissingClique(Vec<usize>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LaceError>;

/// Coarse error classes, used by the CLI for exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl LaceError {
    pub fn category(&self) -> ErrorCategory {
        use LaceError::*;
        match self {
            Config(_) | Layout(_) | UnknownEstimator(_) | InvalidSite(_) | IndexOutOfRange { .. } => {
                ErrorCategory::Config
            }
            NonFinite | Numeric(_) | DegenerateContraction(_) | DegenerateEvent(_) => ErrorCategory::Numeric,
            Size(_)
            | SizeMismatch { .. }
            | Data(_)
            | Io(_)
            | Json(_)
            | Csv(_)
            | MissingClique(_)
            | ProtocolStructure(_)
            | NonzeroSyndrome
            | SupportOutsideData => ErrorCategory::Data,
        }
    }
}
