use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A transmitting user is always counted among the transmitters.
    #[error("contradictory observation: {0}")]
    Contradiction(String),

    #[error("unsupported memory length {found}; this analysis requires {required}-slot memory")]
    UnsupportedMemory { required: usize, found: usize },

    #[error("shape mismatch: expected {expected} entries, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("chain is reducible: {closed_classes} closed classes, e.g. states {example_class:?}")]
    ReducibleChain {
        closed_classes: usize,
        example_class: Vec<usize>,
    },

    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ReducibleChain { .. } | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
