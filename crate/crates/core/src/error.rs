use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer input has the wrong shape.
    #[error("dimension error in {layer}: {detail}")]
    Dimension { layer: String, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// Backward called with a cache that does not belong to the output gradient.
    #[error("state error: {0}")]
    State(String),

    /// Parameter collections whose names or shapes disagree.
    #[error("structural mismatch: {0}")]
    Structure(String),

    /// A probability table failed validation.
    #[error("invalid probability table: {0}")]
    Probability(String),

    #[error("impossible evidence: window {window:?} has zero likelihood under the prior")]
    ImpossibleEvidence { window: Vec<usize> },

    #[error("enumeration guard exceeded: {terms} terms > limit {limit}")]
    GuardExceeded { terms: u128, limit: u128 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("replay buffer not ready: {size} transitions stored, {requested} requested")]
    NotReady { size: usize, requested: usize },

    /// A NaN or infinity reached a value that must stay finite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            layer: layer.into(),
            detail: detail.into(),
        }
    }
}
