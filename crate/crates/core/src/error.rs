use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("filter used before initialization")]
    Uninitialized,

    #[error("rank-deficient geometry: {0}")]
    RankDeficient(String),

    #[error("epoch {k}: {source}")]
    AtEpoch {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("row {row}: {msg}")]
    Schema { row: usize, msg: String },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_epoch(self, k: usize) -> Self {
        match self {
            e @ Error::AtEpoch { .. } => e,
            e => Error::AtEpoch { k, source: Box::new(e) },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
