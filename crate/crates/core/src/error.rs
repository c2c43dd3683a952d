use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what} needs {size} cells, above the cap of {cap}")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },

    #[error("policy is not a product policy at step {step}, state {state}")]
    NotProduct { step: usize, state: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("learner misuse: {0}")]
    Learner(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("numerical invariant violated: {0}")]
    Numerical(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
