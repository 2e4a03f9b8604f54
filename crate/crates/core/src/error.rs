use thiserror::Error;

/// Errors raised anywhere in the labeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("structural mismatch: {0}")]
    Structure(String),

    /// Every segment was removed by the capillary/short-segment rules.
    #[error("no arterial segment survived pruning")]
    EmptyGraph,

    /// The key-point graph has more than one connected component.
    #[error("vascular tree is split into {components} components; manual intervention required")]
    Disconnected { components: usize },

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("no two graphs share a view")]
    NoSameViewPair,

    #[error("non-finite loss at training step {step}")]
    NonFiniteLoss { step: usize },

    #[error("feature layout mismatch: expected {expected}, found {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("malformed image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
