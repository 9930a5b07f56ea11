use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    /// Input or parameter shapes do not fit the model.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Backward was handed a cache that does not belong to the layer.
    #[error("stale activation cache: {0}")]
    StaleCache(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] aoa_core::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
