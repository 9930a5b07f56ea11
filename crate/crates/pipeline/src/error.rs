use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Missing or malformed input files.
    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit code: 2 usage/config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::Io(_) => 3,
            PipelineError::Numeric(_) => 4,
        }
    }
}

impl From<aoa_core::Error> for PipelineError {
    fn from(e: aoa_core::Error) -> Self {
        use aoa_core::Error as E;
        match e {
            E::Config(m) => PipelineError::Config(m),
            E::Io(e) => PipelineError::Io(e),
            E::Format(m) => PipelineError::Data(m),
            E::Domain(_) | E::Degenerate(_) | E::Unsupported(_) => PipelineError::Numeric(e.to_string()),
        }
    }
}

impl From<aoa_nn::NnError> for PipelineError {
    fn from(e: aoa_nn::NnError) -> Self {
        use aoa_nn::NnError as E;
        match e {
            E::Config(m) => PipelineError::Config(m),
            E::Io(e) => PipelineError::Io(e),
            E::Checkpoint(m) => PipelineError::Data(format!("checkpoint: {m}")),
            E::Shape(m) => PipelineError::Data(format!("shape: {m}")),
            E::Core(c) => c.into(),
            E::StaleCache(_) | E::Domain(_) => PipelineError::Numeric(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for PipelineError {
    fn from(e: serde_json::Error) -> Self {
        PipelineError::Data(format!("json: {e}"))
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
