use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Validation(#[from] amigo_core::ValidationError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sensor timeline: {0}")]
    Timeline(String),
}
