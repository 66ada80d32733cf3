use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cache entry {0} is corrupt: {1}")]
    CacheCorrupt(String, String),
    #[error("cannot decode series: {0}")]
    Decode(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
