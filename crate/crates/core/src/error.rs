use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("format error: {what}: expected {expected} bytes, got {actual}")]
    Format {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("tuning error: {0}")]
    Tuning(String),
    #[error("backend selection error: missing profile cells {0:?}")]
    Selection(Vec<String>),
    #[error("task graph error: message {message}: {reason}")]
    Graph { message: usize, reason: String },
    #[error("internal error: {0}")]
    Internal(String),
}
