use thiserror::Error;

/// Crate-wide error type.
///
/// `InvalidArgument` covers parameter-domain violations, `InvalidPath` malformed
/// vertex sequences, `CapacityExceeded` inputs past an exact-computation cap,
/// and `Domain` numerical-domain violations (negative quantiles and the like).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("capacity exceeded: {what} = {got} is over the cap {cap}")]
    CapacityExceeded {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn invalid_path<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidPath(msg.into()))
}
