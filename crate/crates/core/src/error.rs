use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Non-finite value where a finite one is required.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    /// Training produced NaN/inf; `dump` holds the offending batch.
    #[error("numeric abort: {message}")]
    NumericAbort { message: String, dump: String },
    /// Two flat vectors with different layouts were combined.
    #[error("layout mismatch: {0}")]
    Layout(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
