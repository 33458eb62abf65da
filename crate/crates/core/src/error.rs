use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced while loading, validating, or evaluating detection data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The document is not well-formed for the expected schema.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    /// A record references an id that does not resolve.
    #[error("referential integrity: {0}")]
    Referential(String),
    /// A record violates a structural invariant.
    #[error("validation: {0}")]
    Validation(String),
    /// Run-length or compressed-string data is inconsistent.
    #[error("codec: {0}")]
    Codec(String),
    /// Geometries with incompatible sizes were combined.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A record is missing or misusing a field for the requested operation.
    #[error("format: {0}")]
    Format(String),
}
