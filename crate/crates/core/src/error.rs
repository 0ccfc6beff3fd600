use thiserror::Error;

/// Crate-wide error type.
///
/// `is_io` distinguishes filesystem failures from validation failures so the
/// CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or image dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A NaN or infinity appeared where only finite values are allowed.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Invalid configuration or argument value.
    #[error("invalid config: {0}")]
    Config(String),

    /// Input data violates a documented precondition (too short, empty, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A file had the wrong magic, version, or structure.
    #[error("malformed {kind}: {detail}")]
    Format { kind: &'static str, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
