use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// API misuse, e.g. mismatched lattices or frame tags.
    #[error("usage error: {0}")]
    Usage(String),
    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),
    /// Rig placement rejection-sampling budget exhausted.
    #[error("rig placement failed after {attempts} attempts")]
    Placement { attempts: u32 },
    /// A metric was requested over an empty pixel set.
    #[error("empty evaluation: {0}")]
    EmptyEvaluation(String),
    /// Inputs are individually valid but geometrically inconsistent.
    #[error("geometric inconsistency: {0}")]
    Geometry(String),
    /// Failure while producing one sample of a dataset.
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
