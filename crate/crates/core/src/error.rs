use thiserror::Error;

/// Unified error type for the whole crate.
///
/// `Config` and `Data` map to distinct process exit codes in the CLI, so
/// constructors should pick the variant by who can fix the problem: `Config`
/// for bad parameters, `Data` for malformed or inconsistent inputs on disk.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("total conflict: opinions cannot be combined (1 - conflict < {min_denominator})")]
    TotalConflict { min_denominator: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Exit code the CLI should use for this error: 2 for configuration
    /// problems, 3 for data problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            _ => 1,
        }
    }
}
