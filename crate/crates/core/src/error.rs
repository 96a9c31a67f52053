use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a precondition (bad value, bad range, bad shape).
    #[error("validation: {0}")]
    Validation(String),

    /// An asset was referenced that the panel does not contain.
    #[error("asset not in panel: {0}")]
    MissingAsset(String),

    /// A return series has zero variance where correlation is required.
    #[error("constant return series for asset: {0}")]
    ConstantSeries(String),

    /// Too few observations for the requested statistic.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// A malformed row in an input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True when the error stems from the filesystem rather than the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
