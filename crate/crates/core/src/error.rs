use thiserror::Error;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    Data,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error at row {row}, column '{column}': {msg}")]
    Ingest {
        row: usize,
        column: String,
        msg: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("series '{0}' has zero variance")]
    ZeroVariance(String),
    #[error("missing values in {0}")]
    MissingValues(String),
    #[error("singular matrix in {what} (condition number {cond:.3e})")]
    Singular { what: String, cond: f64 },
    #[error("non-finite innovation variance at t={t}")]
    NonFiniteInnovation { t: usize },
    #[error("log-likelihood decreased at EM iteration {iter}: {prev} -> {next}")]
    LikelihoodDecrease { iter: usize, prev: f64, next: f64 },
    #[error("acceptance rate {rate:.4} below 1% for {what}")]
    LowAcceptance { what: String, rate: f64 },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Singular { .. }
            | Error::NonFiniteInnovation { .. }
            | Error::LikelihoodDecrease { .. }
            | Error::LowAcceptance { .. }
            | Error::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
