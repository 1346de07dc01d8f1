use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("covariate error: {0}")]
    Covariate(String),
    #[error("parameter outside domain: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("initialization failed: {0}")]
    Initialization(String),
    #[error("fits are not comparable: {0}")]
    Comparability(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the input data rather than by sampling or usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Validation(_)
                | Error::Parse(_)
                | Error::UnknownDataset(_)
                | Error::Covariate(_)
                | Error::Csv(_)
                | Error::Io(_)
                | Error::Comparability(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
