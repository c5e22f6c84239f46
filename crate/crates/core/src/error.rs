use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The requested evaluation point lies outside the region where a bound holds.
    #[error("outside validity domain: n must exceed {threshold}")]
    Domain { threshold: f64 },

    #[error("target {target} is not attained by any n <= 2^62")]
    Unattainable { target: f64 },

    #[error("trace has no regeneration column")]
    MissingRegeneration,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the data being analysed rather than by the
    /// way the computation was configured.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData(_) | Error::MissingRegeneration | Error::Parse { .. } | Error::Io(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse { line, message: err.to_string() }
    }
}
