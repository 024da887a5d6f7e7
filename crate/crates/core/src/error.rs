use thiserror::Error;

/// Errors surfaced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} outside the domain of the {family} family")]
    ParameterDomain { family: String, value: f64 },

    #[error("rotation {degrees} degrees is only valid for Clayton and Gumbel")]
    InvalidRotation { degrees: u16 },

    #[error("numeric failure in {context}: {message}")]
    Numeric { context: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input data: {0}")]
    Data(String),

    #[error("MCMC failure at iteration {iteration}: {message}")]
    Mcmc { iteration: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn numeric(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
