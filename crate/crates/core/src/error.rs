use std::path::PathBuf;

use thiserror::Error;

/// Every failure the simulator can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("disconnected constellation: {} components {:?}", .components.len(), .components)]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("infeasible topology: {0}")]
    Infeasible(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("undefined line of sight: satellites ({0}, {1}) and ({2}, {3}) coincide")]
    CoincidentSatellites(usize, usize, usize, usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 infeasible topology, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Toml(_) => 2,
            Error::Disconnected { .. } | Error::Infeasible(_) => 3,
            Error::Numeric(_) => 4,
            _ => 1,
        }
    }
}
