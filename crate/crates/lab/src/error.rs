use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Some rows of an experiment errored; the rest were written.
    #[error("{failed} of {total} rows failed")]
    Partial { failed: usize, total: usize },
}

impl LabError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Numeric(_) => 3,
            LabError::Partial { .. } => 4,
        }
    }
}

impl From<aoc_core::Error> for LabError {
    fn from(e: aoc_core::Error) -> Self {
        match e {
            aoc_core::Error::Numeric(m) => LabError::Numeric(m),
            aoc_core::Error::NoDensity(_) => LabError::Numeric(e.to_string()),
            aoc_core::Error::Config(m) => LabError::Config(m),
            _ => LabError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Config(format!("csv: {e}"))
    }
}

impl From<toml::de::Error> for LabError {
    fn from(e: toml::de::Error) -> Self {
        LabError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Config(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
