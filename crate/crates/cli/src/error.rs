use thiserror::Error;

/// Failure of a command, with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Initialization(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Internal(String),
}

pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_INITIALIZATION: i32 = 4;
pub const EXIT_EMPTY: i32 = 5;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 1;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
            CliError::Initialization(_) => EXIT_INITIALIZATION,
            CliError::Empty(_) => EXIT_EMPTY,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<proxmc::Error> for CliError {
    fn from(e: proxmc::Error) -> Self {
        use proxmc::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) => CliError::Usage(msg),
            E::Divergence(_) => CliError::Divergence(msg),
            E::Initialization(_) => CliError::Initialization(msg),
            E::Empty(_) => CliError::Empty(msg),
            E::Construction(_) => CliError::Internal(msg),
            E::Domain(_) | E::Lookup(_) | E::Parse { .. } | E::Range(_) | E::Degenerate(_) | E::Io(_) | E::Csv(_) => {
                CliError::Data(msg)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
