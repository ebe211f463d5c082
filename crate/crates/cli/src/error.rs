use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] herald_core::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Setup(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use herald_core::Error as E;
        match self {
            CliError::Core(E::Config(_) | E::InvalidParameter { .. }) | CliError::Setup(_) => {
                EXIT_CONFIG
            }
            CliError::Core(E::Numerical(_) | E::Undefined(_)) => EXIT_NUMERICAL,
            CliError::Core(E::Io(_) | E::Parse { .. })
            | CliError::File { .. }
            | CliError::Json(_) => EXIT_IO,
        }
    }
}

/// Attaches the path to an I/O error.
pub fn at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::File { path, source }
}
