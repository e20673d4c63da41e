use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] netcbc_core::Error),
}

impl CliError {
    /// Process exit code: 1 when the run itself failed (infeasible synthesis,
    /// invalid certificate), 2 when the input could not be used.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.root() {
                netcbc_core::Error::Infeasible { .. }
                | netcbc_core::Error::ConditionsFailed(_)
                | netcbc_core::Error::VacuousCertificate
                | netcbc_core::Error::Singular
                | netcbc_core::Error::NotPsd { .. } => 1,
                _ => 2,
            },
            CliError::Io { .. } => 1,
            CliError::Config(_) | CliError::Parse { .. } => 2,
        }
    }
}

pub fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
