//! Experiment drivers behind the `hypofem` binary.

pub mod config;
pub mod plot;
pub mod run;

use hypofem::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(io) => CliError::Io(io),
            Error::InvalidArgument(_) | Error::Parse(_) | Error::NoExactSolution(_) | Error::TimeOutOfRange { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}
