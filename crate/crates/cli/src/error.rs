use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Output(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

impl From<radial::Error> for CliError {
    fn from(e: radial::Error) -> Self {
        use radial::Error as E;
        match e {
            E::Domain(_) | E::Regime(_) | E::Table(_) | E::Csv(_) => CliError::Config(e.to_string()),
            E::Budget(m) => CliError::Budget(m),
            E::Io(_) | E::Json(_) => CliError::Output(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
