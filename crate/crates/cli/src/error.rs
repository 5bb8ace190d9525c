//! Error categories and their process exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Data(_) | CliError::Io(_) => 4,
        }
    }
}

impl From<spingate_core::Error> for CliError {
    fn from(e: spingate_core::Error) -> Self {
        use spingate_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::RotationOutsideModel { .. } | E::InvalidState(_) => {
                CliError::Config(e.to_string())
            }
            E::QuadratureNotConverged { .. }
            | E::FitNotConverged { .. }
            | E::NoHeraldedWeight
            | E::AlreadyScattered(_) => CliError::Numerical(e.to_string()),
            E::DegenerateData(_) => CliError::Data(e.to_string()),
        }
    }
}
