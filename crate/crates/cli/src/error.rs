use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("reference solver did not converge: {0}")]
    NoConvergence(String),

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(qpart_core::Error),
}

impl From<qpart_core::Error> for CliError {
    fn from(e: qpart_core::Error) -> Self {
        match e {
            qpart_core::Error::Dataset(m) => CliError::Dataset(m),
            e @ qpart_core::Error::NoConvergence { .. } => CliError::NoConvergence(e.to_string()),
            e @ (qpart_core::Error::PauliParse { .. }
            | qpart_core::Error::InvalidLayout(_)
            | qpart_core::Error::InvalidArgument(_)
            | qpart_core::Error::NonHermitian(_)
            | qpart_core::Error::TooManyQubits { .. }) => CliError::Config(e.to_string()),
            e => CliError::Core(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Dataset(_) => 3,
            CliError::NoConvergence(_) => 4,
            CliError::Output { .. } | CliError::Core(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Dataset(_) => "dataset",
            CliError::NoConvergence(_) => "no_convergence",
            CliError::Output { .. } => "output",
            CliError::Core(_) => "internal",
        }
    }

    /// Machine-readable one-line record for stderr.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Record {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}
