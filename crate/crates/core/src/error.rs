use std::path::PathBuf;

use thiserror::Error;

use crate::network::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("network validation failed:\n{}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),

    #[error("zones {from} and {to} are not connected by any directed path")]
    Disconnected { from: String, to: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("stratum {stratum}: {reason}")]
    DegenerateStratum { stratum: String, reason: String },

    #[error("furness balancing did not converge after {iterations} iterations (max relative deviation {deviation:e})")]
    NotConverged { iterations: usize, deviation: f64 },

    #[error("furness balancing is infeasible: {0}")]
    Infeasible(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("objective failed at weights {weights:?}: {source}")]
    Objective {
        weights: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io { .. } | Error::Config(_) => 2,
            Error::Validation(_) | Error::Disconnected { .. } => 3,
            Error::Objective { source, .. } => source.exit_code(),
            _ => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  - {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}
