use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fbh_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("probe assertion failed: {0}")]
    Probe(String),
}

#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub status: &'static str,
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        use fbh_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Core(E::Config(_)) => "config",
            CliError::Core(E::Domain(_)) => "domain",
            CliError::Core(E::Unsupported(_)) => "unsupported",
            CliError::Core(E::InsufficientData(_)) => "insufficient_data",
            CliError::Core(E::Numerical(_)) => "numerical",
            CliError::Core(E::NonConvergence { .. }) => "non_convergence",
            CliError::Io { .. } => "io",
            CliError::Probe(_) => "probe_failure",
        }
    }

    /// 2 for configuration, 3 for numerical or convergence failures, 4 for failed probes.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "numerical" | "non_convergence" | "io" => 3,
            "probe_failure" => 4,
            _ => 2,
        }
    }

    pub fn diagnostic(&self) -> Diagnostic {
        Diagnostic { status: "error", kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}
