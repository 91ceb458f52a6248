use std::path::PathBuf;

use bloch_core::analysis::AnalysisError;
use bloch_core::fieldsim::FieldSimError;
use bloch_core::kinetics::KineticsError;
use bloch_core::params::ParamsError;
use bloch_core::spectrum::SpectrumError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn config(origin: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            origin: origin.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        CliError::config("parameters", e.to_string())
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        CliError::config("spectrum", e.to_string())
    }
}

impl From<FieldSimError> for CliError {
    fn from(e: FieldSimError) -> Self {
        match e {
            FieldSimError::InvalidInput(m) => CliError::config("sde", m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Quadrature(_) => CliError::Numerical(e.to_string()),
            AnalysisError::Spectrum(s) => s.into(),
            other => CliError::config("analysis", other.to_string()),
        }
    }
}

impl From<KineticsError> for CliError {
    fn from(e: KineticsError) -> Self {
        match e {
            KineticsError::StepTooLarge { .. } | KineticsError::InvalidInput(_) => {
                CliError::config("solver", e.to_string())
            }
            KineticsError::Params(p) => p.into(),
            KineticsError::Analysis(a) => a.into(),
            KineticsError::UnboundedMemory | KineticsError::NonFinite(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
