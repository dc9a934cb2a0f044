//! Pipeline orchestration behind the `mtdiag` binary. Each stage reads its
//! inputs from the work directory, writes its outputs there, and leaves a
//! stamp naming the config checksum it ran under.

pub mod config;
pub mod pipeline;

pub use config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<mtdiag_core::Error> for CliError {
    fn from(e: mtdiag_core::Error) -> Self {
        use mtdiag_core::Error as E;
        match e {
            E::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            E::Config(_) | E::InvalidSplit(_) | E::InvalidArtifact(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
