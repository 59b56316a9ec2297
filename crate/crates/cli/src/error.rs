use avae_core::affinity::AffinityError;
use avae_core::datagen::DatagenError;
use avae_core::eval::EvalError;
use avae_core::model::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or command combinations.
    #[error("usage error: {0}")]
    Usage(String),
    /// Unreadable or malformed input files, I/O failures.
    #[error("data error: {0}")]
    Data(String),
    /// Training diverged or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Roster(_) | DatagenError::Config(_) | DatagenError::Domain(_) | DatagenError::Placement(_) | DatagenError::Fusion(_) => {
                CliError::Usage(e.to_string())
            }
            DatagenError::Shape(_) | DatagenError::Format { .. } | DatagenError::Io(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<AffinityError> for CliError {
    fn from(e: AffinityError) -> Self {
        match e {
            AffinityError::Data(d) => d.into(),
            AffinityError::Format { .. } | AffinityError::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Loss { .. } | ModelError::Divergence { .. } => CliError::Numerical(e.to_string()),
            ModelError::Config(_) | ModelError::Lookup(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Io(io) => io.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
