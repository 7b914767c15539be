use std::path::PathBuf;

/// Everything that can go wrong between reading a scenario and writing its
/// outputs.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario is not valid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario schema: {0}")]
    Schema(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("graph: {0}")]
    Graph(etc_core::Error),
    #[error("gain design: {0}")]
    Gain(etc_core::Error),
    #[error("trigger weights: {0}")]
    Budget(etc_core::Error),
    #[error("simulation: {0}")]
    Simulation(etc_core::Error),
    #[error("output directory {0} already exists (pass --overwrite to replace its files)")]
    OutDirExists(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing {what}: {message}")]
    Serialize { what: &'static str, message: String },
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }

    /// Process exit code: 3 for numeric failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Graph(e) | SimError::Gain(e) | SimError::Budget(e) | SimError::Simulation(e)
                if e.is_numeric() =>
            {
                3
            }
            _ => 2,
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
