use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid trajectory: need at least 2 states, got {0}")]
    InvalidTrajectory(usize),

    #[error("invalid episode: {0}")]
    InvalidEpisode(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("no future goal: timestep {t} has no strictly later non-final state (horizon {horizon})")]
    NoFutureGoal { t: usize, horizon: usize },

    #[error("index {index} out of range for capacity {capacity}")]
    Index { index: usize, capacity: usize },

    #[error("prefix value {value} outside [0, {total})")]
    Range { value: f64, total: f64 },

    #[error("invalid priority: {0}")]
    InvalidPriority(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
