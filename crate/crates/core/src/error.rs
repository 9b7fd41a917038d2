use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("population explosion: {population} particles exceeds cap {cap} at t = {time}")]
    PopulationExplosion { population: usize, cap: usize, time: f64 },

    #[error("step budget of {cap} steps exhausted before the walk was absorbed")]
    StepCapExhausted { cap: u64 },

    #[error("rejection sampler gave up after {attempts} attempts")]
    RetryCapExhausted { attempts: u64 },

    #[error("sample budget exceeded: {requested} stored path samples > limit {limit}")]
    MemoryGuard { requested: usize, limit: usize },

    #[error("unreachable branching state: {0}")]
    Unreachable(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
