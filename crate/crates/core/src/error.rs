use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{what} contains a non-finite value at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("non-finite state channel {channel} ({name}) after integration")]
    NonFiniteState { channel: usize, name: &'static str },

    #[error("non-finite {quantity} in system {system}, sample {sample}, timestep {timestep}")]
    RolloutDiverged {
        quantity: &'static str,
        system: usize,
        sample: usize,
        timestep: usize,
    },

    #[error("unknown state name `{name}`; valid names are: {}", valid.join(", "))]
    UnknownStateName { name: String, valid: Vec<&'static str> },

    #[error("index out of range: {what} = {index}, limit {limit}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("sample trajectories were not retained (retained fraction {retained}, requested {requested})")]
    TrajectoriesNotRetained { retained: f64, requested: f64 },

    #[error("no state snapshot has been received yet")]
    NoSnapshot,

    #[error("stale state update: t = {t} is earlier than current time {current}")]
    StaleState { t: f64, current: f64 },

    #[error("simulated system diverged at step {step}: {source}")]
    SimulationDiverged {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
