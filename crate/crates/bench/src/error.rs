use serde::Serialize;
use thiserror::Error;

use crate::config::SchemaError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config does not validate: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Schema(Vec<SchemaError>),
    #[error("{message}")]
    LimitExceeded { pointer: String, message: String },
    #[error("{message}")]
    InvalidArgument { pointer: String, message: String },
    #[error("{0} not found")]
    NotFound(String),
    #[error("session is busy with another operation")]
    Busy,
    #[error(transparent)]
    Core(#[from] zpltune::Error),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("log was written for config {logged}, not {expected}")]
    HashMismatch { expected: String, logged: String },
    #[error("sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("first record must be a snapshot")]
    MissingSnapshot,
    #[error("record {seq} is not a command and was not produced by one")]
    UnexpectedRecord { seq: u64 },
    #[error("replay diverged from the log at record {seq}")]
    Divergence { seq: u64 },
    #[error("malformed log line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl BenchError {
    pub fn limit(pointer: &str, message: impl Into<String>) -> Self {
        Self::LimitExceeded { pointer: pointer.into(), message: message.into() }
    }

    pub fn invalid(pointer: &str, message: impl Into<String>) -> Self {
        Self::InvalidArgument { pointer: pointer.into(), message: message.into() }
    }

    /// Body sent to API clients.
    pub fn body(&self) -> ErrorBody {
        let (code, pointer) = match self {
            Self::Schema(errs) => ("schema_error", errs.first().map(|e| e.pointer.clone()).unwrap_or_default()),
            Self::LimitExceeded { pointer, .. } => ("limit_exceeded", pointer.clone()),
            Self::InvalidArgument { pointer, .. } => ("invalid_argument", pointer.clone()),
            Self::NotFound(_) => ("not_found", String::new()),
            Self::Busy => ("busy", String::new()),
            Self::Core(e) => (core_code(e), String::new()),
            Self::Replay(ReplayError::HashMismatch { .. }) => ("hash_mismatch", String::new()),
            Self::Replay(ReplayError::SequenceGap { .. }) => ("sequence_gap", String::new()),
            Self::Replay(_) => ("replay_error", String::new()),
            Self::Io(_) => ("internal", String::new()),
        };
        ErrorBody { code: code.into(), message: self.to_string(), pointer }
    }

    pub fn status(&self) -> u16 {
        match self {
            Self::Schema(_) | Self::LimitExceeded { .. } => 422,
            Self::InvalidArgument { .. } | Self::Replay(_) => 400,
            Self::NotFound(_) => 404,
            Self::Busy => 409,
            Self::Core(e) => match e {
                zpltune::Error::UnknownEmitter(_) => 404,
                zpltune::Error::InvalidArgument(_) | zpltune::Error::DegenerateWindow(_) => 400,
                zpltune::Error::NoLiveEmitters | zpltune::Error::CascadeInfeasible { .. } => 422,
                _ => 500,
            },
            Self::Io(_) => 500,
        }
    }
}

fn core_code(e: &zpltune::Error) -> &'static str {
    match e {
        zpltune::Error::UnknownEmitter(_) => "not_found",
        zpltune::Error::InvalidArgument(_) | zpltune::Error::DegenerateWindow(_) => "invalid_argument",
        zpltune::Error::NoLiveEmitters => "no_live_emitters",
        zpltune::Error::CascadeInfeasible { .. } => "cascade_infeasible",
        _ => "internal",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub pointer: String,
}

pub type Result<T> = std::result::Result<T, BenchError>;
