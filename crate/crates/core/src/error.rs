use std::path::PathBuf;

use thiserror::Error;

use crate::aggregation::SessionId;
use crate::signal::{Mood, SignalKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseTokenError {
    #[error("unknown signal kind `{0}`")]
    UnknownKind(String),
    #[error("unknown mood `{0}`")]
    UnknownMood(String),
    #[error("unknown strength `{0}`")]
    UnknownStrength(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("mood `{mood}` is not valid for kind `{kind}`")]
    InvalidMood { kind: SignalKind, mood: Mood },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid policy: {field} {reason}")]
pub struct PolicyError {
    pub field: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} already joined")]
    DuplicateSession(SessionId),
    #[error("session {session} may not {action}")]
    RoleNotPermitted {
        session: SessionId,
        action: &'static str,
    },
    #[error(transparent)]
    InvalidMood(#[from] ParseTokenError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("event at t={at} precedes last consumed event at t={last}")]
    EventOutOfOrder { at: u64, last: u64 },
    #[error("meeting has ended")]
    MeetingEnded,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Error)]
pub enum LadderError {
    #[error("undefined cue: {0}")]
    UndefinedCue(String),
    #[error("notice cue for {kind} level {level} reuses final utterance `{utterance}`")]
    VerbalLeak {
        kind: SignalKind,
        level: u8,
        utterance: String,
    },
    #[error("ladder file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("ladder parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: t={at} is earlier than previous t={previous}")]
    UnsortedTrace { line: usize, at: u64, previous: u64 },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
