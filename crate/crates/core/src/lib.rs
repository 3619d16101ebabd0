//! Anonymous meeting backchannel: listeners press turn-taking buttons, the
//! engine aggregates them and drives a graduated facilitator cue sequence
//! on behalf of the whole audience.
//!
//! The crate is transport-free. [`escalation::Engine`] is a deterministic
//! reducer over [`escalation::MeetingEvent`]s; [`actuators`] render its
//! cues; [`replay`] runs recorded traces offline and diffs them against
//! golden cue logs.

pub mod actuators;
pub mod aggregation;
pub mod cue;
pub mod error;
pub mod escalation;
pub mod ladder;
pub mod policy;
pub mod protocol;
pub mod replay;
pub mod signal;

pub use aggregation::{computed_level, IntentSupport, Level, SessionId, SignalLedger};
pub use cue::{CueCommand, CueIntent, CueLevel, Gaze};
pub use error::{EngineError, LadderError, LedgerError, ParseTokenError, PolicyError, TraceError};
pub use escalation::{Engine, EventPayload, FloorPhase, Grant, MeetingEvent, Output};
pub use ladder::Ladder;
pub use policy::{PolicyConfig, PolicyOverrides};
pub use signal::{Category, Mood, ParticipantRole, SignalKind, Strength};
