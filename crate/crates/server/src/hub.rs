//! Meeting registry and frame routing. Everything here is synchronous and
//! driven by caller-supplied timestamps; the network layer owns the clock
//! and the sockets.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use backchannel_core::protocol::{ClientFrame, CueFrame, ServerFrame};
use backchannel_core::replay::TraceRecorder;
use backchannel_core::{
    Engine, EngineError, EventPayload, FloorPhase, Ladder, LedgerError, MeetingEvent, Output,
    ParticipantRole, PolicyConfig, PolicyError, PolicyOverrides, SessionId, SignalKind,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HubError {
    #[error("unknown meeting")]
    UnknownMeeting,
    #[error("unauthorized")]
    Unauthorized,
    #[error("unknown session")]
    UnknownSession,
    #[error("frame not permitted for this role")]
    ForbiddenFrame,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error(transparent)]
    InvalidPolicy(#[from] PolicyError),
    #[error("rejected: {0}")]
    Rejected(EngineError),
}

impl HubError {
    /// Code carried by `{"type":"error"}` frames.
    pub fn code(&self) -> &'static str {
        match self {
            HubError::UnknownMeeting => "unknown_meeting",
            HubError::Unauthorized => "unauthorized",
            HubError::UnknownSession => "unknown_session",
            HubError::ForbiddenFrame => "forbidden_frame",
            HubError::MalformedFrame(_) => "malformed_frame",
            HubError::InvalidPolicy(_) => "invalid_policy",
            HubError::Rejected(EngineError::Ledger(LedgerError::InvalidMood(_))) => "invalid_mood",
            HubError::Rejected(_) => "rejected",
        }
    }
}

impl From<EngineError> for HubError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Ledger(LedgerError::RoleNotPermitted { .. }) => HubError::ForbiddenFrame,
            EngineError::Ledger(LedgerError::UnknownSession(_)) => HubError::UnknownSession,
            other => HubError::Rejected(other),
        }
    }
}

/// What one accepted input produced: frames for everyone, frames for one
/// session each, and whether the meeting is gone.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Dispatch {
    /// Meeting time of the event, in ms since the meeting was created.
    pub at: u64,
    pub broadcast: Vec<ServerFrame>,
    pub private: Vec<(SessionId, ServerFrame)>,
    pub ended: bool,
}

impl Dispatch {
    pub fn cues(&self) -> impl Iterator<Item = &CueFrame> {
        self.broadcast.iter().filter_map(|f| match f {
            ServerFrame::Cue(c) => Some(c),
            _ => None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct JoinTicket {
    pub token: String,
    pub session: SessionId,
    pub dispatch: Dispatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeetingSnapshot {
    pub audience: usize,
    pub counts: BTreeMap<SignalKind, usize>,
    pub floor: FloorPhase,
}

struct Recording {
    recorder: TraceRecorder,
    out: BufWriter<File>,
    path: PathBuf,
}

impl Recording {
    fn write(&mut self, line: &str) {
        let res = writeln!(self.out, "{line}").and_then(|_| self.out.flush());
        if let Err(e) = res {
            tracing::warn!("recording to {} failed: {e}", self.path.display());
        }
    }
}

struct Meeting {
    host_key: String,
    engine: Engine,
    tokens: BTreeMap<String, SessionId>,
    roles: BTreeMap<SessionId, ParticipantRole>,
    next_session: u64,
    origin: u64,
    last_at: u64,
    last_aggregate: (BTreeMap<SignalKind, usize>, usize),
    recording: Option<Recording>,
}

impl Meeting {
    fn clock(&mut self, now: u64) -> u64 {
        self.last_at = self.last_at.max(now.saturating_sub(self.origin));
        self.last_at
    }

    fn session(&self, token: &str) -> Result<(SessionId, ParticipantRole), HubError> {
        let session = *self.tokens.get(token).ok_or(HubError::UnknownSession)?;
        Ok((session, self.roles[&session]))
    }

    fn apply(&mut self, now: u64, payload: EventPayload) -> Result<Dispatch, HubError> {
        let at = self.clock(now);
        let event = MeetingEvent::new(at, payload);
        let floor = match event.payload {
            EventPayload::Floor(phase) => Some(phase),
            _ => None,
        };
        let outputs = self.engine.step(event.clone())?;
        if let Some(rec) = self.recording.as_mut() {
            if let Some(line) = rec.recorder.record(&event) {
                rec.write(&line);
            }
        }
        let mut d = Dispatch {
            at,
            ..Dispatch::default()
        };
        if let Some(phase) = floor {
            d.broadcast.push(ServerFrame::Floor { phase });
        }
        for out in outputs {
            match out {
                Output::Cue { cue, .. } => {
                    tracing::info!("{}", backchannel_core::actuators::render_console(at, &cue));
                    d.broadcast.push(backchannel_core::actuators::emit_avatar(&cue));
                }
                Output::Grant { grant, .. } => d
                    .private
                    .push((grant.session, ServerFrame::FloorGrant { kind: grant.kind })),
            }
        }
        let aggregate = self.aggregate();
        if aggregate != self.last_aggregate {
            d.broadcast.push(ServerFrame::Aggregate {
                counts: aggregate.0.clone(),
                audience: aggregate.1,
            });
            self.last_aggregate = aggregate;
        }
        Ok(d)
    }

    fn aggregate(&self) -> (BTreeMap<SignalKind, usize>, usize) {
        let ledger = self.engine.state().ledger();
        (ledger.signaler_counts(), ledger.audience_size())
    }
}

pub struct Hub {
    policy: PolicyConfig,
    ladder: Ladder,
    meetings: BTreeMap<String, Meeting>,
    rng: StdRng,
    record: Option<PathBuf>,
    recorded: u32,
}

fn secret(rng: &mut StdRng, bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rng.fill(&mut buf[..]);
    hex::encode(buf)
}

impl Hub {
    pub fn new(policy: PolicyConfig, ladder: Ladder) -> Hub {
        Hub::with_rng(policy, ladder, StdRng::from_os_rng())
    }

    /// Seeded hubs give reproducible ids; only for tests.
    pub fn with_rng(policy: PolicyConfig, ladder: Ladder, rng: StdRng) -> Hub {
        Hub {
            policy,
            ladder,
            meetings: BTreeMap::new(),
            rng,
            record: None,
            recorded: 0,
        }
    }

    /// Record every meeting's event trace. The first meeting writes `path`,
    /// later ones `path.2`, `path.3`, ...
    pub fn record_to(&mut self, path: PathBuf) {
        self.record = Some(path);
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn meeting_count(&self) -> usize {
        self.meetings.len()
    }

    pub fn create_meeting(
        &mut self,
        overrides: &PolicyOverrides,
        now: u64,
    ) -> Result<(String, String), HubError> {
        let policy = self.policy.with_overrides(overrides)?;
        let engine = Engine::new(policy.clone(), self.ladder.clone())?;
        let id = loop {
            let id = secret(&mut self.rng, 16);
            if !self.meetings.contains_key(&id) {
                break id;
            }
        };
        let host_key = secret(&mut self.rng, 32);
        let recording = self.open_recording(&policy);
        self.meetings.insert(
            id.clone(),
            Meeting {
                host_key: host_key.clone(),
                engine,
                tokens: BTreeMap::new(),
                roles: BTreeMap::new(),
                next_session: 1,
                origin: now,
                last_at: 0,
                last_aggregate: (BTreeMap::new(), 0),
                recording,
            },
        );
        Ok((id, host_key))
    }

    fn open_recording(&mut self, policy: &PolicyConfig) -> Option<Recording> {
        let base = self.record.as_ref()?;
        self.recorded += 1;
        let path = if self.recorded == 1 {
            base.clone()
        } else {
            let mut p = base.clone().into_os_string();
            p.push(format!(".{}", self.recorded));
            PathBuf::from(p)
        };
        let file = match File::create(&path) {
            Ok(f) => f,
            Err(e) => {
                tracing::warn!("cannot record to {}: {e}", path.display());
                return None;
            }
        };
        let mut rec = Recording {
            recorder: TraceRecorder::new(policy),
            out: BufWriter::new(file),
            path,
        };
        let header = rec.recorder.header_line();
        rec.write(&header);
        Some(rec)
    }

    fn meeting(&mut self, id: &str) -> Result<&mut Meeting, HubError> {
        self.meetings.get_mut(id).ok_or(HubError::UnknownMeeting)
    }

    pub fn join(
        &mut self,
        id: &str,
        role: ParticipantRole,
        host_key: Option<&str>,
        now: u64,
    ) -> Result<JoinTicket, HubError> {
        let token = secret(&mut self.rng, 32);
        let m = self.meetings.get_mut(id).ok_or(HubError::UnknownMeeting)?;
        let needs_key = matches!(role, ParticipantRole::Speaker | ParticipantRole::Host);
        if needs_key && host_key != Some(m.host_key.as_str()) {
            return Err(HubError::Unauthorized);
        }
        let session = SessionId(m.next_session);
        let dispatch = m.apply(now, EventPayload::Join { session, role })?;
        m.next_session += 1;
        m.tokens.insert(token.clone(), session);
        m.roles.insert(session, role);
        Ok(JoinTicket {
            token,
            session,
            dispatch,
        })
    }

    /// Resolves a token without changing anything.
    pub fn session(&self, id: &str, token: &str) -> Result<(SessionId, ParticipantRole), HubError> {
        self.meetings
            .get(id)
            .ok_or(HubError::UnknownMeeting)?
            .session(token)
    }

    pub fn leave(&mut self, id: &str, token: &str, now: u64) -> Result<Dispatch, HubError> {
        let m = self.meeting(id)?;
        let (session, _) = m.session(token)?;
        let d = m.apply(now, EventPayload::Leave { session })?;
        m.tokens.remove(token);
        m.roles.remove(&session);
        Ok(d)
    }

    /// Turns one client frame into a meeting event and applies it.
    pub fn route_frame(&mut self, id: &str, token: &str, text: &str, now: u64) -> Result<Dispatch, HubError> {
        let m = self.meeting(id)?;
        let (session, role) = m.session(token)?;
        let frame = ClientFrame::parse(text).map_err(|e| HubError::MalformedFrame(e.to_string()))?;
        let payload = match frame {
            ClientFrame::Signal {
                kind,
                mood,
                strength,
            } if role.may_signal() => EventPayload::Signal {
                session,
                kind,
                mood,
                strength,
            },
            ClientFrame::Retract { kind } if role.may_signal() => {
                EventPayload::Retract { session, kind }
            }
            ClientFrame::Cancel if role.may_signal() => EventPayload::CancelScript { session },
            ClientFrame::Floor { phase } if role.may_report_floor() => EventPayload::Floor(phase),
            ClientFrame::End if role.may_report_floor() => {
                let key = m.host_key.clone();
                return self.end_meeting(id, &key, now);
            }
            _ => return Err(HubError::ForbiddenFrame),
        };
        m.apply(now, payload)
    }

    pub fn tick(&mut self, id: &str, now: u64) -> Result<Dispatch, HubError> {
        self.meeting(id)?.apply(now, EventPayload::Tick)
    }

    /// Ends the meeting and forgets everything about it. A recording, if
    /// enabled, is closed and left with the host.
    pub fn end_meeting(&mut self, id: &str, host_key: &str, now: u64) -> Result<Dispatch, HubError> {
        let m = self.meeting(id)?;
        if m.host_key != host_key {
            return Err(HubError::Unauthorized);
        }
        let mut d = m.apply(now, EventPayload::EndMeeting)?;
        d.broadcast.retain(|f| !matches!(f, ServerFrame::Aggregate { .. }));
        d.ended = true;
        self.meetings.remove(id);
        Ok(d)
    }

    pub fn inspect(&self, id: &str) -> Result<MeetingSnapshot, HubError> {
        let m = self.meetings.get(id).ok_or(HubError::UnknownMeeting)?;
        let state = m.engine.state();
        Ok(MeetingSnapshot {
            audience: state.ledger().audience_size(),
            counts: state.ledger().signaler_counts(),
            floor: state.floor(),
        })
    }

    /// The live policy of a meeting.
    pub fn meeting_policy(&self, id: &str) -> Result<&PolicyConfig, HubError> {
        Ok(self
            .meetings
            .get(id)
            .ok_or(HubError::UnknownMeeting)?
            .engine
            .state()
            .policy())
    }
}
