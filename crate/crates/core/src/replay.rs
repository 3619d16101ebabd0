//! Offline harness: event traces in, cue logs out, golden comparison.
//!
//! A trace is JSON lines. The first line is a header
//! `{"format":1,"audience":30,"policy":{...overrides}}`; every following
//! line is one event with an explicit `"t"` and a pseudo-session id such as
//! `"L1"` or `"S1"`. Sessions that are referenced but never joined are
//! joined at t=0 with the role implied by their prefix (L listener,
//! S speaker, H host, A actuator). `audience` pre-joins `L1..Ln`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actuators::{Actuator, CueLog};
use crate::aggregation::SessionId;
use crate::error::TraceError;
use crate::escalation::{Engine, EventPayload, FloorPhase, Grant, MeetingEvent, Output};
use crate::ladder::Ladder;
use crate::policy::{PolicyConfig, PolicyOverrides};
use crate::signal::{Mood, ParticipantRole, SignalKind, Strength};

pub const TRACE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub audience: usize,
    #[serde(default, skip_serializing_if = "PolicyOverrides::is_empty")]
    pub policy: PolicyOverrides,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl Default for TraceHeader {
    fn default() -> Self {
        TraceHeader {
            format: TRACE_FORMAT,
            audience: 0,
            policy: PolicyOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
enum TraceEvent {
    Join {
        session: String,
        role: ParticipantRole,
    },
    Leave {
        session: String,
    },
    Signal {
        session: String,
        kind: SignalKind,
        mood: Mood,
        strength: Strength,
    },
    Retract {
        session: String,
        kind: SignalKind,
    },
    Cancel {
        session: String,
    },
    Floor {
        phase: FloorPhase,
    },
    Tick,
    End,
}

impl TraceEvent {
    fn session(&self) -> Option<&str> {
        match self {
            TraceEvent::Join { session, .. }
            | TraceEvent::Leave { session }
            | TraceEvent::Signal { session, .. }
            | TraceEvent::Retract { session, .. }
            | TraceEvent::Cancel { session } => Some(session),
            TraceEvent::Floor { .. } | TraceEvent::Tick | TraceEvent::End => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TraceLine {
    t: u64,
    #[serde(flatten)]
    event: TraceEvent,
}

/// A session joined implicitly at load time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub name: String,
    pub session: SessionId,
    pub role: ParticipantRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    /// Synthesized joins, applied at t=0 before `events`.
    pub roster: Vec<RosterEntry>,
    /// One event per body line, in file order.
    pub events: Vec<MeetingEvent>,
    /// Pseudo-id of every session the trace mentions.
    pub names: BTreeMap<SessionId, String>,
}

impl Trace {
    pub fn policy(&self) -> Result<PolicyConfig, TraceError> {
        Ok(PolicyConfig::default().with_overrides(&self.header.policy)?)
    }

    /// Roster joins followed by the body events.
    pub fn all_events(&self) -> Vec<MeetingEvent> {
        self.roster
            .iter()
            .map(|r| {
                MeetingEvent::new(
                    0,
                    EventPayload::Join {
                        session: r.session,
                        role: r.role,
                    },
                )
            })
            .chain(self.events.iter().cloned())
            .collect()
    }

    pub fn name_of(&self, session: SessionId) -> Option<&str> {
        self.names.get(&session).map(String::as_str)
    }
}

fn role_from_prefix(name: &str) -> Option<ParticipantRole> {
    match name.chars().next()? {
        'L' => Some(ParticipantRole::Listener),
        'S' => Some(ParticipantRole::Speaker),
        'H' => Some(ParticipantRole::Host),
        'A' => Some(ParticipantRole::Actuator),
        _ => None,
    }
}

pub fn load_trace(path: &Path) -> Result<Trace, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            TraceError::MissingFile(path.to_owned())
        } else {
            TraceError::Io {
                path: path.to_owned(),
                source,
            }
        }
    })?;
    parse_trace(&text)
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let header = match lines.next() {
        None => TraceHeader::default(),
        Some((line, raw)) => {
            let h: TraceHeader = serde_json::from_str(raw).map_err(|e| TraceError::Parse {
                line,
                message: format!("bad header: {e}"),
            })?;
            if h.format != TRACE_FORMAT {
                return Err(TraceError::Parse {
                    line,
                    message: format!("unsupported format {}", h.format),
                });
            }
            h
        }
    };

    let mut parsed = Vec::new();
    let mut previous: Option<u64> = None;
    for (line, raw) in lines {
        let tl: TraceLine = serde_json::from_str(raw).map_err(|e| TraceError::Parse {
            line,
            message: e.to_string(),
        })?;
        if let Some(p) = previous {
            if tl.t < p {
                return Err(TraceError::UnsortedTrace {
                    line,
                    at: tl.t,
                    previous: p,
                });
            }
        }
        previous = Some(tl.t);
        parsed.push((line, tl));
    }

    let mut ids: BTreeMap<String, SessionId> = BTreeMap::new();
    let mut names = BTreeMap::new();
    let mut next_id = 1u64;
    let mut assign = |name: &str, ids: &mut BTreeMap<String, SessionId>| {
        let id = SessionId(next_id);
        next_id += 1;
        ids.insert(name.to_owned(), id);
        names.insert(id, name.to_owned());
        id
    };

    let mut roster = Vec::new();
    for i in 1..=header.audience {
        let name = format!("L{i}");
        let session = assign(&name, &mut ids);
        roster.push(RosterEntry {
            name,
            session,
            role: ParticipantRole::Listener,
        });
    }
    for (line, tl) in &parsed {
        let Some(name) = tl.event.session() else {
            continue;
        };
        if ids.contains_key(name) {
            if matches!(tl.event, TraceEvent::Join { .. }) && roster.iter().any(|r| r.name == name) {
                return Err(TraceError::Parse {
                    line: *line,
                    message: format!("{name} joins but was already joined implicitly"),
                });
            }
            continue;
        }
        if let TraceEvent::Join { .. } = tl.event {
            assign(name, &mut ids);
            continue;
        }
        let role = role_from_prefix(name).ok_or_else(|| TraceError::Parse {
            line: *line,
            message: format!("cannot infer role of session `{name}`"),
        })?;
        let session = assign(name, &mut ids);
        roster.push(RosterEntry {
            name: name.to_owned(),
            session,
            role,
        });
    }

    let events = parsed
        .into_iter()
        .map(|(_, tl)| {
            let id = |n: &str| ids[n];
            let payload = match tl.event {
                TraceEvent::Join { session, role } => EventPayload::Join {
                    session: id(&session),
                    role,
                },
                TraceEvent::Leave { session } => EventPayload::Leave {
                    session: id(&session),
                },
                TraceEvent::Signal {
                    session,
                    kind,
                    mood,
                    strength,
                } => EventPayload::Signal {
                    session: id(&session),
                    kind,
                    mood,
                    strength,
                },
                TraceEvent::Retract { session, kind } => EventPayload::Retract {
                    session: id(&session),
                    kind,
                },
                TraceEvent::Cancel { session } => EventPayload::CancelScript {
                    session: id(&session),
                },
                TraceEvent::Floor { phase } => EventPayload::Floor(phase),
                TraceEvent::Tick => EventPayload::Tick,
                TraceEvent::End => EventPayload::EndMeeting,
            };
            MeetingEvent::new(tl.t, payload)
        })
        .collect();

    Ok(Trace {
        header,
        roster,
        events,
        names,
    })
}

/// Writes events as trace lines, naming sessions `L1`, `S1`, ... per role
/// in join order.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    header: TraceHeader,
    names: BTreeMap<SessionId, String>,
    counters: BTreeMap<char, u32>,
}

impl TraceRecorder {
    pub fn new(policy: &PolicyConfig) -> Self {
        TraceRecorder {
            header: TraceHeader {
                format: TRACE_FORMAT,
                audience: 0,
                policy: PolicyOverrides::from_policy(policy),
            },
            names: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }

    pub fn header_line(&self) -> String {
        serde_json::to_string(&self.header).expect("header serializes")
    }

    /// Formats one event. Events naming a session that never joined are
    /// not representable and yield `None`.
    pub fn record(&mut self, event: &MeetingEvent) -> Option<String> {
        let name = |names: &BTreeMap<SessionId, String>, s: &SessionId| names.get(s).cloned();
        let event_line = match &event.payload {
            EventPayload::Join { session, role } => {
                let prefix = role.pseudo_prefix();
                let n = self.counters.entry(prefix).or_insert(0);
                *n += 1;
                let pseudo = format!("{prefix}{n}");
                self.names.insert(*session, pseudo.clone());
                TraceEvent::Join {
                    session: pseudo,
                    role: *role,
                }
            }
            EventPayload::Leave { session } => TraceEvent::Leave {
                session: name(&self.names, session)?,
            },
            EventPayload::Signal {
                session,
                kind,
                mood,
                strength,
            } => TraceEvent::Signal {
                session: name(&self.names, session)?,
                kind: *kind,
                mood: *mood,
                strength: *strength,
            },
            EventPayload::Retract { session, kind } => TraceEvent::Retract {
                session: name(&self.names, session)?,
                kind: *kind,
            },
            EventPayload::CancelScript { session } => TraceEvent::Cancel {
                session: name(&self.names, session)?,
            },
            EventPayload::Floor(phase) => TraceEvent::Floor { phase: *phase },
            EventPayload::Tick => TraceEvent::Tick,
            EventPayload::EndMeeting => TraceEvent::End,
        };
        let line = TraceLine {
            t: event.at,
            event: event_line,
        };
        Some(serde_json::to_string(&line).expect("trace lines serialize"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub log: CueLog,
    pub grants: Vec<(u64, Grant)>,
}

/// Runs the events through a fresh engine, recording every cue.
pub fn run_replay(
    events: &[MeetingEvent],
    policy: &PolicyConfig,
    ladder: &Ladder,
) -> Result<ReplayOutcome, TraceError> {
    let mut engine = Engine::new(policy.clone(), ladder.clone())?;
    let mut outcome = ReplayOutcome {
        log: CueLog::new(),
        grants: Vec::new(),
    };
    for ev in events {
        for out in engine.step(ev.clone()).map_err(TraceError::from)? {
            match out {
                Output::Cue { at, cue } => outcome.log.perform(at, &cue),
                Output::Grant { at, grant } => outcome.grants.push((at, grant)),
            }
        }
    }
    Ok(outcome)
}

/// Loads `trace`, applies its header policy (or `policy` if given) and replays it.
pub fn replay_trace(
    trace: &Trace,
    policy: Option<&PolicyConfig>,
    ladder: &Ladder,
) -> Result<ReplayOutcome, TraceError> {
    let policy = match policy {
        Some(p) => p.clone(),
        None => trace.policy()?,
    };
    run_replay(&trace.all_events(), &policy, ladder)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffHunk {
    /// 1-based line number of the first differing line.
    pub line: usize,
    pub expected: Vec<String>,
    pub actual: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffReport {
    pub hunks: Vec<DiffHunk>,
}

impl DiffReport {
    pub fn is_identical(&self) -> bool {
        self.hunks.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for h in &self.hunks {
            s.push_str(&format!("@@ line {} @@\n", h.line));
            for l in &h.expected {
                s.push_str(&format!("-{l}\n"));
            }
            for l in &h.actual {
                s.push_str(&format!("+{l}\n"));
            }
        }
        s
    }
}

/// Positional line diff; consecutive differing lines form one hunk.
pub fn diff_text(actual: &str, expected: &str) -> DiffReport {
    if actual == expected {
        return DiffReport::default();
    }
    let a: Vec<&str> = actual.split('\n').collect();
    let e: Vec<&str> = expected.split('\n').collect();
    let mut report = DiffReport::default();
    let mut open: Option<DiffHunk> = None;
    for i in 0..a.len().max(e.len()) {
        let (x, y) = (a.get(i), e.get(i));
        if x == y {
            report.hunks.extend(open.take());
            continue;
        }
        let h = open.get_or_insert_with(|| DiffHunk {
            line: i + 1,
            expected: Vec::new(),
            actual: Vec::new(),
        });
        h.expected.extend(y.map(|s| s.to_string()));
        h.actual.extend(x.map(|s| s.to_string()));
    }
    report.hunks.extend(open);
    report
}

pub fn diff_golden(log_path: &Path, golden_path: &Path) -> Result<DiffReport, TraceError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                TraceError::MissingFile(p.to_owned())
            } else {
                TraceError::Io {
                    path: p.to_owned(),
                    source,
                }
            }
        })
    };
    let actual = read(log_path)?;
    let expected = read(golden_path)?;
    Ok(diff_text(&actual, &expected))
}
