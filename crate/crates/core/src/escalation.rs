//! The facilitator reducer: `(state, event) -> (state, outputs)`.
//!
//! Events are consumed strictly in timestamp order and the reducer never
//! reads a wall clock, so identical event sequences always yield identical
//! outputs. Per step the reducer
//!
//! 1. applies the event to the ledger (or handles floor / cancel),
//! 2. expires stale signals,
//! 3. lets displayed levels decay where support has dropped, standing the
//!    facilitator down when the running intent reaches zero,
//! 4. arbitrates one winning intent and emits at most one escalating cue
//!    for it, respecting dwell except for strong overrides and the yield
//!    intervention.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    computed_level, in_yield_set, Bid, IntentSupport, Level, SessionId, SignalLedger, MAX_LEVEL,
};
use crate::cue::{CueCommand, CueIntent};
use crate::error::{EngineError, LedgerError, PolicyError};
use crate::ladder::{CueKey, GeneralRoute, Ladder};
use crate::policy::{PolicyConfig, SCORE_EPSILON};
use crate::signal::{Category, Mood, ParticipantRole, SignalKind, Strength};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FloorPhase {
    #[default]
    #[serde(rename = "started")]
    SpeakingStarted,
    #[serde(rename = "paused")]
    SpeakerPaused,
    #[serde(rename = "released")]
    FloorReleased,
}

impl FloorPhase {
    pub fn wire_name(self) -> &'static str {
        match self {
            FloorPhase::SpeakingStarted => "started",
            FloorPhase::SpeakerPaused => "paused",
            FloorPhase::FloorReleased => "released",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventPayload {
    Join {
        session: SessionId,
        role: ParticipantRole,
    },
    Leave {
        session: SessionId,
    },
    Signal {
        session: SessionId,
        kind: SignalKind,
        mood: Mood,
        strength: Strength,
    },
    Retract {
        session: SessionId,
        kind: SignalKind,
    },
    CancelScript {
        session: SessionId,
    },
    Floor(FloorPhase),
    Tick,
    EndMeeting,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeetingEvent {
    pub at: u64,
    pub payload: EventPayload,
}

impl MeetingEvent {
    pub fn new(at: u64, payload: EventPayload) -> Self {
        Self { at, payload }
    }
}

/// A floor grant addressed to one session. Never broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub session: SessionId,
    pub kind: SignalKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Cue { at: u64, cue: CueCommand },
    Grant { at: u64, grant: Grant },
}

impl Output {
    pub fn cue(&self) -> Option<&CueCommand> {
        match self {
            Output::Cue { cue, .. } => Some(cue),
            Output::Grant { .. } => None,
        }
    }
}

/// Arbitration classes, highest priority first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PriorityClass {
    StrongOverride,
    YieldFinal,
    GrantAnnounce,
    Bid,
    Stop,
    CalmDown,
    Comment,
    Advice,
}

/// A live intent competing for the facilitator's single body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub intent: CueIntent,
    pub class: PriorityClass,
    pub level: Level,
    /// Within the Bid class, volunteers outrank general invitations.
    pub volunteer: bool,
    pub first_signal_at: u64,
}

impl Candidate {
    fn rank_key(&self) -> (PriorityClass, bool, Reverse<Level>, u64, &'static str) {
        (
            self.class,
            !self.volunteer,
            Reverse(self.level),
            self.first_signal_at,
            self.intent.wire_name(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Bid(Mood),
    Override,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Track {
    displayed: Level,
    stage: Option<Stage>,
    last_cue_at: Option<u64>,
    below_since: Option<u64>,
    stage_lapsed_since: Option<u64>,
}

impl Track {
    fn present(&self) -> bool {
        self.displayed > 0 || self.stage.is_some()
    }

    fn reset(&mut self) {
        let last_cue_at = self.last_cue_at;
        *self = Track {
            last_cue_at,
            ..Track::default()
        };
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct YieldTrack {
    shown: bool,
    below_since: Option<u64>,
}

/// Everything the reducer knows about one meeting.
#[derive(Debug, Clone, PartialEq)]
pub struct EscalationState {
    policy: PolicyConfig,
    ledger: SignalLedger,
    tracks: BTreeMap<SignalKind, Track>,
    yield_track: YieldTrack,
    running: Option<CueIntent>,
    pending_grant: Option<Grant>,
    floor: FloorPhase,
    last_at: Option<u64>,
    ended: bool,
}

impl EscalationState {
    pub fn new(policy: PolicyConfig) -> Self {
        EscalationState {
            policy,
            ledger: SignalLedger::new(),
            tracks: SignalKind::ALL.iter().map(|k| (*k, Track::default())).collect(),
            yield_track: YieldTrack::default(),
            running: None,
            pending_grant: None,
            floor: FloorPhase::default(),
            last_at: None,
            ended: false,
        }
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn ledger(&self) -> &SignalLedger {
        &self.ledger
    }

    pub fn displayed_level(&self, kind: SignalKind) -> Level {
        self.tracks[&kind].displayed
    }

    pub fn running_intent(&self) -> Option<CueIntent> {
        self.running
    }

    pub fn pending_grant(&self) -> Option<Grant> {
        self.pending_grant
    }

    pub fn floor(&self) -> FloorPhase {
        self.floor
    }

    pub fn yield_shown(&self) -> bool {
        self.yield_track.shown
    }

    pub fn clock(&self) -> Option<u64> {
        self.last_at
    }

    /// True once `EndMeeting` was consumed; the state holds no signal data
    /// anymore and should be dropped by its owner.
    pub fn is_purgeable(&self) -> bool {
        self.ended
    }

    pub fn support(&self, kind: SignalKind) -> IntentSupport {
        self.ledger.support(kind, &self.policy)
    }

    pub fn computed_level(&self, kind: SignalKind) -> Level {
        computed_level(&self.support(kind), self.ledger.audience_size(), &self.policy)
    }

    fn yield_live(&self) -> bool {
        let pressure = self.ledger.yield_pressure(&self.policy);
        let needed = self.policy.yield_frac * self.ledger.audience_size() as f64;
        pressure > 0.0 && pressure + SCORE_EPSILON >= needed
    }

    /// Bid stage a Comment kind currently warrants, if any.
    fn bid_mood(&self, ladder: &Ladder, sup: &IntentSupport, level: Level) -> Option<Mood> {
        if !sup.kind.is_comment() {
            return None;
        }
        if !sup.self_bids.is_empty() {
            return Some(Mood::SelfVolunteer);
        }
        let general_bid = ladder.general_route(sup.kind) == GeneralRoute::Bid
            && sup.general_count > 0
            && level >= 1;
        general_bid.then_some(Mood::General)
    }

    /// Live intents, best first.
    pub fn candidates(&self, ladder: &Ladder) -> Vec<Candidate> {
        let mut out = Vec::new();
        if self.yield_live() {
            out.push(Candidate {
                intent: CueIntent::YieldIntervention,
                class: PriorityClass::YieldFinal,
                level: MAX_LEVEL,
                volunteer: false,
                first_signal_at: 0,
            });
        }
        if self.pending_grant.is_some() {
            out.push(Candidate {
                intent: CueIntent::GrantAnnounce,
                class: PriorityClass::GrantAnnounce,
                level: MAX_LEVEL,
                volunteer: false,
                first_signal_at: 0,
            });
        }
        let n = self.ledger.audience_size();
        for kind in SignalKind::ALL {
            let sup = self.ledger.support(kind, &self.policy);
            let level = computed_level(&sup, n, &self.policy);
            let bid = self.bid_mood(ladder, &sup, level);
            let class = if sup.strong_present {
                PriorityClass::StrongOverride
            } else if bid.is_some() {
                PriorityClass::Bid
            } else if level == 0 {
                continue;
            } else {
                match kind.category() {
                    Category::Stop => PriorityClass::Stop,
                    Category::Audience => PriorityClass::CalmDown,
                    Category::Comment => PriorityClass::Comment,
                    Category::Advice => PriorityClass::Advice,
                }
            };
            out.push(Candidate {
                intent: CueIntent::Kind(kind),
                class,
                level,
                volunteer: bid == Some(Mood::SelfVolunteer),
                first_signal_at: sup.first_signal_at.unwrap_or(0),
            });
        }
        out.sort_by(|a, b| a.rank_key().cmp(&b.rank_key()));
        out
    }
}

/// Picks the earliest bidder; `bids` must already be ordered by submission
/// time then join order.
pub fn select_commentator(bids: &[Bid]) -> Option<SessionId> {
    bids.first().map(|b| b.session)
}

/// The reducer together with the cue ladder it renders through.
#[derive(Debug, Clone)]
pub struct Engine {
    state: EscalationState,
    ladder: Ladder,
}

impl Engine {
    pub fn new(policy: PolicyConfig, ladder: Ladder) -> Result<Self, PolicyError> {
        policy.validate()?;
        Ok(Engine {
            state: EscalationState::new(policy),
            ladder,
        })
    }

    pub fn with_defaults() -> Self {
        Engine::new(PolicyConfig::default(), Ladder::default()).expect("default policy is valid")
    }

    pub fn state(&self) -> &EscalationState {
        &self.state
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn top_intent(&self) -> Option<CueIntent> {
        self.state.candidates(&self.ladder).first().map(|c| c.intent)
    }

    /// Consumes one event. On error the state is left untouched.
    pub fn step(&mut self, event: MeetingEvent) -> Result<Vec<Output>, EngineError> {
        self.validate(&event)?;
        let now = event.at;
        self.state.last_at = Some(now);
        let mut out = Vec::new();
        let policy = self.state.policy.clone();
        match event.payload {
            EventPayload::Join { session, role } => self.state.ledger.join(session, role)?,
            EventPayload::Leave { session } => {
                self.state.ledger.leave(session)?;
                if self.state.pending_grant.is_some_and(|g| g.session == session) {
                    self.state.pending_grant = None;
                }
            }
            EventPayload::Signal {
                session,
                kind,
                mood,
                strength,
            } => self
                .state
                .ledger
                .upsert_signal(session, kind, mood, strength, now, &policy)?,
            EventPayload::Retract { session, kind } => {
                self.state.ledger.retract_signal(session, kind)
            }
            EventPayload::CancelScript { session } => {
                self.apply_cancel(session, now, &mut out);
            }
            EventPayload::Floor(phase) => self.handle_floor(phase, now, &mut out),
            EventPayload::Tick => {}
            EventPayload::EndMeeting => {
                self.state.ended = true;
                self.state.ledger = SignalLedger::new();
                self.state.pending_grant = None;
                return Ok(out);
            }
        }
        self.state.ledger.expire(now);
        self.decay(now, &mut out);
        self.escalate(now, &mut out);
        Ok(out)
    }

    fn validate(&self, event: &MeetingEvent) -> Result<(), EngineError> {
        if self.state.ended {
            return Err(EngineError::MeetingEnded);
        }
        if let Some(last) = self.state.last_at {
            if event.at < last {
                return Err(EngineError::EventOutOfOrder { at: event.at, last });
            }
        }
        let ledger = &self.state.ledger;
        let known = |s: SessionId| {
            ledger
                .member(s)
                .map(|_| ())
                .ok_or(LedgerError::UnknownSession(s))
        };
        match &event.payload {
            EventPayload::Join { session, .. } => {
                if ledger.member(*session).is_some() {
                    return Err(LedgerError::DuplicateSession(*session).into());
                }
            }
            EventPayload::Leave { session }
            | EventPayload::Retract { session, .. }
            | EventPayload::CancelScript { session } => known(*session)?,
            EventPayload::Signal {
                session,
                kind,
                mood,
                ..
            } => ledger.check_signal(*session, *kind, *mood)?,
            EventPayload::Floor(_) | EventPayload::Tick | EventPayload::EndMeeting => {}
        }
        Ok(())
    }

    fn cue(&self, key: CueKey) -> CueCommand {
        // Ladders are validated at load, so every key the engine asks for exists.
        self.ladder
            .cue_for(key)
            .expect("validated ladder defines every engine cue")
    }

    fn emit(&mut self, now: u64, key: CueKey, out: &mut Vec<Output>) {
        let cue = self.cue(key);
        if cue.intent != CueIntent::StandDown && self.state.running != Some(cue.intent) {
            self.state.ledger.clear_cancel_votes();
        }
        self.state.running = match cue.intent {
            CueIntent::StandDown => None,
            intent => Some(intent),
        };
        out.push(Output::Cue { at: now, cue });
    }

    fn stand_down(&mut self, now: u64, out: &mut Vec<Output>) {
        self.emit(now, CueKey::StandDown, out);
        self.state.ledger.clear_cancel_votes();
    }

    /// Registers a cancel vote and aborts the running script once enough of
    /// its supporters agree. Returns whether the script was aborted.
    pub fn apply_cancel(&mut self, session: SessionId, now: u64, out: &mut Vec<Output>) -> bool {
        self.state.ledger.add_cancel_vote(session);
        let signalers = match self.state.running {
            Some(CueIntent::Kind(k)) => self.state.support(k).signaler_count,
            Some(CueIntent::YieldIntervention) => self.state.ledger.yield_signalers(),
            _ => return false,
        };
        let divisor = self.state.policy.cancel_divisor.max(1) as usize;
        let needed = signalers.div_ceil(divisor).max(1);
        if self.state.ledger.cancel_votes() < needed {
            return false;
        }
        match self.state.running {
            Some(CueIntent::Kind(k)) => {
                self.state.ledger.clear_kind(k);
                if let Some(t) = self.state.tracks.get_mut(&k) {
                    t.reset();
                }
            }
            _ => {
                self.state
                    .ledger
                    .retain_signals(|s| !in_yield_set(s.kind, s.mood));
                self.state.yield_track = YieldTrack::default();
            }
        }
        self.stand_down(now, out);
        true
    }

    pub fn handle_floor(&mut self, phase: FloorPhase, now: u64, out: &mut Vec<Output>) {
        self.state.floor = phase;
        match phase {
            FloorPhase::SpeakerPaused => {
                if self.state.pending_grant.is_none() {
                    self.announce_grant(now, out);
                }
            }
            FloorPhase::FloorReleased => {
                let granted = self.state.pending_grant.is_some();
                if self.state.yield_track.shown {
                    self.emit(now, CueKey::ReturnToSeat, out);
                    self.state.running = None;
                    if !granted {
                        if let Some(grant) = self.choose_grantee() {
                            out.push(Output::Grant { at: now, grant });
                        }
                    }
                    self.state.pending_grant = None;
                } else if granted || !self.announce_grant(now, out) {
                    if self.state.running.is_some() {
                        self.stand_down(now, out);
                    }
                    self.state.pending_grant = None;
                }
                // Every stance concerned the departing floor holder.
                self.state.ledger.retain_signals(|_| false);
                self.state.tracks.values_mut().for_each(Track::reset);
                self.state.yield_track = YieldTrack::default();
                self.state.ledger.clear_cancel_votes();
            }
            FloorPhase::SpeakingStarted => {
                if self.state.pending_grant.take().is_some() {
                    // The comment episode is over.
                    self.state.ledger.retain_signals(|s| !s.kind.is_comment());
                    for (k, t) in self.state.tracks.iter_mut() {
                        if k.is_comment() {
                            t.reset();
                        }
                    }
                    if self.state.running.is_some() {
                        self.stand_down(now, out);
                    }
                }
            }
        }
    }

    fn choose_grantee(&self) -> Option<Grant> {
        let bids = self.state.ledger.all_self_bids();
        let session = select_commentator(&bids)?;
        let kind = bids.iter().find(|b| b.session == session)?.kind;
        Some(Grant { session, kind })
    }

    fn announce_grant(&mut self, now: u64, out: &mut Vec<Output>) -> bool {
        let Some(grant) = self.choose_grantee() else {
            return false;
        };
        self.state.pending_grant = Some(grant);
        self.emit(now, CueKey::GrantAnnounce, out);
        out.push(Output::Grant { at: now, grant });
        true
    }

    fn decay(&mut self, now: u64, out: &mut Vec<Output>) {
        let decay_ms = self.state.policy.decay_ms;
        let n = self.state.ledger.audience_size();
        for kind in SignalKind::ALL {
            let sup = self.state.ledger.support(kind, &self.state.policy);
            let level = computed_level(&sup, n, &self.state.policy);
            let stage_valid = match self.state.tracks[&kind].stage {
                Some(Stage::Override) => sup.strong_present,
                Some(Stage::Bid(_)) => self.state.bid_mood(&self.ladder, &sup, level).is_some(),
                None => true,
            };
            let t = self.state.tracks.get_mut(&kind).expect("track per kind");
            if t.displayed > level {
                let since = *t.below_since.get_or_insert(now);
                if now.saturating_sub(since) >= decay_ms {
                    t.displayed -= 1;
                    t.below_since = (t.displayed > level).then_some(now);
                }
            } else {
                t.below_since = None;
            }
            if stage_valid {
                t.stage_lapsed_since = None;
            } else {
                let since = *t.stage_lapsed_since.get_or_insert(now);
                if now.saturating_sub(since) >= decay_ms {
                    t.stage = None;
                    t.stage_lapsed_since = None;
                }
            }
        }
        let live = self.state.yield_live();
        let y = &mut self.state.yield_track;
        if y.shown && !live {
            let since = *y.below_since.get_or_insert(now);
            if now.saturating_sub(since) >= decay_ms {
                *y = YieldTrack::default();
            }
        } else {
            y.below_since = None;
        }

        let still_present = match self.state.running {
            Some(CueIntent::Kind(k)) => self.state.tracks[&k].present(),
            Some(CueIntent::YieldIntervention) => self.state.yield_track.shown,
            Some(CueIntent::GrantAnnounce) => self.state.pending_grant.is_some(),
            Some(CueIntent::StandDown) | None => true,
        };
        if !still_present {
            self.stand_down(now, out);
        }
    }

    fn escalate(&mut self, now: u64, out: &mut Vec<Output>) {
        let Some(winner) = self.state.candidates(&self.ladder).into_iter().next() else {
            return;
        };
        let dwell = self.state.policy.dwell_ms;
        match (winner.class, winner.intent) {
            (PriorityClass::YieldFinal, _) => {
                if !self.state.yield_track.shown {
                    self.state.yield_track.shown = true;
                    self.emit(now, CueKey::YieldFinal, out);
                }
            }
            (PriorityClass::GrantAnnounce, _) => {}
            (PriorityClass::StrongOverride, CueIntent::Kind(kind)) => {
                if self.state.tracks[&kind].stage == Some(Stage::Override) {
                    return;
                }
                let key = if kind.is_comment() {
                    let strong_self = self.state.ledger.signals().any(|s| {
                        s.kind == kind
                            && s.strength == Strength::Strong
                            && s.mood == Mood::SelfVolunteer
                    });
                    let mood = if strong_self {
                        Mood::SelfVolunteer
                    } else {
                        Mood::General
                    };
                    CueKey::Bid(kind, mood)
                } else {
                    CueKey::Final(kind)
                };
                let t = self.state.tracks.get_mut(&kind).expect("track per kind");
                t.stage = Some(Stage::Override);
                t.displayed = MAX_LEVEL;
                t.below_since = None;
                t.last_cue_at = Some(now);
                self.emit(now, key, out);
            }
            (PriorityClass::Bid, CueIntent::Kind(kind)) => {
                let mood = if winner.volunteer {
                    Mood::SelfVolunteer
                } else {
                    Mood::General
                };
                let t = &self.state.tracks[&kind];
                let already = match t.stage {
                    Some(Stage::Override) => true,
                    Some(Stage::Bid(shown)) => shown == mood || shown == Mood::SelfVolunteer,
                    None => false,
                };
                if already || !dwell_elapsed(t, now, dwell) {
                    return;
                }
                let t = self.state.tracks.get_mut(&kind).expect("track per kind");
                t.stage = Some(Stage::Bid(mood));
                t.stage_lapsed_since = None;
                t.last_cue_at = Some(now);
                self.emit(now, CueKey::Bid(kind, mood), out);
            }
            (_, CueIntent::Kind(kind)) => {
                let t = &self.state.tracks[&kind];
                if winner.level <= t.displayed || !dwell_elapsed(t, now, dwell) {
                    return;
                }
                let t = self.state.tracks.get_mut(&kind).expect("track per kind");
                t.displayed += 1;
                t.below_since = None;
                t.last_cue_at = Some(now);
                let level = t.displayed;
                self.emit(now, CueKey::Notice(kind, level), out);
            }
            _ => {}
        }
    }
}

fn dwell_elapsed(t: &Track, now: u64, dwell: u64) -> bool {
    t.last_cue_at
        .is_none_or(|last| now.saturating_sub(last) >= dwell)
}
