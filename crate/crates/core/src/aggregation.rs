//! Per-meeting signal ledger and the pure scoring functions built on it.
//!
//! Everything here is a function of ledger contents, the audience size and
//! the policy. No clocks are read; callers pass `now` explicitly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::LedgerError;
use crate::policy::{weight_of, PolicyConfig, SCORE_EPSILON};
use crate::signal::{check_mood, Category, Mood, ParticipantRole, SignalKind, Strength};

/// Opaque engine-side session handle. Network tokens are mapped onto these
/// by the session layer and never reach the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SessionId(pub u64);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Notice-ladder level, 0 (nothing shown) through 3.
pub type Level = u8;

pub const MAX_LEVEL: Level = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub role: ParticipantRole,
    pub join_order: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSignal {
    pub session: SessionId,
    pub kind: SignalKind,
    pub mood: Mood,
    pub strength: Strength,
    pub submitted_at: u64,
    pub expires_at: u64,
}

/// A pending floor request: who asked and when.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bid {
    pub session: SessionId,
    pub kind: SignalKind,
    pub submitted_at: u64,
    pub join_order: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentSupport {
    pub kind: SignalKind,
    pub score: f64,
    pub signaler_count: usize,
    pub general_count: usize,
    pub strong_present: bool,
    /// False when there are no signals at all.
    pub all_weak: bool,
    pub first_signal_at: Option<u64>,
    /// SelfVolunteer comment signals ordered by submission time, then join order.
    pub self_bids: Vec<Bid>,
}

impl IntentSupport {
    fn empty(kind: SignalKind) -> Self {
        IntentSupport {
            kind,
            score: 0.0,
            signaler_count: 0,
            general_count: 0,
            strong_present: false,
            all_weak: false,
            first_signal_at: None,
            self_bids: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalLedger {
    members: BTreeMap<SessionId, Member>,
    next_join_order: u64,
    signals: BTreeMap<(SessionId, SignalKind), ActiveSignal>,
    cancel_votes: BTreeSet<SessionId>,
}

/// Kinds whose support pushes the speaker to yield the floor outright:
/// every Stop kind, Skip, and General-mood Announcement.
pub fn in_yield_set(kind: SignalKind, mood: Mood) -> bool {
    match kind {
        SignalKind::Skip => true,
        SignalKind::Announcement => mood == Mood::General,
        k => k.category() == Category::Stop,
    }
}

impl SignalLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn join(&mut self, session: SessionId, role: ParticipantRole) -> Result<(), LedgerError> {
        if self.members.contains_key(&session) {
            return Err(LedgerError::DuplicateSession(session));
        }
        let join_order = self.next_join_order;
        self.next_join_order += 1;
        self.members.insert(session, Member { role, join_order });
        Ok(())
    }

    /// Removes the session together with its signals and cancel vote.
    pub fn leave(&mut self, session: SessionId) -> Result<(), LedgerError> {
        self.members
            .remove(&session)
            .ok_or(LedgerError::UnknownSession(session))?;
        self.signals.retain(|(s, _), _| *s != session);
        self.cancel_votes.remove(&session);
        Ok(())
    }

    pub fn member(&self, session: SessionId) -> Option<&Member> {
        self.members.get(&session)
    }

    pub fn members(&self) -> impl Iterator<Item = (SessionId, &Member)> {
        self.members.iter().map(|(s, m)| (*s, m))
    }

    /// Number of joined Listener sessions.
    pub fn audience_size(&self) -> usize {
        self.members
            .values()
            .filter(|m| m.role == ParticipantRole::Listener)
            .count()
    }

    /// Inserts or replaces the (session, kind) signal; latest submission wins.
    pub fn upsert_signal(
        &mut self,
        session: SessionId,
        kind: SignalKind,
        mood: Mood,
        strength: Strength,
        now: u64,
        policy: &PolicyConfig,
    ) -> Result<(), LedgerError> {
        self.check_signal(session, kind, mood)?;
        self.signals.insert(
            (session, kind),
            ActiveSignal {
                session,
                kind,
                mood,
                strength,
                submitted_at: now,
                expires_at: now.saturating_add(policy.ttl_ms),
            },
        );
        Ok(())
    }

    /// Validation half of [`upsert_signal`](Self::upsert_signal), without mutation.
    pub fn check_signal(
        &self,
        session: SessionId,
        kind: SignalKind,
        mood: Mood,
    ) -> Result<(), LedgerError> {
        let member = self
            .members
            .get(&session)
            .ok_or(LedgerError::UnknownSession(session))?;
        if !member.role.may_signal() {
            return Err(LedgerError::RoleNotPermitted {
                session,
                action: "signal",
            });
        }
        check_mood(kind, mood)?;
        Ok(())
    }

    /// Removing a signal that is not present is a no-op.
    pub fn retract_signal(&mut self, session: SessionId, kind: SignalKind) {
        self.signals.remove(&(session, kind));
    }

    /// Drops every signal with `expires_at <= now`.
    pub fn expire(&mut self, now: u64) {
        self.signals.retain(|_, s| s.expires_at > now);
    }

    pub fn signals(&self) -> impl Iterator<Item = &ActiveSignal> {
        self.signals.values()
    }

    pub fn signal(&self, session: SessionId, kind: SignalKind) -> Option<&ActiveSignal> {
        self.signals.get(&(session, kind))
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn retain_signals(&mut self, mut keep: impl FnMut(&ActiveSignal) -> bool) {
        self.signals.retain(|_, s| keep(s));
    }

    pub fn clear_kind(&mut self, kind: SignalKind) {
        self.signals.retain(|(_, k), _| *k != kind);
    }

    pub fn support(&self, kind: SignalKind, policy: &PolicyConfig) -> IntentSupport {
        let mut sup = IntentSupport::empty(kind);
        let mut all_weak = true;
        for s in self.signals.values().filter(|s| s.kind == kind) {
            let (w, strong) = weight_of(s.strength, policy);
            sup.signaler_count += 1;
            if strong {
                sup.strong_present = true;
            } else {
                sup.score += w;
            }
            all_weak &= s.strength == Strength::Weak;
            if s.mood == Mood::General {
                sup.general_count += 1;
            }
            sup.first_signal_at = Some(match sup.first_signal_at {
                Some(t) => t.min(s.submitted_at),
                None => s.submitted_at,
            });
            if kind.is_comment() && s.mood == Mood::SelfVolunteer {
                sup.self_bids.push(self.bid_of(s));
            }
        }
        sup.all_weak = sup.signaler_count > 0 && all_weak;
        sup.self_bids
            .sort_by_key(|b| (b.submitted_at, b.join_order));
        sup
    }

    /// Every SelfVolunteer comment signal across kinds, earliest first.
    pub fn all_self_bids(&self) -> Vec<Bid> {
        let mut bids: Vec<Bid> = self
            .signals
            .values()
            .filter(|s| s.kind.is_comment() && s.mood == Mood::SelfVolunteer)
            .map(|s| self.bid_of(s))
            .collect();
        bids.sort_by_key(|b| (b.submitted_at, b.join_order, b.kind));
        bids
    }

    fn bid_of(&self, s: &ActiveSignal) -> Bid {
        Bid {
            session: s.session,
            kind: s.kind,
            submitted_at: s.submitted_at,
            join_order: self
                .members
                .get(&s.session)
                .map_or(u64::MAX, |m| m.join_order),
        }
    }

    /// Summed support over the yield set. Strong signals count as Normal here.
    pub fn yield_pressure(&self, policy: &PolicyConfig) -> f64 {
        self.signals
            .values()
            .filter(|s| in_yield_set(s.kind, s.mood))
            .map(|s| match weight_of(s.strength, policy) {
                (_, true) => policy.weight_normal,
                (w, false) => w,
            })
            .sum()
    }

    /// Number of yield-set signals.
    pub fn yield_signalers(&self) -> usize {
        self.signals
            .values()
            .filter(|s| in_yield_set(s.kind, s.mood))
            .count()
    }

    /// Signaler count per kind, omitting kinds with no signals.
    pub fn signaler_counts(&self) -> BTreeMap<SignalKind, usize> {
        let mut counts = BTreeMap::new();
        for s in self.signals.values() {
            *counts.entry(s.kind).or_insert(0) += 1;
        }
        counts
    }

    pub fn add_cancel_vote(&mut self, session: SessionId) {
        self.cancel_votes.insert(session);
    }

    pub fn cancel_votes(&self) -> usize {
        self.cancel_votes.len()
    }

    pub fn clear_cancel_votes(&mut self) {
        self.cancel_votes.clear();
    }
}

fn at_least(score: f64, threshold: f64) -> bool {
    score + SCORE_EPSILON >= threshold
}

/// Minimum number of heads a weak-only intent needs before it counts.
pub fn weak_gate_heads(n: usize, policy: &PolicyConfig) -> usize {
    let raw = policy.weak_gate_frac * n as f64;
    (raw - SCORE_EPSILON).ceil().max(0.0) as usize
}

/// Maps aggregated support to a notice-ladder level for an audience of `n`.
pub fn computed_level(s: &IntentSupport, n: usize, policy: &PolicyConfig) -> Level {
    if s.strong_present {
        return MAX_LEVEL;
    }
    if s.all_weak && s.signaler_count < weak_gate_heads(n, policy) {
        return 0;
    }
    let n = n as f64;
    if at_least(s.score, policy.level3_abs.max(policy.level3_frac * n)) {
        3
    } else if at_least(s.score, policy.level2_abs.max(policy.level2_frac * n)) {
        2
    } else if s.score > 0.0 && at_least(s.score, policy.level1_abs) {
        1
    } else {
        0
    }
}
