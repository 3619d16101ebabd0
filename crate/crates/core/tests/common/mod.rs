//! Test support shared by the core integration tests and the acceptance
//! target (which pulls this file in by path).
#![allow(dead_code)]

use backchannel_core::{
    computed_level, EventPayload, Level, MeetingEvent, Mood, ParticipantRole, PolicyConfig,
    SessionId, SignalKind, SignalLedger, Strength,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Threshold table in half-point integer units (weak = 1, normal = 2) for
/// the default policy. Kept free of floats on purpose.
pub fn oracle_level(strengths: &[Strength], n: usize) -> Level {
    if strengths.contains(&Strength::Strong) {
        return 3;
    }
    let halves: usize = strengths
        .iter()
        .map(|s| if *s == Strength::Weak { 1 } else { 2 })
        .sum();
    let heads = strengths.len();
    let all_weak = heads > 0 && strengths.iter().all(|s| *s == Strength::Weak);
    // ceil(n / 2) heads needed when everything is weak
    if all_weak && 2 * heads < n {
        return 0;
    }
    // score >= max(3, n/5)  <=>  halves >= 6 and 5*halves >= 2n
    if halves >= 6 && 5 * halves >= 2 * n {
        3
    // score >= max(2, n/10)  <=>  halves >= 4 and 5*halves >= n
    } else if halves >= 4 && 5 * halves >= n {
        2
    } else if halves >= 2 {
        1
    } else {
        0
    }
}

/// `n` listeners as sessions 1..=n.
pub fn audience(n: usize) -> SignalLedger {
    let mut ledger = SignalLedger::new();
    for i in 1..=n as u64 {
        ledger.join(SessionId(i), ParticipantRole::Listener).unwrap();
    }
    ledger
}

/// Places the j-th signal of each kind on listener j. `None` when some kind
/// has more signals than there are listeners.
pub fn ledger_with(n: usize, signals: &[(SignalKind, Strength)], policy: &PolicyConfig) -> Option<SignalLedger> {
    let mut ledger = audience(n);
    let mut per_kind = std::collections::BTreeMap::new();
    for (t, (kind, strength)) in signals.iter().enumerate() {
        let j = per_kind.entry(*kind).or_insert(0usize);
        *j += 1;
        if *j > n {
            return None;
        }
        ledger
            .upsert_signal(SessionId(*j as u64), *kind, Mood::General, *strength, t as u64, policy)
            .unwrap();
    }
    Some(ledger)
}

pub struct SweepResult {
    pub checked: usize,
    pub mismatches: Vec<String>,
}

/// Every ledger of at most six signals drawn from two kinds and three
/// strengths, for audiences of 1 through 8, compared against the oracle.
pub fn oracle_sweep() -> SweepResult {
    const KINDS: [SignalKind; 2] = [SignalKind::Mistake, SignalKind::Skip];
    let policy = PolicyConfig::default();
    let alphabet: Vec<(SignalKind, Strength)> = KINDS
        .iter()
        .flat_map(|k| Strength::ALL.iter().map(move |s| (*k, *s)))
        .collect();
    let mut result = SweepResult { checked: 0, mismatches: Vec::new() };
    for n in 1..=8usize {
        for len in 0..=6u32 {
            for code in 0..alphabet.len().pow(len) {
                let mut c = code;
                let signals: Vec<_> = (0..len)
                    .map(|_| {
                        let s = alphabet[c % alphabet.len()];
                        c /= alphabet.len();
                        s
                    })
                    .collect();
                let Some(ledger) = ledger_with(n, &signals, &policy) else {
                    continue;
                };
                for kind in KINDS {
                    let strengths: Vec<Strength> =
                        signals.iter().filter(|(k, _)| *k == kind).map(|(_, s)| *s).collect();
                    let got = computed_level(&ledger.support(kind, &policy), ledger.audience_size(), &policy);
                    let want = oracle_level(&strengths, n);
                    result.checked += 1;
                    if got != want {
                        result
                            .mismatches
                            .push(format!("n={n} {kind} {strengths:?}: engine {got}, oracle {want}"));
                    }
                }
            }
        }
    }
    result
}

const SAMPLE_KINDS: [SignalKind; 5] = [
    SignalKind::Mistake,
    SignalKind::Skip,
    SignalKind::Dialogue,
    SignalKind::Inappropriate,
    SignalKind::Announcement,
];

fn random_mood(rng: &mut StdRng, kind: SignalKind) -> Mood {
    if kind.is_comment() && rng.random_bool(0.5) {
        Mood::SelfVolunteer
    } else {
        Mood::General
    }
}

fn random_strength(rng: &mut StdRng) -> Strength {
    Strength::ALL[rng.random_range(0..3)]
}

/// Counts (ledger, extra signal) pairs where adding the signal lowered the
/// level or retracting it raised the level. Returns (trials, violations).
pub fn monotonicity_trials(seed: u64, trials: usize) -> (usize, Vec<String>) {
    let policy = PolicyConfig::default();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for _ in 0..trials {
        let n = rng.random_range(1..=40usize);
        let mut ledger = audience(n);
        for _ in 0..rng.random_range(0..=3 * n) {
            let kind = SAMPLE_KINDS[rng.random_range(0..SAMPLE_KINDS.len())];
            let session = SessionId(rng.random_range(1..=n as u64));
            let mood = random_mood(&mut rng, kind);
            let strength = random_strength(&mut rng);
            ledger.upsert_signal(session, kind, mood, strength, 0, &policy).unwrap();
        }
        let kind = SAMPLE_KINDS[rng.random_range(0..SAMPLE_KINDS.len())];
        let free: Vec<u64> = (1..=n as u64)
            .filter(|s| ledger.signal(SessionId(*s), kind).is_none())
            .collect();
        if free.is_empty() {
            continue;
        }
        let session = SessionId(free[rng.random_range(0..free.len())]);
        let before = computed_level(&ledger.support(kind, &policy), n, &policy);
        let mut grown = ledger.clone();
        let (mood, strength) = (random_mood(&mut rng, kind), random_strength(&mut rng));
        grown.upsert_signal(session, kind, mood, strength, 1, &policy).unwrap();
        let after = computed_level(&grown.support(kind, &policy), n, &policy);
        if after < before {
            violations.push(format!("add {kind} {strength}: {before} -> {after} (n={n})"));
        }
        let mut shrunk = grown.clone();
        shrunk.retract_signal(session, kind);
        let back = computed_level(&shrunk.support(kind, &policy), n, &policy);
        if back > after {
            violations.push(format!("retract {kind} {strength}: {after} -> {back} (n={n})"));
        }
    }
    (trials, violations)
}

/// A plausible meeting: one speaker, a few listeners joining and leaving,
/// signals, retractions, cancels, floor changes and ticks, ending with
/// `EndMeeting`. Every event is valid for the engine.
pub fn random_meeting(seed: u64, max_listeners: usize, max_events: usize) -> Vec<MeetingEvent> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut t = 0u64;
    let mut next_id = 1u64;
    let speaker = SessionId(next_id);
    next_id += 1;
    events.push(MeetingEvent::new(0, EventPayload::Join { session: speaker, role: ParticipantRole::Speaker }));
    let mut present: Vec<SessionId> = Vec::new();
    let target = rng.random_range(1..=max_listeners.max(1));
    let budget = rng.random_range(1..=max_events.max(2)) - 1;
    for _ in 0..budget {
        t += rng.random_range(0..3000u64);
        let roll = rng.random_range(0..100u32);
        let payload = if present.is_empty() || (roll < 12 && present.len() < target) {
            let session = SessionId(next_id);
            next_id += 1;
            present.push(session);
            EventPayload::Join { session, role: ParticipantRole::Listener }
        } else if roll < 15 {
            let i = rng.random_range(0..present.len());
            EventPayload::Leave { session: present.swap_remove(i) }
        } else if roll < 65 {
            let kind = SignalKind::ALL[rng.random_range(0..SignalKind::ALL.len())];
            EventPayload::Signal {
                session: present[rng.random_range(0..present.len())],
                kind,
                mood: random_mood(&mut rng, kind),
                strength: if rng.random_bool(0.05) { Strength::Strong } else { [Strength::Weak, Strength::Normal][rng.random_range(0..2)] },
            }
        } else if roll < 75 {
            EventPayload::Retract {
                session: present[rng.random_range(0..present.len())],
                kind: SignalKind::ALL[rng.random_range(0..SignalKind::ALL.len())],
            }
        } else if roll < 80 {
            EventPayload::CancelScript { session: present[rng.random_range(0..present.len())] }
        } else if roll < 86 {
            let phases = [
                backchannel_core::FloorPhase::SpeakingStarted,
                backchannel_core::FloorPhase::SpeakerPaused,
                backchannel_core::FloorPhase::FloorReleased,
            ];
            EventPayload::Floor(phases[rng.random_range(0..3)])
        } else {
            EventPayload::Tick
        };
        events.push(MeetingEvent::new(t, payload));
    }
    events.push(MeetingEvent::new(t + 1000, EventPayload::EndMeeting));
    events
}
