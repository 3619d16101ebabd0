#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod core_support;

use std::collections::{BTreeMap, BTreeSet};

use backchannel_core::protocol::{CueFrame, ServerFrame};
use backchannel_core::{Ladder, Mood, ParticipantRole, PolicyConfig, PolicyOverrides, SessionId, SignalKind};
use backchannel_server::{Dispatch, Hub, HubError};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn seeded_hub(seed: u64) -> Hub {
    Hub::with_rng(PolicyConfig::default(), Ladder::default(), StdRng::seed_from_u64(seed))
}

/// Everything observable from outside during one randomized meeting.
#[derive(Debug, Default)]
pub struct LiveRun {
    pub meeting_id: String,
    pub secrets: Vec<String>,
    /// Cue frames with their meeting time, in emission order.
    pub cues: Vec<(u64, CueFrame)>,
    pub broadcast_json: Vec<String>,
    pub privates: Vec<(SessionId, ServerFrame)>,
    pub violations: Vec<String>,
    pub events: usize,
}

const KINDS: [SignalKind; 12] = SignalKind::ALL;

/// Drives a meeting on `hub` with random client frames from up to
/// `max_listeners` listeners and one speaker, ending it with the host key.
pub fn drive_random_meeting(hub: &mut Hub, seed: u64, max_listeners: usize, max_events: usize) -> LiveRun {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut run = LiveRun::default();
    let mut now = rng.random_range(0..10_000u64);
    let (id, host_key) = hub.create_meeting(&PolicyOverrides::default(), now).unwrap();
    run.meeting_id = id.clone();
    run.secrets.push(id.clone());
    run.secrets.push(host_key.clone());
    let speaker = hub.join(&id, ParticipantRole::Speaker, Some(&host_key), now).unwrap();
    run.secrets.push(speaker.token.clone());
    absorb(&mut run, speaker.dispatch);

    let mut listeners: Vec<(String, SessionId)> = Vec::new();
    // (session, kind) -> mood of the last signal sent and not retracted
    let mut outstanding: BTreeMap<(SessionId, SignalKind), Mood> = BTreeMap::new();
    let target = rng.random_range(1..=max_listeners.max(1));
    let events = rng.random_range(1..=max_events.max(1));
    for _ in 0..events {
        now += rng.random_range(0..2500u64);
        let roll = rng.random_range(0..100u32);
        let mut released = false;
        let result: Result<Dispatch, HubError> = if listeners.is_empty() || (roll < 15 && listeners.len() < target) {
            match hub.join(&id, ParticipantRole::Listener, None, now) {
                Ok(t) => {
                    run.secrets.push(t.token.clone());
                    listeners.push((t.token, t.session));
                    Ok(t.dispatch)
                }
                Err(e) => Err(e),
            }
        } else if roll < 18 {
            let (token, session) = listeners.swap_remove(rng.random_range(0..listeners.len()));
            outstanding.retain(|(s, _), _| *s != session);
            hub.leave(&id, &token, now)
        } else if roll < 68 {
            let (token, session) = listeners[rng.random_range(0..listeners.len())].clone();
            let kind = KINDS[rng.random_range(0..KINDS.len())];
            let mood = if rng.random_bool(0.5) { Mood::SelfVolunteer } else { Mood::General };
            let strength = ["weak", "normal", "normal", "strong"][rng.random_range(0..4)];
            let text = format!(
                r#"{{"type":"signal","kind":"{kind}","mood":"{mood}","strength":"{strength}"}}"#
            );
            let r = hub.route_frame(&id, &token, &text, now);
            if r.is_ok() {
                outstanding.insert((session, kind), mood);
            }
            r
        } else if roll < 76 {
            let (token, session) = listeners[rng.random_range(0..listeners.len())].clone();
            let kind = KINDS[rng.random_range(0..KINDS.len())];
            outstanding.remove(&(session, kind));
            hub.route_frame(&id, &token, &format!(r#"{{"type":"retract","kind":"{kind}"}}"#), now)
        } else if roll < 80 {
            let (token, _) = &listeners[rng.random_range(0..listeners.len())];
            hub.route_frame(&id, token, r#"{"type":"cancel"}"#, now)
        } else if roll < 86 {
            let phase = ["started", "paused", "released"][rng.random_range(0..3)];
            let r = hub.route_frame(&id, &speaker.token, &format!(r#"{{"type":"floor","phase":"{phase}"}}"#), now);
            released = phase == "released" && r.is_ok();
            r
        } else if roll < 88 {
            let (token, _) = &listeners[rng.random_range(0..listeners.len())];
            let r = hub.route_frame(&id, token, r#"{"type":"floor","phase":"paused"}"#, now);
            if !matches!(r, Err(HubError::ForbiddenFrame)) {
                run.violations.push(format!("listener floor frame accepted: {r:?}"));
            }
            r
        } else if roll < 90 {
            let (token, _) = &listeners[rng.random_range(0..listeners.len())];
            let r = hub.route_frame(&id, token, "\u{1}not json", now);
            if !matches!(r, Err(HubError::MalformedFrame(_))) {
                run.violations.push(format!("garbage accepted: {r:?}"));
            }
            r
        } else {
            hub.tick(&id, now)
        };
        run.events += 1;
        match result {
            Ok(d) => {
                for (session, frame) in &d.private {
                    if let ServerFrame::FloorGrant { kind } = frame {
                        if outstanding.get(&(*session, *kind)) != Some(&Mood::SelfVolunteer) {
                            run.violations.push(format!("grant {kind} to {session}, who had no such bid"));
                        }
                    }
                }
                absorb(&mut run, d);
                if released {
                    outstanding.clear();
                }
            }
            Err(HubError::ForbiddenFrame | HubError::MalformedFrame(_)) => {}
            Err(e) if e.code() == "invalid_mood" => {}
            Err(e) => run.violations.push(format!("unexpected error: {e}")),
        }
    }
    now += 1000;
    if !matches!(hub.end_meeting(&id, "not-the-key", now), Err(HubError::Unauthorized)) {
        run.violations.push("end with a wrong key was accepted".into());
    }
    match hub.end_meeting(&id, &host_key, now) {
        Ok(d) => absorb(&mut run, d),
        Err(e) => run.violations.push(format!("end failed: {e}")),
    }
    run
}

fn absorb(run: &mut LiveRun, d: Dispatch) {
    for frame in &d.broadcast {
        if matches!(frame, ServerFrame::FloorGrant { .. } | ServerFrame::Error { .. }) {
            run.violations.push(format!("private frame broadcast: {frame:?}"));
        }
        if let ServerFrame::Cue(c) = frame {
            run.cues.push((d.at, c.clone()));
        }
        run.broadcast_json.push(frame.to_json());
    }
    let recipients: BTreeSet<_> = d.private.iter().map(|(s, _)| *s).collect();
    if recipients.len() != d.private.len() {
        run.violations.push("one grant fanned out to several sessions".into());
    }
    run.privates.extend(d.private);
}

/// Broadcast frames that contain any issued secret.
pub fn leaks(run: &LiveRun) -> Vec<String> {
    run.broadcast_json
        .iter()
        .filter(|json| run.secrets.iter().any(|s| json.contains(s.as_str())))
        .cloned()
        .collect()
}
