//! Client and server frames exchanged over the per-client duplex channel.
//! Each frame is one UTF-8 JSON object discriminated by `"type"`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cue::{CueCommand, CueIntent, CueLevel, Gaze};
use crate::escalation::FloorPhase;
use crate::signal::{Mood, SignalKind, Strength};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientFrame {
    Signal {
        kind: SignalKind,
        mood: Mood,
        strength: Strength,
    },
    Retract {
        kind: SignalKind,
    },
    Cancel,
    Floor {
        phase: FloorPhase,
    },
    End,
}

impl ClientFrame {
    pub fn parse(text: &str) -> Result<ClientFrame, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueFrame {
    pub intent: CueIntent,
    pub level: CueLevel,
    pub gestures: Vec<String>,
    pub utterance: Option<String>,
    pub gaze: Gaze,
}

impl From<&CueCommand> for CueFrame {
    fn from(c: &CueCommand) -> Self {
        CueFrame {
            intent: c.intent,
            level: c.level,
            gestures: c.gestures.clone(),
            utterance: c.utterance.clone(),
            gaze: c.gaze,
        }
    }
}

/// Frames sent from server to clients. `FloorGrant` and `Error` are only
/// ever addressed to a single connection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Cue(CueFrame),
    Aggregate {
        counts: BTreeMap<SignalKind, usize>,
        audience: usize,
    },
    Floor {
        phase: FloorPhase,
    },
    FloorGrant {
        kind: SignalKind,
    },
    Error {
        code: String,
    },
}

impl ServerFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server frames always serialize")
    }

    pub fn error(code: &str) -> Self {
        ServerFrame::Error {
            code: code.to_owned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_frames_match_documented_shapes() {
        let f = ClientFrame::parse(
            r#"{"type":"signal","kind":"mistake","mood":"general","strength":"normal"}"#,
        )
        .unwrap();
        assert_eq!(
            f,
            ClientFrame::Signal {
                kind: SignalKind::Mistake,
                mood: Mood::General,
                strength: Strength::Normal
            }
        );
        assert_eq!(
            ClientFrame::parse(r#"{"type":"floor","phase":"paused"}"#).unwrap(),
            ClientFrame::Floor {
                phase: FloorPhase::SpeakerPaused
            }
        );
        assert_eq!(ClientFrame::parse(r#"{"type":"cancel"}"#).unwrap(), ClientFrame::Cancel);
        assert_eq!(ClientFrame::parse(r#"{"type":"end"}"#).unwrap(), ClientFrame::End);
        assert!(ClientFrame::parse(r#"{"type":"signal","kind":"sing","mood":"general","strength":"normal"}"#).is_err());
        assert!(ClientFrame::parse(r#"{"type":"retract","kind":"skip","extra":1}"#).is_err());
        assert!(ClientFrame::parse("\u{0}garbage").is_err());
    }

    #[test]
    fn server_frames_serialize_exactly() {
        let cue = ServerFrame::Cue(CueFrame {
            intent: CueIntent::Kind(SignalKind::Mistake),
            level: CueLevel::Notice(1),
            gestures: vec!["blink_eyes".into(), "jerk_head_slight".into()],
            utterance: None,
            gaze: Gaze::Speaker,
        });
        assert_eq!(
            cue.to_json(),
            r#"{"type":"cue","intent":"mistake","level":1,"gestures":["blink_eyes","jerk_head_slight"],"utterance":null,"gaze":"speaker"}"#
        );
        let agg = ServerFrame::Aggregate {
            counts: BTreeMap::from([(SignalKind::Mistake, 3)]),
            audience: 30,
        };
        assert_eq!(
            agg.to_json(),
            r#"{"type":"aggregate","counts":{"mistake":3},"audience":30}"#
        );
        assert_eq!(
            ServerFrame::FloorGrant {
                kind: SignalKind::Dialogue
            }
            .to_json(),
            r#"{"type":"floor_grant","kind":"dialogue"}"#
        );
        assert_eq!(
            ServerFrame::error("malformed_frame").to_json(),
            r#"{"type":"error","code":"malformed_frame"}"#
        );
        let back: ServerFrame = serde_json::from_str(&cue.to_json()).unwrap();
        assert_eq!(back, cue);
    }
}
