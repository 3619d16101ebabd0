//! Facilitator embodiments. Each consumes the cue stream of one meeting in
//! emission order; nothing flows back to the engine.

use serde::{Deserialize, Serialize};

use crate::cue::{CueCommand, CueIntent, CueLevel, Gaze};
use crate::protocol::{CueFrame, ServerFrame};

pub trait Actuator {
    fn perform(&mut self, at: u64, cue: &CueCommand);
}

/// `[t=0] intent=mistake level=1 gestures=blink_eyes,jerk_head_slight utter='' gaze=speaker`
pub fn render_console(at: u64, cue: &CueCommand) -> String {
    format!(
        "[t={at}] intent={} level={} gestures={} utter='{}' gaze={}",
        cue.intent,
        cue.level,
        cue.gestures.join(","),
        cue.utterance.as_deref().unwrap_or(""),
        cue.gaze.wire_name(),
    )
}

/// Collects console lines, optionally echoing them to stdout.
#[derive(Debug, Default)]
pub struct ConsoleActuator {
    pub lines: Vec<String>,
    pub echo: bool,
}

impl Actuator for ConsoleActuator {
    fn perform(&mut self, at: u64, cue: &CueCommand) {
        let line = render_console(at, cue);
        if self.echo {
            println!("{line}");
        }
        self.lines.push(line);
    }
}

/// The avatar embodiment: a broadcast cue frame for browser clients.
pub fn emit_avatar(cue: &CueCommand) -> ServerFrame {
    ServerFrame::Cue(CueFrame::from(cue))
}

#[derive(Debug, Default)]
pub struct AvatarActuator {
    pub frames: Vec<ServerFrame>,
}

impl Actuator for AvatarActuator {
    fn perform(&mut self, _at: u64, cue: &CueCommand) {
        self.frames.push(emit_avatar(cue));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CueLogLine {
    t: u64,
    #[serde(rename = "type")]
    frame_type: String,
    intent: CueIntent,
    level: CueLevel,
    gestures: Vec<String>,
    utterance: Option<String>,
    gaze: Gaze,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueLogEntry {
    pub t: u64,
    pub cue: CueCommand,
}

/// Append-only cue record; its text form is the golden-file format.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CueLog {
    entries: Vec<CueLogEntry>,
}

impl CueLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, at: u64, cue: &CueCommand) {
        self.entries.push(CueLogEntry {
            t: at,
            cue: cue.clone(),
        });
    }

    pub fn entries(&self) -> &[CueLogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn format_line(entry: &CueLogEntry) -> String {
        let c = &entry.cue;
        let line = CueLogLine {
            t: entry.t,
            frame_type: "cue".to_owned(),
            intent: c.intent,
            level: c.level,
            gestures: c.gestures.clone(),
            utterance: c.utterance.clone(),
            gaze: c.gaze,
        };
        serde_json::to_string(&line).expect("cue log lines always serialize")
    }

    /// One JSON object per line, each terminated by `\n`.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| Self::format_line(e) + "\n")
            .collect()
    }

    pub fn parse(text: &str) -> Result<CueLog, String> {
        let mut log = CueLog::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: CueLogLine =
                serde_json::from_str(raw).map_err(|e| format!("line {}: {e}", i + 1))?;
            if line.frame_type != "cue" {
                return Err(format!("line {}: not a cue", i + 1));
            }
            log.entries.push(CueLogEntry {
                t: line.t,
                cue: CueCommand {
                    intent: line.intent,
                    level: line.level,
                    gestures: line.gestures,
                    utterance: line.utterance,
                    gaze: line.gaze,
                },
            });
        }
        Ok(log)
    }
}

impl Actuator for CueLog {
    fn perform(&mut self, at: u64, cue: &CueCommand) {
        self.record(at, cue);
    }
}
