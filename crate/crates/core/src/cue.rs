//! Facilitator output commands.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::aggregation::Level;
use crate::signal::SignalKind;

/// What a cue is about. Cues never carry session identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CueIntent {
    Kind(SignalKind),
    YieldIntervention,
    GrantAnnounce,
    StandDown,
}

impl CueIntent {
    pub fn wire_name(self) -> &'static str {
        match self {
            CueIntent::Kind(k) => k.wire_name(),
            CueIntent::YieldIntervention => "yield_intervention",
            CueIntent::GrantAnnounce => "grant_announce",
            CueIntent::StandDown => "stand_down",
        }
    }
}

impl fmt::Display for CueIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl Serialize for CueIntent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.wire_name())
    }
}

impl<'de> Deserialize<'de> for CueIntent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(match s.as_str() {
            "yield_intervention" => CueIntent::YieldIntervention,
            "grant_announce" => CueIntent::GrantAnnounce,
            "stand_down" => CueIntent::StandDown,
            other => CueIntent::Kind(other.parse().map_err(de::Error::custom)?),
        })
    }
}

/// Stage of a cue. Notice levels serialize as integers, the others as strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CueLevel {
    Notice(Level),
    Bid,
    Final,
}

impl fmt::Display for CueLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CueLevel::Notice(l) => write!(f, "{l}"),
            CueLevel::Bid => f.write_str("bid"),
            CueLevel::Final => f.write_str("final"),
        }
    }
}

impl Serialize for CueLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CueLevel::Notice(l) => serializer.serialize_u8(*l),
            CueLevel::Bid => serializer.serialize_str("bid"),
            CueLevel::Final => serializer.serialize_str("final"),
        }
    }
}

impl<'de> Deserialize<'de> for CueLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct LevelVisitor;

        impl Visitor<'_> for LevelVisitor {
            type Value = CueLevel;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer 0..=3, \"bid\" or \"final\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<CueLevel, E> {
                match v {
                    0..=3 => Ok(CueLevel::Notice(v as Level)),
                    _ => Err(E::custom(format!("level {v} out of range"))),
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<CueLevel, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom("negative level"))
                    .and_then(|v| self.visit_u64(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<CueLevel, E> {
                match v {
                    "bid" => Ok(CueLevel::Bid),
                    "final" => Ok(CueLevel::Final),
                    _ => Err(E::custom(format!("unknown level `{v}`"))),
                }
            }
        }

        deserializer.deserialize_any(LevelVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gaze {
    Speaker,
    Audience,
    Grantee,
}

impl Gaze {
    pub fn wire_name(self) -> &'static str {
        match self {
            Gaze::Speaker => "speaker",
            Gaze::Audience => "audience",
            Gaze::Grantee => "grantee",
        }
    }
}

/// One step of facilitator behaviour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueCommand {
    pub intent: CueIntent,
    pub level: CueLevel,
    pub gestures: Vec<String>,
    pub utterance: Option<String>,
    pub gaze: Gaze,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_wire_forms() {
        assert_eq!(serde_json::to_string(&CueLevel::Notice(2)).unwrap(), "2");
        assert_eq!(serde_json::to_string(&CueLevel::Bid).unwrap(), "\"bid\"");
        let l: CueLevel = serde_json::from_str("\"final\"").unwrap();
        assert_eq!(l, CueLevel::Final);
        let l: CueLevel = serde_json::from_str("0").unwrap();
        assert_eq!(l, CueLevel::Notice(0));
        assert!(serde_json::from_str::<CueLevel>("4").is_err());
    }

    #[test]
    fn intent_wire_forms() {
        for intent in [
            CueIntent::Kind(SignalKind::CalmDown),
            CueIntent::YieldIntervention,
            CueIntent::GrantAnnounce,
            CueIntent::StandDown,
        ] {
            let json = serde_json::to_string(&intent).unwrap();
            assert_eq!(serde_json::from_str::<CueIntent>(&json).unwrap(), intent);
        }
    }
}
