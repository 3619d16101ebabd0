//! Signal vocabulary shared by every layer: kinds, categories, moods,
//! strengths and participant roles, plus their wire tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseTokenError;

/// What a listener is asking the facilitator to express.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalKind {
    Explain,
    Doubtful,
    Skip,
    Questionable,
    Mistake,
    Dialogue,
    Announcement,
    Inappropriate,
    Overtime,
    Dispute,
    Secret,
    CalmDown,
}

impl SignalKind {
    pub const ALL: [SignalKind; 12] = [
        SignalKind::Explain,
        SignalKind::Doubtful,
        SignalKind::Skip,
        SignalKind::Questionable,
        SignalKind::Mistake,
        SignalKind::Dialogue,
        SignalKind::Announcement,
        SignalKind::Inappropriate,
        SignalKind::Overtime,
        SignalKind::Dispute,
        SignalKind::Secret,
        SignalKind::CalmDown,
    ];

    pub fn category(self) -> Category {
        category_of(self)
    }

    pub fn wire_name(self) -> &'static str {
        match self {
            SignalKind::Explain => "explain",
            SignalKind::Doubtful => "doubtful",
            SignalKind::Skip => "skip",
            SignalKind::Questionable => "questionable",
            SignalKind::Mistake => "mistake",
            SignalKind::Dialogue => "dialogue",
            SignalKind::Announcement => "announcement",
            SignalKind::Inappropriate => "inappropriate",
            SignalKind::Overtime => "overtime",
            SignalKind::Dispute => "dispute",
            SignalKind::Secret => "secret",
            SignalKind::CalmDown => "calm_down",
        }
    }

    pub fn is_comment(self) -> bool {
        self.category() == Category::Comment
    }
}

/// Category a kind belongs to. `Audience` is addressed to listeners rather
/// than the speaker and holds only [`SignalKind::CalmDown`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Advice,
    Comment,
    Stop,
    Audience,
}

pub fn category_of(kind: SignalKind) -> Category {
    use SignalKind::*;
    match kind {
        Explain | Doubtful | Skip => Category::Advice,
        Questionable | Mistake | Dialogue | Announcement => Category::Comment,
        Inappropriate | Overtime | Dispute | Secret => Category::Stop,
        CalmDown => Category::Audience,
    }
}

/// Comment signals either volunteer the signaler (`SelfVolunteer`) or ask
/// for a comment in general. Every other category always carries `General`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Mood {
    SelfVolunteer,
    #[default]
    General,
}

impl Mood {
    pub fn wire_name(self) -> &'static str {
        match self {
            Mood::SelfVolunteer => "self",
            Mood::General => "general",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Strength {
    Weak,
    #[default]
    Normal,
    Strong,
}

impl Strength {
    pub const ALL: [Strength; 3] = [Strength::Weak, Strength::Normal, Strength::Strong];

    pub fn wire_name(self) -> &'static str {
        match self {
            Strength::Weak => "weak",
            Strength::Normal => "normal",
            Strength::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParticipantRole {
    Listener,
    Speaker,
    Host,
    Actuator,
}

impl ParticipantRole {
    pub fn wire_name(self) -> &'static str {
        match self {
            ParticipantRole::Listener => "listener",
            ParticipantRole::Speaker => "speaker",
            ParticipantRole::Host => "host",
            ParticipantRole::Actuator => "actuator",
        }
    }

    /// Roles allowed to submit audience signals.
    pub fn may_signal(self) -> bool {
        matches!(self, ParticipantRole::Listener | ParticipantRole::Speaker)
    }

    /// Roles allowed to report floor phases.
    pub fn may_report_floor(self) -> bool {
        matches!(self, ParticipantRole::Speaker | ParticipantRole::Host)
    }

    /// Short prefix used for pseudo-session ids in traces ("L1", "S1", ...).
    pub fn pseudo_prefix(self) -> char {
        match self {
            ParticipantRole::Listener => 'L',
            ParticipantRole::Speaker => 'S',
            ParticipantRole::Host => 'H',
            ParticipantRole::Actuator => 'A',
        }
    }
}

/// Parses a lowercase kind token such as `"calm_down"`.
pub fn parse_kind(text: &str) -> Result<SignalKind, ParseTokenError> {
    SignalKind::ALL
        .into_iter()
        .find(|k| k.wire_name() == text)
        .ok_or_else(|| ParseTokenError::UnknownKind(text.to_owned()))
}

macro_rules! wire_token {
    ($ty:ty, $err:ident, [$($variant:expr),+ $(,)?]) => {
        impl FromStr for $ty {
            type Err = ParseTokenError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                [$($variant),+]
                    .into_iter()
                    .find(|v: &$ty| v.wire_name() == s)
                    .ok_or_else(|| ParseTokenError::$err(s.to_owned()))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.wire_name())
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.wire_name())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

wire_token!(
    SignalKind,
    UnknownKind,
    [
        SignalKind::Explain,
        SignalKind::Doubtful,
        SignalKind::Skip,
        SignalKind::Questionable,
        SignalKind::Mistake,
        SignalKind::Dialogue,
        SignalKind::Announcement,
        SignalKind::Inappropriate,
        SignalKind::Overtime,
        SignalKind::Dispute,
        SignalKind::Secret,
        SignalKind::CalmDown,
    ]
);
wire_token!(Mood, UnknownMood, [Mood::SelfVolunteer, Mood::General]);
wire_token!(
    Strength,
    UnknownStrength,
    [Strength::Weak, Strength::Normal, Strength::Strong]
);
wire_token!(
    ParticipantRole,
    UnknownRole,
    [
        ParticipantRole::Listener,
        ParticipantRole::Speaker,
        ParticipantRole::Host,
        ParticipantRole::Actuator,
    ]
);

/// Rejects `SelfVolunteer` on anything but a Comment kind.
pub fn check_mood(kind: SignalKind, mood: Mood) -> Result<(), ParseTokenError> {
    if mood == Mood::SelfVolunteer && !kind.is_comment() {
        return Err(ParseTokenError::InvalidMood { kind, mood });
    }
    Ok(())
}
