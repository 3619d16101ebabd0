//! Cue templates per intent and stage, loaded from a TOML data file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::aggregation::{Level, MAX_LEVEL};
use crate::cue::{CueCommand, CueIntent, CueLevel, Gaze};
use crate::error::LadderError;
use crate::signal::{Category, Mood, SignalKind};

/// The ladder shipped with the crate.
pub const DEFAULT_LADDER_TOML: &str = include_str!("../data/ladder.toml");

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CueTemplate {
    pub gestures: Vec<String>,
    #[serde(default)]
    pub utterance: Option<String>,
}

/// Where General-mood support for a Comment kind is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralRoute {
    /// Climb the notice ladder like any other kind.
    #[default]
    Notice,
    /// Go straight to the general-mood bid cue.
    Bid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKind {
    notice: Vec<CueTemplate>,
    #[serde(default)]
    general_route: Option<GeneralRoute>,
    #[serde(default)]
    bid_self: Option<CueTemplate>,
    #[serde(default)]
    bid_general: Option<CueTemplate>,
    #[serde(default, rename = "final")]
    final_cue: Option<CueTemplate>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLadder {
    stand_down: CueTemplate,
    grant_announce: CueTemplate,
    return_to_seat: CueTemplate,
    yield_final: CueTemplate,
    kinds: BTreeMap<String, RawKind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindLadder {
    pub notice: [CueTemplate; 3],
    pub general_route: GeneralRoute,
    pub bid_self: Option<CueTemplate>,
    pub bid_general: Option<CueTemplate>,
    pub final_cue: Option<CueTemplate>,
}

/// Addresses one template in the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CueKey {
    Notice(SignalKind, Level),
    Bid(SignalKind, Mood),
    Final(SignalKind),
    YieldFinal,
    GrantAnnounce,
    ReturnToSeat,
    StandDown,
}

/// A validated ladder: every key the engine can ask for is defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ladder {
    kinds: BTreeMap<SignalKind, KindLadder>,
    stand_down: CueTemplate,
    grant_announce: CueTemplate,
    return_to_seat: CueTemplate,
    yield_final: CueTemplate,
}

impl Default for Ladder {
    fn default() -> Self {
        Ladder::from_toml(DEFAULT_LADDER_TOML).expect("shipped ladder is valid")
    }
}

impl Ladder {
    pub fn load(path: &Path) -> Result<Ladder, LadderError> {
        let text = std::fs::read_to_string(path).map_err(|source| LadderError::Io {
            path: path.to_owned(),
            source,
        })?;
        Ladder::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Ladder, LadderError> {
        let raw: RawLadder = toml::from_str(text)?;
        let mut kinds = BTreeMap::new();
        for (name, rk) in raw.kinds {
            let kind: SignalKind = name
                .parse()
                .map_err(|_| LadderError::UndefinedCue(format!("unknown kind `{name}`")))?;
            let notice: [CueTemplate; 3] = rk.notice.try_into().map_err(|v: Vec<_>| {
                LadderError::UndefinedCue(format!(
                    "{kind}: expected 3 notice levels, found {}",
                    v.len()
                ))
            })?;
            if kind.is_comment() {
                if rk.bid_self.is_none() || rk.bid_general.is_none() {
                    return Err(LadderError::UndefinedCue(format!("{kind}: bid cues")));
                }
            } else {
                if rk.final_cue.is_none() {
                    return Err(LadderError::UndefinedCue(format!("{kind}: final cue")));
                }
                if rk.general_route.is_some() || rk.bid_self.is_some() || rk.bid_general.is_some() {
                    return Err(LadderError::UndefinedCue(format!(
                        "{kind}: bid cues are only defined for comment kinds"
                    )));
                }
            }
            kinds.insert(
                kind,
                KindLadder {
                    notice,
                    general_route: rk.general_route.unwrap_or_default(),
                    bid_self: rk.bid_self,
                    bid_general: rk.bid_general,
                    final_cue: rk.final_cue,
                },
            );
        }
        if let Some(missing) = SignalKind::ALL.iter().find(|k| !kinds.contains_key(k)) {
            return Err(LadderError::UndefinedCue(format!("{missing}: no ladder")));
        }
        let ladder = Ladder {
            kinds,
            stand_down: raw.stand_down,
            grant_announce: raw.grant_announce,
            return_to_seat: raw.return_to_seat,
            yield_final: raw.yield_final,
        };
        ladder.check_verbal_reservation()?;
        Ok(ladder)
    }

    /// Notice cues must never speak a line reserved for a final cue.
    fn check_verbal_reservation(&self) -> Result<(), LadderError> {
        let finals: BTreeSet<&str> = self
            .kinds
            .values()
            .filter_map(|k| k.final_cue.as_ref())
            .chain([&self.yield_final])
            .filter_map(|t| t.utterance.as_deref())
            .collect();
        for (kind, kl) in &self.kinds {
            for (i, t) in kl.notice.iter().enumerate() {
                if let Some(u) = t.utterance.as_deref().filter(|u| finals.contains(u)) {
                    return Err(LadderError::VerbalLeak {
                        kind: *kind,
                        level: i as Level + 1,
                        utterance: u.to_owned(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self, kind: SignalKind) -> &KindLadder {
        &self.kinds[&kind]
    }

    pub fn general_route(&self, kind: SignalKind) -> GeneralRoute {
        self.kind(kind).general_route
    }

    /// Builds the cue addressed by `key`, filling in the gaze target.
    pub fn cue_for(&self, key: CueKey) -> Result<CueCommand, LadderError> {
        let undefined = || LadderError::UndefinedCue(format!("{key:?}"));
        let (intent, level, template, gaze) = match key {
            CueKey::Notice(kind, level) => {
                if !(1..=MAX_LEVEL).contains(&level) {
                    return Err(undefined());
                }
                let t = &self.kind(kind).notice[usize::from(level - 1)];
                (CueIntent::Kind(kind), CueLevel::Notice(level), t, kind_gaze(kind))
            }
            CueKey::Bid(kind, mood) => {
                let kl = self.kind(kind);
                let (t, gaze) = match mood {
                    Mood::SelfVolunteer => (kl.bid_self.as_ref(), Gaze::Speaker),
                    Mood::General => (kl.bid_general.as_ref(), Gaze::Audience),
                };
                (CueIntent::Kind(kind), CueLevel::Bid, t.ok_or_else(undefined)?, gaze)
            }
            CueKey::Final(kind) => {
                let t = self.kind(kind).final_cue.as_ref().ok_or_else(undefined)?;
                (CueIntent::Kind(kind), CueLevel::Final, t, kind_gaze(kind))
            }
            CueKey::YieldFinal => (
                CueIntent::YieldIntervention,
                CueLevel::Final,
                &self.yield_final,
                Gaze::Speaker,
            ),
            CueKey::GrantAnnounce => (
                CueIntent::GrantAnnounce,
                CueLevel::Final,
                &self.grant_announce,
                Gaze::Audience,
            ),
            CueKey::ReturnToSeat => (
                CueIntent::GrantAnnounce,
                CueLevel::Final,
                &self.return_to_seat,
                Gaze::Grantee,
            ),
            CueKey::StandDown => (
                CueIntent::StandDown,
                CueLevel::Notice(0),
                &self.stand_down,
                Gaze::Speaker,
            ),
        };
        Ok(CueCommand {
            intent,
            level,
            gestures: template.gestures.clone(),
            utterance: template.utterance.clone(),
            gaze,
        })
    }

    /// Every gesture token the ladder can emit, sorted.
    pub fn vocabulary(&self) -> BTreeSet<&str> {
        let mut all: Vec<&CueTemplate> = vec![
            &self.stand_down,
            &self.grant_announce,
            &self.return_to_seat,
            &self.yield_final,
        ];
        for kl in self.kinds.values() {
            all.extend(kl.notice.iter());
            all.extend(kl.bid_self.iter());
            all.extend(kl.bid_general.iter());
            all.extend(kl.final_cue.iter());
        }
        all.iter()
            .flat_map(|t| t.gestures.iter().map(String::as_str))
            .collect()
    }
}

fn kind_gaze(kind: SignalKind) -> Gaze {
    match kind.category() {
        Category::Audience => Gaze::Audience,
        _ => Gaze::Speaker,
    }
}
