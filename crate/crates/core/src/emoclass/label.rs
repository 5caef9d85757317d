use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The six emotion categories, in canonical (serialization) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
}

pub const NUM_EMOTIONS: usize = 6;

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Stable id used in every file and on the wire.
    pub fn id(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Surprise => "surprise",
        }
    }

    /// Accepts canonical ids plus the `worry` alias for fear.
    pub fn from_id(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "anger" => Some(EmotionLabel::Anger),
            "disgust" => Some(EmotionLabel::Disgust),
            "fear" | "worry" => Some(EmotionLabel::Fear),
            "happiness" => Some(EmotionLabel::Happiness),
            "sadness" => Some(EmotionLabel::Sadness),
            "surprise" => Some(EmotionLabel::Surprise),
            _ => None,
        }
    }

    /// Label shown in reports; fear is displayed as "worry".
    pub fn display_name(self) -> &'static str {
        match self {
            EmotionLabel::Fear => "worry",
            other => other.id(),
        }
    }

    /// Short label description. Kept for documentation; the hashed-feature
    /// classifiers do not condition on it.
    pub fn description(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "Anger: a strong hostile feeling toward something perceived as a wrong or a threat.",
            EmotionLabel::Disgust => "Disgust: revulsion or strong disapproval aroused by something offensive.",
            EmotionLabel::Fear => "Fear (worry): unease or anxiety about a possible danger or uncertain outcome.",
            EmotionLabel::Happiness => "Happiness: a state of contentment, joy or relief.",
            EmotionLabel::Sadness => "Sadness: sorrow or unhappiness, often about loss.",
            EmotionLabel::Surprise => "Surprise: a brief reaction to something unexpected.",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::from_id(s).ok_or_else(|| Error::InvalidLabel(format!("unknown emotion id `{s}`")))
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_id(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown emotion id `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_stable() {
        let ids: Vec<_> = EmotionLabel::ALL.iter().map(|e| e.id()).collect();
        assert_eq!(ids, ["anger", "disgust", "fear", "happiness", "sadness", "surprise"]);
        for (i, e) in EmotionLabel::ALL.iter().enumerate() {
            assert_eq!(e.index(), i);
            assert_eq!(EmotionLabel::from_index(i), Some(*e));
        }
    }

    #[test]
    fn worry_alias_round_trips() {
        let e: EmotionLabel = serde_json::from_str("\"worry\"").unwrap();
        assert_eq!(e, EmotionLabel::Fear);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, "\"fear\"");
        let back: EmotionLabel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        assert_eq!(e.display_name(), "worry");
    }

    #[test]
    fn unknown_id_rejected() {
        assert!("rage".parse::<EmotionLabel>().is_err());
        assert!(serde_json::from_str::<EmotionLabel>("\"rage\"").is_err());
    }
}
