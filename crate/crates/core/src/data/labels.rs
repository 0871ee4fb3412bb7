use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Utterance-level emotion of the dialogue corpus.
///
/// The integer encoding (`index`) follows declaration order and is stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionLabel {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
    Neutral,
    NonNeutral,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 8] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
        EmotionLabel::Neutral,
        EmotionLabel::NonNeutral,
    ];

    pub const COUNT: usize = 8;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::NonNeutral => "non_neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let label = match s.trim().to_ascii_lowercase().as_str() {
            "anger" => EmotionLabel::Anger,
            "disgust" => EmotionLabel::Disgust,
            "fear" => EmotionLabel::Fear,
            "happiness" => EmotionLabel::Happiness,
            "sadness" => EmotionLabel::Sadness,
            "surprise" => EmotionLabel::Surprise,
            "neutral" => EmotionLabel::Neutral,
            "non_neutral" | "non-neutral" => EmotionLabel::NonNeutral,
            _ => {
                return Err(Error::Label {
                    value: s.to_string(),
                    line: None,
                })
            }
        };
        Ok(label)
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Posed expression class of the face corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expression {
    Sad,
    Neutral,
    Angry,
    Contemptuous,
    Disgusted,
    Surprised,
    Fearful,
    Happy,
}

impl Expression {
    pub const ALL: [Expression; 8] = [
        Expression::Sad,
        Expression::Neutral,
        Expression::Angry,
        Expression::Contemptuous,
        Expression::Disgusted,
        Expression::Surprised,
        Expression::Fearful,
        Expression::Happy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Expression::Sad => "sad",
            Expression::Neutral => "neutral",
            Expression::Angry => "angry",
            Expression::Contemptuous => "contemptuous",
            Expression::Disgusted => "disgusted",
            Expression::Surprised => "surprised",
            Expression::Fearful => "fearful",
            Expression::Happy => "happy",
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expression::ALL
            .into_iter()
            .find(|e| e.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Expression(s.to_string()))
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What a `non_neutral` dialogue label becomes on the face side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonNeutralPolicy {
    /// Annotators disagreed, so no specific expression is rendered.
    #[default]
    Neutral,
    Contemptuous,
    /// Turns labeled non-neutral have no face counterpart.
    Drop,
}

/// Face-side expression for a dialogue emotion, using the default
/// `non_neutral -> neutral` policy.
pub fn align_labels(emotion: EmotionLabel) -> Expression {
    align_labels_with(emotion, NonNeutralPolicy::Neutral).expect("neutral policy is total")
}

pub fn align_labels_with(emotion: EmotionLabel, policy: NonNeutralPolicy) -> Option<Expression> {
    Some(match emotion {
        EmotionLabel::Anger => Expression::Angry,
        EmotionLabel::Disgust => Expression::Disgusted,
        EmotionLabel::Fear => Expression::Fearful,
        EmotionLabel::Happiness => Expression::Happy,
        EmotionLabel::Sadness => Expression::Sad,
        EmotionLabel::Surprise => Expression::Surprised,
        EmotionLabel::Neutral => Expression::Neutral,
        EmotionLabel::NonNeutral => match policy {
            NonNeutralPolicy::Neutral => Expression::Neutral,
            NonNeutralPolicy::Contemptuous => Expression::Contemptuous,
            NonNeutralPolicy::Drop => return None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_follows_declaration_order() {
        for (i, e) in EmotionLabel::ALL.into_iter().enumerate() {
            assert_eq!(e.index(), i);
            assert_eq!(EmotionLabel::from_index(i), Some(e));
            assert_eq!(e.as_str().parse::<EmotionLabel>().unwrap(), e);
        }
        assert_eq!(EmotionLabel::from_index(8), None);
    }

    #[test]
    fn joy_is_not_a_label() {
        assert!(matches!("joy".parse::<EmotionLabel>(), Err(Error::Label { .. })));
    }

    #[test]
    fn alignment_table_is_exhaustive() {
        let expected = [
            (EmotionLabel::Anger, Expression::Angry),
            (EmotionLabel::Disgust, Expression::Disgusted),
            (EmotionLabel::Fear, Expression::Fearful),
            (EmotionLabel::Happiness, Expression::Happy),
            (EmotionLabel::Sadness, Expression::Sad),
            (EmotionLabel::Surprise, Expression::Surprised),
            (EmotionLabel::Neutral, Expression::Neutral),
            (EmotionLabel::NonNeutral, Expression::Neutral),
        ];
        for (e, x) in expected {
            assert_eq!(align_labels(e), x, "{e}");
        }
        // Contemptuous has no dialogue-side source under the default policy.
        assert!(EmotionLabel::ALL.iter().all(|&e| align_labels(e) != Expression::Contemptuous));
    }

    #[test]
    fn non_neutral_policies() {
        let nn = EmotionLabel::NonNeutral;
        assert_eq!(align_labels_with(nn, NonNeutralPolicy::Contemptuous), Some(Expression::Contemptuous));
        assert_eq!(align_labels_with(nn, NonNeutralPolicy::Drop), None);
        assert_eq!(align_labels_with(EmotionLabel::Fear, NonNeutralPolicy::Drop), Some(Expression::Fearful));
    }
}
