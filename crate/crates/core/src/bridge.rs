//! Emotion label to Action Unit target lookup.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::au::{au_index, AuVector, AU_COUNT, AU_NAMES};
use crate::data::EmotionLabel;
use crate::error::{Error, IoContext, Result};

/// Prototypical active units per emotion, all at full activation.
const DEFAULT_ROWS: [(EmotionLabel, &[&str]); 8] = [
    (EmotionLabel::Anger, &["AU04", "AU05", "AU07", "AU23"]),
    (EmotionLabel::Disgust, &["AU09", "AU15"]),
    (EmotionLabel::Fear, &["AU01", "AU02", "AU04", "AU05", "AU07", "AU20", "AU26"]),
    (EmotionLabel::Happiness, &["AU06", "AU12"]),
    (EmotionLabel::Sadness, &["AU01", "AU04", "AU15"]),
    (EmotionLabel::Surprise, &["AU01", "AU02", "AU05", "AU26"]),
    (EmotionLabel::Neutral, &[]),
    (EmotionLabel::NonNeutral, &[]),
];

/// Unvalidated table as read from `au_table.json`: emotion name to
/// `{AU name: activation}`. Omitted units are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuMappingTable(pub BTreeMap<String, BTreeMap<String, f64>>);

impl AuMappingTable {
    pub fn default_table() -> Self {
        AuMappingTable(
            DEFAULT_ROWS
                .iter()
                .map(|(e, aus)| (e.as_str().to_string(), aus.iter().map(|a| (a.to_string(), 1.0)).collect()))
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).at(path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingRow(EmotionLabel),
    UnknownEmotion(String),
    UnknownAu { row: String, au: String },
    OutOfRange { row: String, au: String, value: f64 },
    WrongLength { row: String, len: usize, expected: usize },
    NonZeroNeutral { au: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingRow(e) => write!(f, "missing row for {e}"),
            Violation::UnknownEmotion(e) => write!(f, "unknown emotion row {e:?}"),
            Violation::UnknownAu { row, au } => write!(f, "{row}: unknown action unit {au:?}"),
            Violation::OutOfRange { row, au, value } => write!(f, "{row}: {au} = {value} outside [0, 1]"),
            Violation::WrongLength { row, len, expected } => {
                write!(f, "{row}: vector has {len} entries, expected {expected}")
            }
            Violation::NonZeroNeutral { au, value } => write!(f, "neutral: {au} = {value}, must be 0"),
        }
    }
}

/// Every problem with `table`, in a stable order. Empty means valid.
pub fn validate_table(table: &AuMappingTable) -> Vec<Violation> {
    let mut out = Vec::new();
    for e in EmotionLabel::ALL {
        if !table.0.contains_key(e.as_str()) {
            out.push(Violation::MissingRow(e));
        }
    }
    for (row, aus) in &table.0 {
        let emotion = row.parse::<EmotionLabel>().ok();
        if emotion.is_none() {
            out.push(Violation::UnknownEmotion(row.clone()));
        }
        let known = aus.keys().filter(|k| au_index(k).is_some()).count();
        if known > AU_COUNT {
            out.push(Violation::WrongLength {
                row: row.clone(),
                len: known,
                expected: AU_COUNT,
            });
        }
        for (au, &value) in aus {
            if au_index(au).is_none() {
                out.push(Violation::UnknownAu {
                    row: row.clone(),
                    au: au.clone(),
                });
            } else if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                out.push(Violation::OutOfRange {
                    row: row.clone(),
                    au: au.clone(),
                    value,
                });
            } else if emotion == Some(EmotionLabel::Neutral) && value != 0.0 {
                out.push(Violation::NonZeroNeutral { au: au.clone(), value });
            }
        }
    }
    out
}

/// A validated table with one vector per emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct AuBridge {
    rows: [AuVector; EmotionLabel::COUNT],
}

impl Default for AuBridge {
    fn default() -> Self {
        Self::new(&AuMappingTable::default_table()).expect("default table is valid")
    }
}

impl AuBridge {
    pub fn new(table: &AuMappingTable) -> Result<Self> {
        let violations = validate_table(table);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Validation(format!("AU table: {}", list.join("; "))));
        }
        let rows = EmotionLabel::ALL.map(|e| {
            let mut v = vec![0.0; AU_COUNT];
            for (au, &value) in &table.0[e.as_str()] {
                v[au_index(au).expect("validated")] = value;
            }
            AuVector::new(v).expect("validated")
        });
        Ok(AuBridge { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(&AuMappingTable::load(path)?)
    }

    /// Target activations for `emotion`. The result is an independent copy.
    pub fn map_emotion_to_au(&self, emotion: EmotionLabel) -> AuVector {
        self.rows[emotion.index()].clone()
    }

    pub fn to_table(&self) -> AuMappingTable {
        AuMappingTable(
            EmotionLabel::ALL
                .iter()
                .map(|e| {
                    let row = AU_NAMES
                        .iter()
                        .zip(self.rows[e.index()].values())
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(n, &v)| (n.to_string(), v))
                        .collect();
                    (e.as_str().to_string(), row)
                })
                .collect(),
        )
    }
}

/// Free-function form of [`AuBridge::map_emotion_to_au`].
pub fn map_emotion_to_au(emotion: EmotionLabel, bridge: &AuBridge) -> AuVector {
    bridge.map_emotion_to_au(emotion)
}
