//! Action Unit activation vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intensity columns read from the AU CSV, in vector order.
pub const AU_NAMES: [&str; 17] = [
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU12", "AU14", "AU15", "AU17", "AU20", "AU23",
    "AU25", "AU26", "AU45",
];

pub const AU_COUNT: usize = AU_NAMES.len();

/// Upper end of the annotation tool's intensity scale.
pub const AU_INTENSITY_MAX: f64 = 5.0;

pub fn au_index(name: &str) -> Option<usize> {
    let name = name.trim().trim_end_matches("_r");
    AU_NAMES.iter().position(|&n| n == name)
}

/// Activations in `[0, 1]`, one per Action Unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuVector(Vec<f64>);

impl AuVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(v) {
                let name = AU_NAMES.get(i).copied().unwrap_or("AU?");
                return Err(Error::Validation(format!("{name} activation {v} outside [0, 1]")));
            }
        }
        Ok(AuVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        AuVector(vec![0.0; len])
    }

    /// From raw annotation intensities on the `[0, 5]` scale; values are
    /// divided by 5 and clipped to `[0, 1]`.
    pub fn from_intensities(raw: &[f64]) -> Result<Self> {
        raw.iter()
            .enumerate()
            .map(|(i, &v)| {
                if v.is_nan() {
                    Err(Error::Data(format!("NaN intensity for {}", AU_NAMES.get(i).copied().unwrap_or("AU?"))))
                } else {
                    Ok((v / AU_INTENSITY_MAX).clamp(0.0, 1.0))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(AuVector)
    }

    /// Parses `{"AU06": 1.0, ...}`; omitted units are zero.
    pub fn from_named(map: &serde_json::Map<String, serde_json::Value>) -> Result<Self> {
        let mut values = vec![0.0; AU_COUNT];
        for (k, v) in map {
            let i = au_index(k).ok_or_else(|| Error::Validation(format!("unknown action unit {k:?}")))?;
            values[i] = v
                .as_f64()
                .ok_or_else(|| Error::Validation(format!("{k} must be a number")))?;
        }
        Self::new(values)
    }

    pub fn to_named(&self) -> serde_json::Map<String, serde_json::Value> {
        AU_NAMES
            .iter()
            .zip(&self.0)
            .map(|(n, &v)| (n.to_string(), serde_json::Value::from(v)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        au_index(name).and_then(|i| self.0.get(i).copied())
    }

    /// Checks the configured dimension.
    pub fn expect_len(&self, len: usize) -> Result<()> {
        if self.0.len() == len {
            Ok(())
        } else {
            Err(Error::Shape(format!("AU vector has {} entries, expected {len}", self.0.len())))
        }
    }
}
