use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::labels::EmotionLabel;
use super::vocab::tokenize;
use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueTurn {
    pub speaker_id: String,
    pub text: String,
    /// Normalized token sequence; never empty.
    pub tokens: Vec<String>,
    pub emotion: EmotionLabel,
}

impl DialogueTurn {
    pub fn new(speaker_id: &str, text: &str, emotion: EmotionLabel) -> Result<Self> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Data(format!("turn by {speaker_id:?} has no tokens")));
        }
        Ok(DialogueTurn {
            speaker_id: speaker_id.to_string(),
            text: text.to_string(),
            tokens,
            emotion,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<DialogueTurn>,
}

#[derive(Serialize, Deserialize)]
struct TurnRecord {
    speaker: String,
    text: String,
    emotion: String,
}

#[derive(Serialize, Deserialize)]
struct DialogueRecord {
    dialogue_id: String,
    turns: Vec<TurnRecord>,
}

/// Reads a JSONL dialogue corpus, one dialogue per line. Blank lines are
/// skipped.
pub fn load_dialogues(path: &Path) -> Result<Vec<Dialogue>> {
    let file = std::fs::File::open(path).at(path)?;
    let mut dialogues = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: line_no,
            message,
        };
        let record: DialogueRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let mut turns = Vec::with_capacity(record.turns.len());
        for t in record.turns {
            let emotion: EmotionLabel = t.emotion.parse().map_err(|_| Error::Label {
                value: t.emotion.clone(),
                line: Some(line_no),
            })?;
            let turn = DialogueTurn::new(&t.speaker, &t.text, emotion).map_err(|e| parse_err(e.to_string()))?;
            turns.push(turn);
        }
        dialogues.push(Dialogue {
            dialogue_id: record.dialogue_id,
            turns,
        });
    }
    Ok(dialogues)
}

pub fn write_dialogues(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).at(path)?);
    for d in dialogues {
        let record = DialogueRecord {
            dialogue_id: d.dialogue_id.clone(),
            turns: d
                .turns
                .iter()
                .map(|t| TurnRecord {
                    speaker: t.speaker_id.clone(),
                    text: t.text.clone(),
                    emotion: t.emotion.as_str().to_string(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").at(path)?;
    }
    out.flush().at(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> std::path::PathBuf {
        let p = dir.join("d.jsonl");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn counts_are_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"dialogue_id":"1","turns":[{"speaker":"a","text":"Hi!","emotion":"neutral"},{"speaker":"b","text":"Yay","emotion":"happiness"}]}"#,
        );
        let d = load_dialogues(&p).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].turns.len(), 2);
        assert_eq!(d[0].turns[0].tokens, ["hi", "!"]);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "{\"dialogue_id\":\"1\",\"turns\":[]}\n{oops\n");
        match load_dialogues(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_emotion_is_label_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"dialogue_id":"1","turns":[{"speaker":"a","text":"hi","emotion":"joy"}]}"#,
        );
        assert!(matches!(load_dialogues(&p), Err(Error::Label { line: Some(1), .. })));
    }

    #[test]
    fn empty_text_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"dialogue_id":"1","turns":[{"speaker":"a","text":"   ","emotion":"fear"}]}"#,
        );
        assert!(matches!(load_dialogues(&p), Err(Error::Parse { line: 1, .. })));
    }
}
