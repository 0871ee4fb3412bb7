use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::data::{DialogueTurn, EmotionLabel};
use crate::error::{Error, IoContext, Result};
use crate::face::FaceImage;

/// One conversation between a user and the agent.
#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    /// Alternating user and agent turns, oldest first. Only ever appended to.
    pub history: Vec<DialogueTurn>,
    pub base_face_id: String,
    /// Neutral face of the agent's identity.
    pub base_face: FaceImage,
    /// Unix seconds.
    pub created_at: u64,
    pub(crate) last_face: Option<FaceImage>,
}

impl Session {
    pub fn new(session_id: String, base_face_id: String, base_face: FaceImage, created_at: u64) -> Self {
        Session {
            session_id,
            history: Vec::new(),
            base_face_id,
            base_face,
            created_at,
            last_face: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogRecord {
    Session {
        session_id: String,
        base_face_id: String,
        created_at: u64,
    },
    Turn {
        speaker: String,
        text: String,
        tokens: Vec<String>,
        emotion: EmotionLabel,
    },
}

impl LogRecord {
    fn turn(t: &DialogueTurn) -> Self {
        LogRecord::Turn {
            speaker: t.speaker_id.clone(),
            text: t.text.clone(),
            tokens: t.tokens.clone(),
            emotion: t.emotion,
        }
    }
}

/// In-memory sessions, each behind its own lock, optionally mirrored to
/// one JSONL file per session.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Persists to `dir`, reloading sessions already logged there.
    /// `base_face` resolves a logged face id to its image.
    pub fn persistent(dir: &Path, base_face: impl Fn(&str) -> Result<FaceImage>) -> Result<Self> {
        std::fs::create_dir_all(dir).at(dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .at(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let session = replay(&path, &base_face)?;
            sessions.insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
        }
        Ok(SessionStore {
            sessions: RwLock::new(sessions),
            dir: Some(dir.to_path_buf()),
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, session: Session) -> Result<()> {
        if let Some(dir) = &self.dir {
            let header = LogRecord::Session {
                session_id: session.session_id.clone(),
                base_face_id: session.base_face_id.clone(),
                created_at: session.created_at,
            };
            append(&log_path(dir, &session.session_id), &[header])?;
        }
        let mut map = self.sessions.write().expect("session map poisoned");
        map.insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(())
    }

    pub fn get(&self, session_id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session {session_id:?}")))
    }

    /// Appends turns to a session the caller has locked, log first.
    pub(crate) fn append_turns(&self, session: &mut Session, turns: Vec<DialogueTurn>) -> Result<()> {
        if let Some(dir) = &self.dir {
            let records: Vec<LogRecord> = turns.iter().map(LogRecord::turn).collect();
            append(&log_path(dir, &session.session_id), &records)?;
        }
        session.history.extend(turns);
        Ok(())
    }
}

fn log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.jsonl"))
}

fn append(path: &Path, records: &[LogRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path).at(path)?;
    file.write_all(&buf).at(path)
}

fn replay(path: &Path, base_face: &impl Fn(&str) -> Result<FaceImage>) -> Result<Session> {
    let file = std::fs::File::open(path).at(path)?;
    let mut session: Option<Session> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        match serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))? {
            LogRecord::Session {
                session_id,
                base_face_id,
                created_at,
            } if session.is_none() => {
                let face = base_face(&base_face_id)?;
                session = Some(Session::new(session_id, base_face_id, face, created_at));
            }
            LogRecord::Turn {
                speaker,
                text,
                tokens,
                emotion,
            } => {
                let s = session.as_mut().ok_or_else(|| parse_err("turn before session header".into()))?;
                s.history.push(DialogueTurn {
                    speaker_id: speaker,
                    text,
                    tokens,
                    emotion,
                });
            }
            LogRecord::Session { .. } => return Err(parse_err("second session header".into())),
        }
    }
    session.ok_or_else(|| Error::Data(format!("{}: empty session log", path.display())))
}
