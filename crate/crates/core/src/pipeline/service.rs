use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BaseFacePolicy, PipelineConfig};
use super::session::{Session, SessionStore};
use crate::au::{AuVector, AU_COUNT};
use crate::bridge::AuBridge;
use crate::data::{load_face_corpus_with, DialogueTurn, EmotionLabel, Expression, EOS};
use crate::error::{Error, Result};
use crate::face::{FaceCheckpoint, FaceImage};
use crate::nlg::{GenerateOptions, NlgCheckpoint};

/// A neutral face the agent can wear.
#[derive(Debug, Clone)]
pub struct BaseFace {
    pub face_id: String,
    pub model_id: String,
    pub image: FaceImage,
}

/// What to steer a face towards: an emotion (through the bridge) or an
/// explicit activation vector.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceTarget {
    Emotion(EmotionLabel),
    Au(AuVector),
}

impl FromStr for FaceTarget {
    type Err = Error;

    /// A JSON object such as `{"AU12": 0.8}` or an emotion name.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let map: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(s).map_err(|e| Error::Validation(format!("AU vector: {e}")))?;
            Ok(FaceTarget::Au(AuVector::from_named(&map)?))
        } else {
            Ok(FaceTarget::Emotion(s.parse()?))
        }
    }
}

/// Milliseconds spent in each stage of a reply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub nlg: f64,
    pub bridge: f64,
    pub face: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub text: String,
    pub emotion: EmotionLabel,
    /// Always the bridge lookup of `emotion`.
    pub au_target: AuVector,
    pub face: FaceImage,
    pub latency_ms: StageLatency,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub seed: Option<u64>,
    pub base_face: BaseFacePolicy,
    pub max_reply_len: Option<usize>,
}

/// Text generation, the emotion bridge and face synthesis behind one
/// session-aware interface. Parameters are immutable; only the session map
/// and the service RNG are shared mutable state.
#[derive(Debug)]
pub struct Pipeline {
    nlg: NlgCheckpoint,
    face: FaceCheckpoint,
    bridge: AuBridge,
    faces: Vec<BaseFace>,
    sessions: SessionStore,
    rng: Mutex<ChaCha8Rng>,
    policy: BaseFacePolicy,
    generate: GenerateOptions,
}

impl Pipeline {
    pub fn new(
        nlg: NlgCheckpoint,
        face: FaceCheckpoint,
        bridge: AuBridge,
        faces: Vec<BaseFace>,
        sessions: SessionStore,
        options: PipelineOptions,
    ) -> Result<Self> {
        if face.manifest.config.au_dim != AU_COUNT {
            return Err(Error::Config(format!(
                "face checkpoint is conditioned on {} units, the bridge produces {AU_COUNT}",
                face.manifest.config.au_dim
            )));
        }
        if faces.is_empty() {
            return Err(Error::Config("no neutral base faces available".into()));
        }
        if let Some(f) = faces.iter().find(|f| f.image.size() != face.image_size()) {
            return Err(Error::Config(format!(
                "base face {} is {}px but the face checkpoint expects {}px",
                f.face_id,
                f.image.size(),
                face.image_size()
            )));
        }
        let seed = options.seed.unwrap_or_else(|| rand::rng().random());
        let generate = GenerateOptions {
            max_len: options.max_reply_len.unwrap_or(nlg.model.config.max_decode_len),
            min_len: 1,
        };
        Ok(Pipeline {
            nlg,
            face,
            bridge,
            faces,
            sessions,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            policy: options.base_face,
            generate,
        })
    }

    /// Loads checkpoints, the AU table and the neutral faces named by `cfg`.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        let nlg = NlgCheckpoint::load(&cfg.nlg_checkpoint)?;
        let face = FaceCheckpoint::load(&cfg.face_checkpoint)?;
        let bridge = match &cfg.au_table {
            Some(p) => AuBridge::load(p)?,
            None => AuBridge::default(),
        };
        let faces = load_base_faces(&cfg.faces_dir, &cfg.face_filter)?;
        let sessions = match &cfg.sessions_dir {
            Some(dir) => SessionStore::persistent(dir, |id| {
                faces
                    .iter()
                    .find(|f| f.face_id == id)
                    .map(|f| f.image.clone())
                    .ok_or_else(|| Error::NotFound(format!("logged base face {id:?}")))
            })?,
            None => SessionStore::in_memory(),
        };
        let options = PipelineOptions {
            seed: cfg.seed,
            base_face: cfg.base_face,
            max_reply_len: cfg.max_reply_len,
        };
        Self::new(nlg, face, bridge, faces, sessions, options)
    }

    pub fn nlg(&self) -> &NlgCheckpoint {
        &self.nlg
    }

    pub fn face_checkpoint(&self) -> &FaceCheckpoint {
        &self.face
    }

    pub fn bridge(&self) -> &AuBridge {
        &self.bridge
    }

    pub fn base_faces(&self) -> &[BaseFace] {
        &self.faces
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn generate_options(&self) -> GenerateOptions {
        self.generate
    }

    /// Starts a session wearing `face_id`, or a uniformly drawn neutral
    /// face for `None` / `"random"`.
    pub fn create_session(&self, face_id: Option<&str>) -> Result<Session> {
        let (face, session_id) = {
            let mut rng = self.rng.lock().expect("service rng poisoned");
            let face = match face_id {
                None | Some("random") => &self.faces[rng.random_range(0..self.faces.len())],
                Some(id) => self
                    .faces
                    .iter()
                    .find(|f| f.face_id == id)
                    .ok_or_else(|| Error::NotFound(format!("face {id:?}")))?,
            };
            (face, format!("{:016x}{:016x}", rng.random::<u64>(), rng.random::<u64>()))
        };
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let session = Session::new(session_id, face.face_id.clone(), face.image.clone(), created_at);
        self.sessions.insert(session.clone())?;
        Ok(session)
    }

    /// Generates the agent's next turn after `user_text`. The user turn is
    /// recorded as neutral; `emotion_override` replaces the predicted
    /// emotion for the face and the returned label, not the text.
    pub fn respond(&self, session_id: &str, user_text: &str, emotion_override: Option<EmotionLabel>) -> Result<Reply> {
        let handle = self.sessions.get(session_id)?;
        let mut session = handle.lock().expect("session poisoned");
        let user = DialogueTurn::new("user", user_text, EmotionLabel::Neutral)
            .map_err(|_| Error::Validation("message contains no words".into()))?;

        let start = Instant::now();
        let mut turns: Vec<Vec<String>> = session.history.iter().map(|t| t.tokens.clone()).collect();
        turns.push(user.tokens.clone());
        let prediction = self.nlg.respond(&turns, self.generate)?;
        let tokens: Vec<String> = prediction
            .tokens
            .iter()
            .filter(|&&id| id != EOS)
            .filter_map(|&id| self.nlg.vocab.token(id).map(str::to_string))
            .collect();
        let text = self.nlg.vocab.decode(&prediction.tokens);
        let t_nlg = start.elapsed();

        let emotion = emotion_override.unwrap_or(prediction.emotion);
        let au_target = self.bridge.map_emotion_to_au(emotion);
        let t_bridge = start.elapsed();

        let base = match self.policy {
            BaseFacePolicy::Neutral => &session.base_face,
            BaseFacePolicy::Previous => session.last_face.as_ref().unwrap_or(&session.base_face),
        };
        let face = self.face.edit(base, &au_target)?;
        let t_face = start.elapsed();

        let agent = DialogueTurn {
            speaker_id: "agent".into(),
            text: text.clone(),
            tokens,
            emotion,
        };
        self.sessions.append_turns(&mut session, vec![user, agent])?;
        session.last_face = Some(face.clone());

        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        Ok(Reply {
            text,
            emotion,
            au_target,
            face,
            latency_ms: StageLatency {
                nlg: ms(t_nlg),
                bridge: ms(t_bridge - t_nlg),
                face: ms(t_face - t_bridge),
                total: ms(start.elapsed()),
            },
        })
    }

    /// Edits `base` towards an emotion or an explicit activation vector.
    pub fn synthesize_face(&self, base: &FaceImage, target: &FaceTarget) -> Result<(AuVector, FaceImage)> {
        synthesize_face(&self.face, &self.bridge, base, target)
    }
}

pub fn synthesize_face(
    face: &FaceCheckpoint,
    bridge: &AuBridge,
    base: &FaceImage,
    target: &FaceTarget,
) -> Result<(AuVector, FaceImage)> {
    let z = match target {
        FaceTarget::Emotion(e) => bridge.map_emotion_to_au(*e),
        FaceTarget::Au(z) => {
            let z = AuVector::new(z.values().to_vec())?;
            z.expect_len(AU_COUNT).map_err(|e| Error::Validation(e.to_string()))?;
            z
        }
    };
    let image = face.edit(base, &z)?;
    Ok((z, image))
}

/// Neutral faces of the corpus in `dir` (its `index.csv` and `au.csv`).
pub fn load_base_faces(dir: &std::path::Path, filter: &crate::data::FaceFilter) -> Result<Vec<BaseFace>> {
    let records = load_face_corpus_with(&dir.join("index.csv"), &dir.join("au.csv"), filter)?;
    records
        .into_iter()
        .filter(|r| r.expression == Expression::Neutral)
        .map(|r| {
            Ok(BaseFace {
                face_id: r.face_id().to_string(),
                model_id: r.model_id.clone(),
                image: FaceImage::load_png(&dir.join(&r.image_path))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_parse_from_names_and_json() {
        assert_eq!("happiness".parse::<FaceTarget>().unwrap(), FaceTarget::Emotion(EmotionLabel::Happiness));
        match r#"{"AU06": 1, "AU12": 0.5}"#.parse::<FaceTarget>().unwrap() {
            FaceTarget::Au(z) => {
                assert_eq!(z.get("AU12"), Some(0.5));
                assert_eq!(z.len(), AU_COUNT);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(r#"{"AU12": 1.5}"#.parse::<FaceTarget>(), Err(Error::Validation(_))));
        assert!(matches!("joy".parse::<FaceTarget>(), Err(Error::Label { .. })));
    }
}
