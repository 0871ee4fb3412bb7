use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::FaceFilter;
use crate::error::{Error, IoContext, Result};

/// Environment variable that fixes every random choice the service makes.
pub const SEED_ENV: &str = "EMOFACE_SEED";

/// Which face the generator edits on each agent turn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFacePolicy {
    /// Always edit the session's neutral face.
    #[default]
    Neutral,
    /// Edit the face shown on the previous agent turn.
    Previous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub nlg_checkpoint: PathBuf,
    pub face_checkpoint: PathBuf,
    /// Directory holding `index.csv`, `au.csv` and the images.
    pub faces_dir: PathBuf,
    /// Emotion to AU table; the built-in table when absent.
    #[serde(default)]
    pub au_table: Option<PathBuf>,
    #[serde(default)]
    pub face_filter: FaceFilter,
    /// `None` seeds from the OS unless the seed variable is set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub base_face: BaseFacePolicy,
    /// Append-only per-session JSONL logs, restored on startup.
    #[serde(default)]
    pub sessions_dir: Option<PathBuf>,
    /// Reply length cap; the checkpoint's decode limit when absent.
    #[serde(default)]
    pub max_reply_len: Option<usize>,
}

impl PipelineConfig {
    pub fn new(nlg_checkpoint: PathBuf, face_checkpoint: PathBuf, faces_dir: PathBuf) -> Self {
        PipelineConfig {
            nlg_checkpoint,
            face_checkpoint,
            faces_dir,
            au_table: None,
            face_filter: FaceFilter::default(),
            seed: None,
            base_face: BaseFacePolicy::default(),
            sessions_dir: None,
            max_reply_len: None,
        }
    }

    /// Reads a JSON config; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_slice(&std::fs::read(path).at(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.nlg_checkpoint);
        fix(&mut cfg.face_checkpoint);
        fix(&mut cfg.faces_dir);
        cfg.au_table.as_mut().map(fix);
        cfg.sessions_dir.as_mut().map(fix);
        Ok(cfg)
    }

    /// Overrides `seed` from the environment when the variable is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
            self.seed = Some(seed);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("serve.json");
        std::fs::write(
            &path,
            r#"{"nlg_checkpoint":"nlg","face_checkpoint":"/abs/face","faces_dir":"faces","seed":3}"#,
        )
        .unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.nlg_checkpoint, dir.path().join("nlg"));
        assert_eq!(cfg.face_checkpoint, PathBuf::from("/abs/face"));
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.base_face, BaseFacePolicy::Neutral);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("serve.json");
        std::fs::write(&path, r#"{"nlg_checkpoint":"a","face_checkpoint":"b","faces_dir":"c","port":1}"#).unwrap();
        assert!(PipelineConfig::load(&path).is_err());
    }
}
