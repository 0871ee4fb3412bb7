use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GenerateOptions, NlgConfig, NlgModel, NlgPrediction};
use crate::data::{encode_context, EncodeOptions, Vocabulary};
use crate::error::{Error, IoContext, Result};
use crate::nn::{load_weights, save_weights, weights_hash};

const WEIGHTS: &str = "weights.bin";
const MANIFEST: &str = "manifest.json";
const VOCAB: &str = "vocab.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlgManifest {
    pub config: NlgConfig,
    pub encode: EncodeOptions,
    pub vocab_hash: String,
    pub epoch: usize,
    pub seed: u64,
    pub weights_sha256: String,
}

/// A trained model together with the vocabulary it was trained on.
#[derive(Debug, Clone)]
pub struct NlgCheckpoint {
    pub model: NlgModel,
    pub vocab: Vocabulary,
    pub manifest: NlgManifest,
}

impl NlgCheckpoint {
    pub fn new(model: NlgModel, vocab: Vocabulary, encode: EncodeOptions, epoch: usize, seed: u64) -> Result<Self> {
        if model.vocab_size() != vocab.len() {
            return Err(Error::Config(format!(
                "model has {} output tokens but the vocabulary has {}",
                model.vocab_size(),
                vocab.len()
            )));
        }
        let manifest = NlgManifest {
            config: model.config.clone(),
            encode,
            vocab_hash: vocab.hash(),
            epoch,
            seed,
            weights_sha256: String::new(),
        };
        Ok(NlgCheckpoint { model, vocab, manifest })
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).at(dir)?;
        let weights = dir.join(WEIGHTS);
        save_weights(&self.model, &weights)?;
        self.manifest.weights_sha256 = weights_hash(&weights)?;
        self.vocab.save(&dir.join(VOCAB))?;
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_vec_pretty(&self.manifest)?).at(&path)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let manifest: NlgManifest = serde_json::from_slice(&std::fs::read(&path).at(&path)?)?;
        let vocab = Vocabulary::load(&dir.join(VOCAB))?;
        if vocab.hash() != manifest.vocab_hash {
            return Err(Error::Config(format!("{}: vocabulary does not match the checkpoint", dir.display())));
        }
        if vocab.len() != manifest.config.vocab_size {
            return Err(Error::Config(format!("{}: vocabulary size differs from model config", dir.display())));
        }
        let weights = dir.join(WEIGHTS);
        if weights_hash(&weights)? != manifest.weights_sha256 {
            return Err(Error::Config(format!("{}: weights hash does not match manifest", dir.display())));
        }
        let mut model = NlgModel::new(manifest.config.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        load_weights(&mut model, &weights)?;
        Ok(NlgCheckpoint { model, vocab, manifest })
    }

    /// Encodes the most recent turns (each a token list) and generates.
    pub fn respond(&self, turns: &[Vec<String>], opts: GenerateOptions) -> Result<NlgPrediction> {
        let ids = encode_context(&self.vocab, turns.iter().map(Vec::as_slice), &self.manifest.encode);
        self.model.generate(&ids, opts)
    }
}
