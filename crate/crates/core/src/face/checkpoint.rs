use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::FaceGanConfig;
use super::image::FaceImage;
use super::model::{Critic, Generator};
use super::train::{edit_face, FaceGan};
use crate::au::{AuVector, AU_NAMES};
use crate::error::{Error, IoContext, Result};
use crate::nn::{load_weights, save_weights, weights_hash};

const GENERATOR: &str = "generator.bin";
const CRITIC: &str = "critic.bin";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceManifest {
    pub config: FaceGanConfig,
    pub au_names: Vec<String>,
    pub image_size: usize,
    pub seed: u64,
    pub steps: usize,
    pub generator_sha256: String,
    pub critic_sha256: String,
}

/// Trained generator and critic weights.
#[derive(Debug, Clone)]
pub struct FaceCheckpoint {
    pub generator: Generator,
    pub critic: Critic,
    pub manifest: FaceManifest,
}

impl FaceCheckpoint {
    pub fn from_gan(gan: &FaceGan) -> Self {
        FaceCheckpoint {
            generator: gan.generator.clone(),
            critic: gan.critic.clone(),
            manifest: FaceManifest {
                config: gan.config.clone(),
                au_names: AU_NAMES.iter().take(gan.config.au_dim).map(|s| s.to_string()).collect(),
                image_size: gan.config.image_size,
                seed: gan.config.seed,
                steps: gan.steps_done(),
                generator_sha256: String::new(),
                critic_sha256: String::new(),
            },
        }
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).at(dir)?;
        save_weights(&self.generator, &dir.join(GENERATOR))?;
        save_weights(&self.critic, &dir.join(CRITIC))?;
        self.manifest.generator_sha256 = weights_hash(&dir.join(GENERATOR))?;
        self.manifest.critic_sha256 = weights_hash(&dir.join(CRITIC))?;
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_vec_pretty(&self.manifest)?).at(&path)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let manifest: FaceManifest = serde_json::from_slice(&std::fs::read(&path).at(&path)?)?;
        manifest.config.validate()?;
        for (file, expected) in [(GENERATOR, &manifest.generator_sha256), (CRITIC, &manifest.critic_sha256)] {
            if &weights_hash(&dir.join(file))? != expected {
                return Err(Error::Config(format!("{}: {file} does not match manifest", dir.display())));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut generator = Generator::new(&manifest.config, &mut rng);
        let mut critic = Critic::new(&manifest.config, &mut rng);
        load_weights(&mut generator, &dir.join(GENERATOR))?;
        load_weights(&mut critic, &dir.join(CRITIC))?;
        Ok(FaceCheckpoint {
            generator,
            critic,
            manifest,
        })
    }

    pub fn image_size(&self) -> usize {
        self.manifest.image_size
    }

    pub fn edit(&self, image: &FaceImage, z: &AuVector) -> Result<FaceImage> {
        if image.size() != self.image_size() {
            return Err(Error::Shape(format!(
                "image is {}px, checkpoint expects {}px",
                image.size(),
                self.image_size()
            )));
        }
        edit_face(&self.generator, image, z)
    }
}
