#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use emoface::data::{build_vocab, dialogue_examples, encode_example, EncodeOptions, EncodedExample, Vocabulary};
use emoface::face::{FaceCheckpoint, FaceGan, FaceGanConfig};
use emoface::nlg::{train_nlg, NlgCheckpoint, NlgConfig, NlgModel, TeacherForcingSchedule, TrainOptions};
use emoface::pipeline::PipelineConfig;
use emoface::synth;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn shipped(rel: &str) -> PathBuf {
    repo_root().join(rel)
}

/// Vocabulary and encoded examples of every dialogue in the synthetic corpus.
pub fn synthetic_examples(opts: &EncodeOptions) -> (Vocabulary, Vec<EncodedExample>) {
    let dialogues = synth::synthetic_dialogues().unwrap();
    let vocab = build_vocab(&dialogues, 1).unwrap();
    let examples = dialogues
        .iter()
        .flat_map(|d| dialogue_examples(d, opts.context_turns))
        .map(|e| encode_example(&e, &vocab, opts))
        .collect();
    (vocab, examples)
}

/// A small dialogue model trained briefly on the synthetic corpus.
pub fn small_nlg(epochs: usize) -> NlgCheckpoint {
    let encode = EncodeOptions::default();
    let (vocab, examples) = synthetic_examples(&encode);
    let cfg = NlgConfig {
        vocab_size: vocab.len(),
        embedding_dim: 8,
        hidden_dim: 12,
        max_decode_len: 12,
        ..Default::default()
    };
    let mut model = NlgModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let opts = TrainOptions {
        epochs,
        batch_size: 16,
        lr: 1e-2,
        teacher_forcing: TeacherForcingSchedule::constant(1.0),
        seed: 1,
        ..Default::default()
    };
    train_nlg(&mut model, &examples, &opts, |_| {}).unwrap();
    NlgCheckpoint::new(model, vocab, encode, epochs, 1).unwrap()
}

/// An untrained 16px face generator.
pub fn small_face() -> FaceCheckpoint {
    let cfg = FaceGanConfig {
        image_size: 16,
        gen_channels: 2,
        res_blocks: 1,
        critic_channels: 2,
        critic_max_channels: 4,
        critic_layers: 2,
        ..Default::default()
    };
    FaceCheckpoint::from_gan(&FaceGan::new(cfg).unwrap())
}

/// Writes both checkpoints, a 16px face corpus and a service config under
/// `dir`, returning the config path.
pub fn write_service(dir: &Path) -> PathBuf {
    small_nlg(3).save(&dir.join("nlg")).unwrap();
    small_face().save(&dir.join("face")).unwrap();
    synth::write_faces(&dir.join("faces"), &synth::overfit_faces(16)).unwrap();
    let cfg = PipelineConfig::new("nlg".into(), "face".into(), "faces".into());
    let path = dir.join("serve.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}
