use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dialogue::load_dialogues;
use super::faces::{load_face_corpus_with, FaceFilter, FaceRecord};
use super::splits::{encode_example, make_splits, EncodeOptions, EncodedExample, SplitRatios};
use super::vocab::{build_vocab, Vocabulary};
use crate::error::{Error, IoContext, Result};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
const PARTS: [&str; 3] = ["train", "valid", "test"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub min_freq: usize,
    pub ratios: SplitRatios,
    pub encode: EncodeOptions,
    pub faces: FaceFilter,
    pub seed: u64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            min_freq: 2,
            ratios: SplitRatios::default(),
            encode: EncodeOptions::default(),
            faces: FaceFilter::frontal(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepManifest {
    pub config: PrepConfig,
    pub vocab_size: usize,
    pub vocab_hash: String,
    /// Directory the face `image_path`s are relative to.
    pub faces_root: PathBuf,
    /// `(examples, faces)` per split in train, valid, test order.
    pub counts: [(usize, usize); 3],
}

/// Reads the raw corpora, splits them and writes `vocab.txt`, one
/// `<split>.jsonl` of encoded examples and one `faces_<split>.json` per
/// split, plus `manifest.json`. The vocabulary comes from training
/// dialogues only.
pub fn prepare(
    dialogues_path: &Path,
    faces_dir: &Path,
    au_csv: &Path,
    out_dir: &Path,
    config: &PrepConfig,
) -> Result<PrepManifest> {
    let dialogues = load_dialogues(dialogues_path)?;
    let faces = load_face_corpus_with(&faces_dir.join("index.csv"), au_csv, &config.faces)?;
    let splits = make_splits(&dialogues, &faces, config.ratios, config.encode.context_turns, config.seed)?;

    let train_ids: HashSet<&str> = splits.train.dialogue_ids.iter().map(String::as_str).collect();
    let train_dialogues: Vec<_> = dialogues
        .iter()
        .filter(|d| train_ids.contains(d.dialogue_id.as_str()))
        .cloned()
        .collect();
    let vocab = build_vocab(&train_dialogues, config.min_freq)?;

    std::fs::create_dir_all(out_dir).at(out_dir)?;
    vocab.save(&out_dir.join(VOCAB_FILE))?;
    let mut counts = [(0, 0); 3];
    for (i, (name, part)) in splits.parts().into_iter().enumerate() {
        let encoded: Vec<EncodedExample> = part
            .examples
            .iter()
            .map(|e| encode_example(e, &vocab, &config.encode))
            .collect();
        write_examples(&out_dir.join(format!("{name}.jsonl")), &encoded)?;
        let path = out_dir.join(format!("faces_{name}.json"));
        std::fs::write(&path, serde_json::to_vec_pretty(&part.faces)?).at(&path)?;
        counts[i] = (encoded.len(), part.faces.len());
    }
    let faces_root = std::path::absolute(faces_dir).at(faces_dir)?;
    let manifest = PrepManifest {
        config: config.clone(),
        vocab_size: vocab.len(),
        vocab_hash: vocab.hash(),
        faces_root,
        counts,
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).at(&path)?;
    Ok(manifest)
}

pub fn write_examples(path: &Path, examples: &[EncodedExample]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).at(path)?);
    for e in examples {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n").at(path)?;
    }
    out.flush().at(path)
}

pub fn read_examples(path: &Path) -> Result<Vec<EncodedExample>> {
    let file = std::fs::File::open(path).at(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// The output of [`prepare`], loaded back.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub manifest: PrepManifest,
    pub vocab: Vocabulary,
    pub examples: [Vec<EncodedExample>; 3],
    pub faces: [Vec<FaceRecord>; 3],
}

impl PreparedData {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let manifest: PrepManifest = serde_json::from_slice(&std::fs::read(&path).at(&path)?)?;
        let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
        if vocab.hash() != manifest.vocab_hash {
            return Err(Error::Config(format!("{}: vocabulary hash does not match manifest", dir.display())));
        }
        let mut examples: [Vec<EncodedExample>; 3] = Default::default();
        let mut faces: [Vec<FaceRecord>; 3] = Default::default();
        for (i, name) in PARTS.iter().enumerate() {
            examples[i] = read_examples(&dir.join(format!("{name}.jsonl")))?;
            let path = dir.join(format!("faces_{name}.json"));
            faces[i] = serde_json::from_slice(&std::fs::read(&path).at(&path)?)?;
        }
        Ok(PreparedData {
            manifest,
            vocab,
            examples,
            faces,
        })
    }

    pub fn train(&self) -> &[EncodedExample] {
        &self.examples[0]
    }

    pub fn valid(&self) -> &[EncodedExample] {
        &self.examples[1]
    }

    pub fn test(&self) -> &[EncodedExample] {
        &self.examples[2]
    }

    pub fn image_path(&self, record: &FaceRecord) -> PathBuf {
        self.manifest.faces_root.join(&record.image_path)
    }
}
