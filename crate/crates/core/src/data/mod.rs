//! Corpus ingestion, vocabulary and train/valid/test splits.

mod dialogue;
mod faces;
mod labels;
mod prepare;
mod splits;
mod vocab;

pub use dialogue::{load_dialogues, write_dialogues, Dialogue, DialogueTurn};
pub use faces::{load_face_corpus, load_face_corpus_with, write_face_corpus, FaceFilter, FaceRecord};
pub use labels::{align_labels, align_labels_with, EmotionLabel, Expression, NonNeutralPolicy};
pub use prepare::{prepare, read_examples, write_examples, PrepConfig, PrepManifest, PreparedData};
pub use splits::{
    dialogue_examples, encode_context, encode_example, encode_utterance, make_splits, DialogueExample,
    EncodeOptions, EncodedExample, SplitPart, SplitRatios, Splits,
};
pub use vocab::{build_vocab, detokenize, normalize, tokenize, TokenId, Vocabulary, BOS, EOS, PAD, RESERVED, UNK};
