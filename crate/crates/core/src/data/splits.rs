use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dialogue::{Dialogue, DialogueTurn};
use super::faces::FaceRecord;
use super::labels::EmotionLabel;
use super::vocab::{TokenId, Vocabulary, EOS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Validation(format!("split ratios must be positive: {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("split ratios must sum to 1: {self:?}")));
        }
        Ok(())
    }

    /// `(train, valid, test)` counts: valid and test round down, train takes
    /// the remainder.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let part = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let (valid, test) = (part(self.valid), part(self.test));
        (n.saturating_sub(valid + test), valid, test)
    }
}

/// A response to predict together with the turns leading up to it.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueExample {
    pub dialogue_id: String,
    pub context: Vec<DialogueTurn>,
    pub target: DialogueTurn,
}

impl DialogueExample {
    pub fn emotion(&self) -> EmotionLabel {
        self.target.emotion
    }
}

/// Every turn after the first becomes a target, with up to
/// `context_turns` preceding turns as context.
pub fn dialogue_examples(dialogue: &Dialogue, context_turns: usize) -> Vec<DialogueExample> {
    (1..dialogue.turns.len())
        .map(|i| DialogueExample {
            dialogue_id: dialogue.dialogue_id.clone(),
            context: dialogue.turns[i.saturating_sub(context_turns)..i].to_vec(),
            target: dialogue.turns[i].clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub context_turns: usize,
    /// Per-utterance cap, counting the trailing eos.
    pub max_utterance_len: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            context_turns: 3,
            max_utterance_len: 30,
        }
    }
}

/// Model-ready ids for one example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    /// Context turns, each terminated by eos (which doubles as the turn
    /// separator).
    pub context: Vec<TokenId>,
    /// Response ids ending in eos.
    pub target: Vec<TokenId>,
    pub emotion: EmotionLabel,
}

/// Ids of one utterance truncated to `max_len - 1` tokens plus eos.
pub fn encode_utterance(vocab: &Vocabulary, tokens: &[String], max_len: usize) -> Vec<TokenId> {
    let keep = max_len.saturating_sub(1).min(tokens.len());
    let mut ids = vocab.encode(&tokens[..keep]);
    ids.push(EOS);
    ids
}

/// Context ids for a window of turns (the last `context_turns` are used).
pub fn encode_context<'a>(
    vocab: &Vocabulary,
    turns: impl IntoIterator<Item = &'a [String]>,
    opts: &EncodeOptions,
) -> Vec<TokenId> {
    let turns: Vec<&[String]> = turns.into_iter().collect();
    let start = turns.len().saturating_sub(opts.context_turns);
    turns[start..]
        .iter()
        .flat_map(|t| encode_utterance(vocab, t, opts.max_utterance_len))
        .collect()
}

pub fn encode_example(example: &DialogueExample, vocab: &Vocabulary, opts: &EncodeOptions) -> EncodedExample {
    EncodedExample {
        context: encode_context(vocab, example.context.iter().map(|t| t.tokens.as_slice()), opts),
        target: encode_utterance(vocab, &example.target.tokens, opts.max_utterance_len),
        emotion: example.target.emotion,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitPart {
    pub dialogue_ids: Vec<String>,
    pub examples: Vec<DialogueExample>,
    pub faces: Vec<FaceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: SplitPart,
    pub valid: SplitPart,
    pub test: SplitPart,
}

impl Splits {
    pub fn parts(&self) -> [(&'static str, &SplitPart); 3] {
        [("train", &self.train), ("valid", &self.valid), ("test", &self.test)]
    }
}

/// Splits dialogues by dialogue and faces by `model_id`, so no dialogue or
/// face identity appears in two parts. Deterministic in `seed`.
pub fn make_splits(
    dialogues: &[Dialogue],
    faces: &[FaceRecord],
    ratios: SplitRatios,
    context_turns: usize,
    seed: u64,
) -> Result<Splits> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..dialogues.len()).collect();
    order.shuffle(&mut rng);
    let (n_train, n_valid, _) = ratios.counts(dialogues.len());

    let models: BTreeSet<&str> = faces.iter().map(|f| f.model_id.as_str()).collect();
    let mut models: Vec<&str> = models.into_iter().collect();
    models.shuffle(&mut rng);
    let (m_train, m_valid, _) = ratios.counts(models.len());

    let mut parts: [SplitPart; 3] = Default::default();
    for (rank, &i) in order.iter().enumerate() {
        let slot = bucket(rank, n_train, n_valid);
        let d = &dialogues[i];
        parts[slot].dialogue_ids.push(d.dialogue_id.clone());
        parts[slot].examples.extend(dialogue_examples(d, context_turns));
    }
    for (rank, model) in models.iter().enumerate() {
        let slot = bucket(rank, m_train, m_valid);
        parts[slot]
            .faces
            .extend(faces.iter().filter(|f| f.model_id == *model).cloned());
    }

    for (name, part) in ["train", "valid", "test"].iter().zip(&parts) {
        if part.dialogue_ids.is_empty() || part.faces.is_empty() {
            return Err(Error::Split(format!(
                "{name} split is empty ({} dialogues, {} face models available)",
                dialogues.len(),
                models.len()
            )));
        }
    }
    let [train, valid, test] = parts;
    Ok(Splits { train, valid, test })
}

fn bucket(rank: usize, n_train: usize, n_valid: usize) -> usize {
    if rank < n_train {
        0
    } else if rank < n_train + n_valid {
        1
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::au::AuVector;
    use crate::data::labels::Expression;
    use crate::data::vocab::build_vocab;

    fn dialogues(n: usize) -> Vec<Dialogue> {
        (0..n)
            .map(|i| Dialogue {
                dialogue_id: format!("d{i}"),
                turns: vec![
                    DialogueTurn::new("a", &format!("hello {i}"), EmotionLabel::Neutral).unwrap(),
                    DialogueTurn::new("b", "great news !", EmotionLabel::Happiness).unwrap(),
                ],
            })
            .collect()
    }

    fn faces(models: usize) -> Vec<FaceRecord> {
        (0..models)
            .flat_map(|m| {
                [Expression::Neutral, Expression::Happy].map(|e| FaceRecord {
                    image_path: format!("m{m}_{e}.png"),
                    model_id: format!("m{m}"),
                    expression: e,
                    au: AuVector::zeros(17),
                })
            })
            .collect()
    }

    #[test]
    fn ten_dialogues_split_eight_one_one() {
        let s = make_splits(&dialogues(10), &faces(10), SplitRatios::default(), 3, 7).unwrap();
        assert_eq!(s.train.dialogue_ids.len(), 8);
        assert_eq!(s.valid.dialogue_ids.len(), 1);
        assert_eq!(s.test.dialogue_ids.len(), 1);
        assert_eq!(s.train.examples.len(), 8);
    }

    #[test]
    fn same_seed_same_splits() {
        let a = make_splits(&dialogues(20), &faces(12), SplitRatios::default(), 3, 42).unwrap();
        let b = make_splits(&dialogues(20), &faces(12), SplitRatios::default(), 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_model_or_dialogue_straddles_splits() {
        let s = make_splits(&dialogues(30), &faces(15), SplitRatios::default(), 3, 3).unwrap();
        let models = |p: &SplitPart| p.faces.iter().map(|f| f.model_id.clone()).collect::<BTreeSet<_>>();
        let ids = |p: &SplitPart| p.dialogue_ids.iter().cloned().collect::<BTreeSet<_>>();
        for (x, y) in [(&s.train, &s.valid), (&s.train, &s.test), (&s.valid, &s.test)] {
            assert!(models(x).is_disjoint(&models(y)));
            assert!(ids(x).is_disjoint(&ids(y)));
        }
        assert_eq!(s.train.faces.len() + s.valid.faces.len() + s.test.faces.len(), 30);
    }

    #[test]
    fn empty_split_and_bad_ratios_rejected() {
        assert!(matches!(
            make_splits(&dialogues(5), &faces(10), SplitRatios::default(), 3, 0),
            Err(Error::Split(_))
        ));
        let bad = SplitRatios { train: 0.9, valid: 0.1, test: 0.1 };
        assert!(make_splits(&dialogues(10), &faces(10), bad, 3, 0).is_err());
    }

    #[test]
    fn encoding_truncates_and_keeps_eos() {
        let d = dialogues(1);
        let vocab = build_vocab(&d, 1).unwrap();
        let long: Vec<String> = (0..50).map(|_| "great".to_string()).collect();
        let ids = encode_utterance(&vocab, &long, 30);
        assert_eq!(ids.len(), 30);
        assert_eq!(*ids.last().unwrap(), EOS);

        let ex = &dialogue_examples(&d[0], 3)[0];
        let enc = encode_example(ex, &vocab, &EncodeOptions::default());
        assert_eq!(enc.context.len(), 3);
        assert_eq!(enc.target.len(), 4);
        assert_eq!(enc.emotion, EmotionLabel::Happiness);
    }

    #[test]
    fn context_window_keeps_last_turns() {
        let turns: Vec<Vec<String>> = (0..5).map(|i| vec![format!("w{i}")]).collect();
        let d = Dialogue {
            dialogue_id: "x".into(),
            turns: (0..5)
                .map(|i| DialogueTurn::new("a", &format!("w{i}"), EmotionLabel::Neutral).unwrap())
                .collect(),
        };
        let vocab = build_vocab(&[d], 1).unwrap();
        let ids = encode_context(&vocab, turns.iter().map(|t| t.as_slice()), &EncodeOptions::default());
        assert_eq!(ids, vec![vocab.id("w2"), EOS, vocab.id("w3"), EOS, vocab.id("w4"), EOS]);
    }
}
