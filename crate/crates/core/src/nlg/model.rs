use autodiff::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmotionLabel, TokenId, BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::nn::{impl_module, Embedding, GruCell, Linear};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlgConfig {
    /// Filled in from the vocabulary when left at 0.
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub max_decode_len: usize,
    /// Longest encoder input; longer contexts keep their most recent ids.
    pub max_context_len: usize,
    pub emotion_loss_weight: f64,
}

impl Default for NlgConfig {
    fn default() -> Self {
        NlgConfig {
            vocab_size: 0,
            embedding_dim: 50,
            hidden_dim: 200,
            max_decode_len: 30,
            max_context_len: 90,
            emotion_loss_weight: 1.0,
        }
    }
}

impl NlgConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_context_len", self.max_context_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.vocab_size <= EOS as usize {
            return Err(Error::Config("vocabulary must include the reserved tokens".into()));
        }
        if !(self.emotion_loss_weight >= 0.0) {
            return Err(Error::Config("emotion_loss_weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Encoder result for a batch.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// Final forward and backward states concatenated, `[n, 2H]`.
    pub summary: Tensor,
    /// One `[n, 2H]` tensor per input position (forward and backward state
    /// at that position); rows past a sequence's end repeat its last state.
    pub states: Vec<Tensor>,
}

#[derive(Debug, Clone)]
pub struct DecoderState {
    pub hidden: Tensor,
    /// Output logits of the step that produced this state.
    pub logits: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlgPrediction {
    /// Greedy tokens, ending with eos unless the length budget ran out.
    pub tokens: Vec<TokenId>,
    pub emotion: EmotionLabel,
    pub emotion_logits: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub max_len: usize,
    /// Eos is suppressed until this many tokens have been produced.
    pub min_len: usize,
}

#[derive(Debug, Clone)]
pub struct NlgModel {
    pub config: NlgConfig,
    pub embedding: Embedding,
    pub enc_fwd: GruCell,
    pub enc_bwd: GruCell,
    pub init: Linear,
    pub decoder: GruCell,
    pub output: Linear,
    pub emotion_head: Linear,
}

impl_module!(NlgModel {
    embedding,
    enc_fwd,
    enc_bwd,
    init,
    decoder,
    output,
    emotion_head
});

impl NlgModel {
    pub fn new(config: NlgConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let (v, e, h) = (config.vocab_size, config.embedding_dim, config.hidden_dim);
        Ok(NlgModel {
            embedding: Embedding::new(rng, v, e),
            enc_fwd: GruCell::new(rng, e, h),
            enc_bwd: GruCell::new(rng, e, h),
            init: Linear::new(rng, 2 * h, h),
            decoder: GruCell::new(rng, e, h),
            output: Linear::new(rng, h, v),
            emotion_head: Linear::new(rng, 2 * h, EmotionLabel::COUNT),
            config,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        let size = self.vocab_size();
        match ids.iter().find(|&&id| id as usize >= size) {
            Some(&id) => Err(Error::TokenId { id, size }),
            None => Ok(()),
        }
    }

    /// Clips a context to the most recent `max_context_len` ids.
    pub fn clip_context<'a>(&self, ids: &'a [TokenId]) -> &'a [TokenId] {
        &ids[ids.len().saturating_sub(self.config.max_context_len)..]
    }

    /// Runs both encoder directions over a padded batch.
    pub fn encode_batch(&self, contexts: &[&[TokenId]]) -> Result<EncoderOutput> {
        if contexts.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let contexts: Vec<&[TokenId]> = contexts.iter().map(|c| self.clip_context(c)).collect();
        if contexts.iter().any(|c| c.is_empty()) {
            return Err(Error::Data("context must contain at least one token".into()));
        }
        for c in &contexts {
            self.check_ids(c)?;
        }
        let n = contexts.len();
        let steps = contexts.iter().map(|c| c.len()).max().unwrap_or(0);
        let hd = self.config.hidden_dim;

        // time-major so each step is a contiguous row block
        let mut ids = Vec::with_capacity(steps * n);
        for t in 0..steps {
            ids.extend(contexts.iter().map(|c| c.get(t).copied().unwrap_or(PAD)));
        }
        let emb = self.embedding.forward(&ids)?;
        let gi_f = self.enc_fwd.input_gates(&emb);
        let gi_b = self.enc_bwd.input_gates(&emb);
        let masks: Vec<Option<Tensor>> = (0..steps)
            .map(|t| {
                let m: Vec<f64> = contexts.iter().map(|c| f64::from(u8::from(t < c.len()))).collect();
                (!m.iter().all(|&x| x == 1.0)).then(|| Tensor::from_vec(m, &[n, 1]))
            })
            .collect();
        let advance = |cell: &GruCell, gi: &Tensor, h: &Tensor, t: usize| {
            let cand = cell.step_gates(&gi.narrow(0, t * n, n), h);
            match &masks[t] {
                Some(m) => h + m * (cand - h),
                None => cand,
            }
        };

        let mut h = Tensor::zeros(&[n, hd]);
        let mut fwd = Vec::with_capacity(steps);
        for t in 0..steps {
            h = advance(&self.enc_fwd, &gi_f, &h, t);
            fwd.push(h.clone());
        }
        let mut hb = Tensor::zeros(&[n, hd]);
        let mut bwd = vec![None; steps];
        for t in (0..steps).rev() {
            hb = advance(&self.enc_bwd, &gi_b, &hb, t);
            bwd[t] = Some(hb.clone());
        }
        let summary = Tensor::cat(&[h, hb], 1);
        let states = fwd
            .into_iter()
            .zip(bwd)
            .map(|(f, b)| Tensor::cat(&[f, b.expect("filled")], 1))
            .collect();
        Ok(EncoderOutput { summary, states })
    }

    /// Encodes one context.
    pub fn encode_context(&self, context: &[TokenId]) -> Result<EncoderOutput> {
        self.encode_batch(&[context])
    }

    /// Emotion logits `[n, 8]` from an encoder summary.
    pub fn emotion_logits(&self, summary: &Tensor) -> Tensor {
        self.emotion_head.forward(summary)
    }

    /// Logits and label for the first row of `summary`.
    pub fn predict_emotion(&self, summary: &Tensor) -> (Vec<f64>, EmotionLabel) {
        let logits = self.emotion_logits(&summary.narrow(0, 0, 1)).to_vec();
        let label = EmotionLabel::from_index(autodiff::argmax(&logits)).expect("8 logits");
        (logits, label)
    }

    pub fn init_decoder(&self, summary: &Tensor) -> DecoderState {
        DecoderState {
            hidden: self.init.forward(summary).tanh(),
            logits: None,
        }
    }

    /// One decoder step fed with `prev` (one id per batch row).
    pub fn decode_step(&self, state: &DecoderState, prev: &[TokenId]) -> Result<(DecoderState, Tensor)> {
        if prev.len() != state.hidden.dim(0) {
            return Err(Error::Shape(format!(
                "{} previous tokens for a batch of {}",
                prev.len(),
                state.hidden.dim(0)
            )));
        }
        let x = self.embedding.forward(prev)?;
        let hidden = self.decoder.forward(&x, &state.hidden);
        let logits = self.output.forward(&hidden);
        Ok((
            DecoderState {
                hidden,
                logits: Some(logits.clone()),
            },
            logits,
        ))
    }

    /// Greedy response and emotion for one context.
    pub fn generate(&self, context: &[TokenId], opts: GenerateOptions) -> Result<NlgPrediction> {
        let _guard = autodiff::no_grad();
        let enc = self.encode_context(context)?;
        let (emotion_logits, emotion) = self.predict_emotion(&enc.summary);
        let mut state = self.init_decoder(&enc.summary);
        let mut prev = BOS;
        let mut tokens = Vec::new();
        while tokens.len() < opts.max_len {
            let (next, logits) = self.decode_step(&state, &[prev])?;
            state = next;
            let mut scores = logits.to_vec();
            scores[PAD as usize] = f64::NEG_INFINITY;
            scores[BOS as usize] = f64::NEG_INFINITY;
            if tokens.len() < opts.min_len {
                scores[EOS as usize] = f64::NEG_INFINITY;
            }
            prev = autodiff::argmax(&scores) as TokenId;
            tokens.push(prev);
            if prev == EOS {
                break;
            }
        }
        Ok(NlgPrediction {
            tokens,
            emotion,
            emotion_logits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64) -> NlgModel {
        let cfg = NlgConfig {
            vocab_size: 12,
            embedding_dim: 4,
            hidden_dim: 5,
            ..Default::default()
        };
        NlgModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn shapes_and_determinism() {
        let m = tiny(0);
        let enc = m.encode_context(&[5]).unwrap();
        assert_eq!(enc.states.len(), 1);
        assert_eq!(enc.summary.shape(), &[1, 10]);
        let again = m.encode_context(&[5]).unwrap();
        assert_eq!(enc.summary.data(), again.summary.data());
        let (_, logits) = m.decode_step(&m.init_decoder(&enc.summary), &[BOS]).unwrap();
        assert_eq!(logits.shape(), &[1, 12]);
    }

    #[test]
    fn order_matters() {
        let m = tiny(1);
        let a = m.encode_context(&[4, 7]).unwrap().summary.to_vec();
        let b = m.encode_context(&[7, 4]).unwrap().summary.to_vec();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
    }

    #[test]
    fn padding_does_not_leak_into_batched_encoding() {
        let m = tiny(2);
        let alone = m.encode_context(&[4, 5]).unwrap();
        let batch = m.encode_batch(&[&[4, 5], &[6, 7, 8, 9]]).unwrap();
        let row = batch.summary.narrow(0, 0, 1);
        for (x, y) in alone.summary.data().iter().zip(row.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_ids_and_empty_context_rejected() {
        let m = tiny(3);
        assert!(matches!(m.encode_context(&[12]), Err(Error::TokenId { id: 12, size: 12 })));
        assert!(m.encode_context(&[]).is_err());
        let enc = m.encode_context(&[4]).unwrap();
        assert!(m.decode_step(&m.init_decoder(&enc.summary), &[99]).is_err());
    }

    #[test]
    fn generation_contract() {
        let m = tiny(4);
        let none = m.generate(&[4, 5], GenerateOptions { max_len: 0, min_len: 0 }).unwrap();
        assert!(none.tokens.is_empty());
        assert_eq!(none.emotion_logits.len(), 8);
        let p = m.generate(&[4, 5], GenerateOptions { max_len: 20, min_len: 3 }).unwrap();
        assert!(!p.tokens.is_empty() && p.tokens.len() <= 20);
        assert!(p.tokens.iter().all(|&t| t != PAD && t != BOS));
        assert!(p.tokens.iter().take(3).all(|&t| t != EOS));
        assert_eq!(p, m.generate(&[4, 5], GenerateOptions { max_len: 20, min_len: 3 }).unwrap());
        assert_eq!(p.emotion.index(), autodiff::argmax(&p.emotion_logits));
    }
}
