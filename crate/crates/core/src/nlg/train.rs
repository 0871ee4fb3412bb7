use autodiff::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::NlgModel;
use crate::data::{EmotionLabel, EncodedExample, TokenId, BOS, PAD};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam, AdamConfig, Module};

/// Teacher-forcing probability decaying linearly from `start` to `end`
/// over `decay_epochs` (defaults to the whole run).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherForcingSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_epochs: Option<usize>,
}

impl Default for TeacherForcingSchedule {
    fn default() -> Self {
        TeacherForcingSchedule {
            start: 1.0,
            end: 0.5,
            decay_epochs: None,
        }
    }
}

impl TeacherForcingSchedule {
    pub fn constant(p: f64) -> Self {
        TeacherForcingSchedule {
            start: p,
            end: p,
            decay_epochs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.start) || !(0.0..=1.0).contains(&self.end) {
            return Err(Error::Config("teacher forcing probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Probability for zero-based `epoch` of `epochs`.
    pub fn prob(&self, epoch: usize, epochs: usize) -> f64 {
        let span = self.decay_epochs.unwrap_or(epochs).saturating_sub(1);
        if span == 0 {
            return self.start;
        }
        let frac = (epoch as f64 / span as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub grad_clip: Option<f64>,
    pub teacher_forcing: TeacherForcingSchedule,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 100,
            batch_size: 256,
            lr: 1e-3,
            grad_clip: Some(5.0),
            teacher_forcing: TeacherForcingSchedule::default(),
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::Config("lr must be non-negative".into()));
        }
        self.teacher_forcing.validate()
    }
}

/// Contents of an NLG training config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlgTrainConfig {
    pub model: super::NlgConfig,
    pub train: TrainOptions,
}

#[derive(Debug, Clone)]
pub struct NlgLoss {
    pub total: Tensor,
    pub seq_ce: Tensor,
    pub emo_ce: Tensor,
    /// Non-pad target tokens the sequence loss averages over.
    pub tokens: usize,
    /// `fed[t][i]`: the id given to the decoder at step `t` for row `i`.
    pub fed: Vec<Vec<TokenId>>,
    pub emotion_logits: Tensor,
}

/// Masked token cross-entropy summed over rows: `-Σ_i w_i log p_i[gold_i]`.
pub fn sequence_cross_entropy(logits: &Tensor, gold: &[TokenId], weights: &[f64]) -> Tensor {
    let v = logits.dim(1);
    let mut pick = vec![0.0; gold.len() * v];
    for (i, (&g, &w)) in gold.iter().zip(weights).enumerate() {
        pick[i * v + g as usize] = w;
    }
    -(logits.log_softmax() * Tensor::from_vec(pick, logits.shape())).sum()
}

/// Mean emotion cross-entropy over the batch.
pub fn emotion_cross_entropy(logits: &Tensor, gold: &[EmotionLabel]) -> Tensor {
    let n = gold.len();
    let weights = vec![1.0 / n as f64; n];
    let ids: Vec<TokenId> = gold.iter().map(|e| e.index() as TokenId).collect();
    sequence_cross_entropy(logits, &ids, &weights)
}

/// Joint loss on a batch. At each decoder step row `i` is fed its gold
/// previous token with probability `teacher_forcing`, else the argmax of
/// its previous logits. With probability 1 no random numbers are drawn.
pub fn nlg_loss(model: &NlgModel, batch: &[&EncodedExample], teacher_forcing: f64, rng: &mut impl Rng) -> Result<NlgLoss> {
    if batch.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let n = batch.len();
    let targets: Vec<&[TokenId]> = batch.iter().map(|e| e.target.as_slice()).collect();
    let tokens = targets.iter().flat_map(|t| t.iter()).filter(|&&id| id != PAD).count();
    if tokens == 0 {
        return Err(Error::Data("every target token is padding".into()));
    }
    let contexts: Vec<&[TokenId]> = batch.iter().map(|e| e.context.as_slice()).collect();
    let enc = model.encode_batch(&contexts)?;

    let steps = targets.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut state = model.init_decoder(&enc.summary);
    let mut prev = vec![BOS; n];
    let mut fed = Vec::with_capacity(steps);
    let mut seq_sum: Option<Tensor> = None;
    for t in 0..steps {
        let (next, logits) = model.decode_step(&state, &prev)?;
        state = next;
        fed.push(prev.clone());
        let gold: Vec<TokenId> = targets.iter().map(|g| g.get(t).copied().unwrap_or(PAD)).collect();
        let weights: Vec<f64> = gold.iter().map(|&g| f64::from(u8::from(g != PAD))).collect();
        let term = sequence_cross_entropy(&logits, &gold, &weights);
        seq_sum = Some(match seq_sum {
            Some(s) => s + term,
            None => term,
        });
        if t + 1 < steps {
            let predicted = (teacher_forcing < 1.0).then(|| logits.argmax_rows());
            prev = (0..n)
                .map(|i| match &predicted {
                    Some(p) if !rng.random_bool(teacher_forcing) => p[i] as TokenId,
                    _ => gold[i],
                })
                .collect();
        }
    }
    let seq_ce = seq_sum.expect("at least one step").mul_scalar(1.0 / tokens as f64);
    let emotion_logits = model.emotion_logits(&enc.summary);
    let gold_emotions: Vec<EmotionLabel> = batch.iter().map(|e| e.emotion).collect();
    let emo_ce = emotion_cross_entropy(&emotion_logits, &gold_emotions);
    let total = &seq_ce + emo_ce.mul_scalar(model.config.emotion_loss_weight);
    Ok(NlgLoss {
        total,
        seq_ce,
        emo_ce,
        tokens,
        fed,
        emotion_logits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub teacher_forcing: f64,
    pub loss: f64,
    pub seq_ce: f64,
    pub emo_ce: f64,
}

/// One pass over `examples` in shuffled mini-batches.
pub fn train_epoch(
    model: &mut NlgModel,
    opt: &mut Adam,
    examples: &[EncodedExample],
    batch_size: usize,
    teacher_forcing: f64,
    grad_clip: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64, f64)> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    let (mut loss, mut seq, mut emo, mut batches) = (0.0, 0.0, 0.0, 0usize);
    for chunk in order.chunks(batch_size) {
        let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| &examples[i]).collect();
        let out = nlg_loss(model, &batch, teacher_forcing, rng)?;
        if !out.total.all_finite() {
            return Err(Error::Numerical(format!("non-finite NLG loss {}", out.total.item())));
        }
        let params = model.parameters();
        let refs: Vec<&Tensor> = params.iter().collect();
        let mut grads = autodiff::grad(&out.total, &refs, None, false);
        if let Some(c) = grad_clip {
            clip_grad_norm(&mut grads, c);
        }
        opt.step(model, &grads);
        loss += out.total.item();
        seq += out.seq_ce.item();
        emo += out.emo_ce.item();
        batches += 1;
    }
    let b = batches.max(1) as f64;
    Ok((loss / b, seq / b, emo / b))
}

/// Full training run; `on_epoch` sees every epoch's metrics.
pub fn train_nlg(
    model: &mut NlgModel,
    examples: &[EncodedExample],
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    opts.validate()?;
    if examples.is_empty() {
        return Err(Error::Data("no training examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut opt = Adam::new(AdamConfig {
        lr: opts.lr,
        ..Default::default()
    });
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let p = opts.teacher_forcing.prob(epoch, opts.epochs);
        let (loss, seq_ce, emo_ce) = train_epoch(model, &mut opt, examples, opts.batch_size, p, opts.grad_clip, &mut rng)?;
        let m = EpochMetrics {
            epoch,
            teacher_forcing: p,
            loss,
            seq_ce,
            emo_ce,
        };
        on_epoch(&m);
        history.push(m);
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlgEval {
    pub examples: usize,
    /// `exp` of the token-averaged teacher-forced cross-entropy.
    pub perplexity: f64,
    pub emotion_accuracy: f64,
    pub seq_ce: f64,
    pub emo_ce: f64,
}

pub fn evaluate(model: &NlgModel, examples: &[EncodedExample], batch_size: usize) -> Result<NlgEval> {
    if examples.is_empty() {
        return Err(Error::Data("no evaluation examples".into()));
    }
    let _guard = autodiff::no_grad();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut token_ce, mut tokens, mut emo_sum, mut correct) = (0.0, 0usize, 0.0, 0usize);
    for chunk in examples.chunks(batch_size.max(1)) {
        let batch: Vec<&EncodedExample> = chunk.iter().collect();
        let out = nlg_loss(model, &batch, 1.0, &mut rng)?;
        token_ce += out.seq_ce.item() * out.tokens as f64;
        tokens += out.tokens;
        emo_sum += out.emo_ce.item() * chunk.len() as f64;
        let predicted = out.emotion_logits.argmax_rows();
        correct += chunk.iter().zip(predicted).filter(|(e, p)| e.emotion.index() == *p).count();
    }
    let seq_ce = token_ce / tokens as f64;
    Ok(NlgEval {
        examples: examples.len(),
        perplexity: seq_ce.exp(),
        emotion_accuracy: correct as f64 / examples.len() as f64,
        seq_ce,
        emo_ce: emo_sum / examples.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlg::NlgConfig;

    #[test]
    fn schedule_is_linear_and_clamped() {
        let s = TeacherForcingSchedule::default();
        assert_eq!(s.prob(0, 11), 1.0);
        assert!((s.prob(5, 11) - 0.75).abs() < 1e-12);
        assert_eq!(s.prob(10, 11), 0.5);
        assert_eq!(s.prob(0, 1), 1.0);
        let s = TeacherForcingSchedule {
            decay_epochs: Some(3),
            ..s
        };
        assert_eq!(s.prob(7, 100), 0.5);
    }

    #[test]
    fn uniform_logits_give_log_vocab() {
        let v = 7;
        let logits = Tensor::zeros(&[3, v]);
        let ce = sequence_cross_entropy(&logits, &[1, 4, 6], &[1.0; 3]).item() / 3.0;
        assert!((ce - (v as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn single_example_emotion_ce_is_neg_log_prob() {
        let raw = [0.3, -1.0, 2.0, 0.0, 0.5, 0.1, -0.2, 0.7];
        let logits = Tensor::from_slice(&raw, &[1, 8]);
        let ce = emotion_cross_entropy(&logits, &[EmotionLabel::Fear]).item();
        let z: f64 = raw.iter().map(|x| x.exp()).sum();
        assert!((ce + (raw[2].exp() / z).ln()).abs() < 1e-12);
    }

    #[test]
    fn all_pad_target_is_an_error() {
        let cfg = NlgConfig {
            vocab_size: 8,
            embedding_dim: 3,
            hidden_dim: 3,
            ..Default::default()
        };
        let model = NlgModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ex = EncodedExample {
            context: vec![4, 2],
            target: vec![PAD, PAD],
            emotion: EmotionLabel::Neutral,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(nlg_loss(&model, &[&ex], 1.0, &mut rng), Err(Error::Data(_))));
    }
}
