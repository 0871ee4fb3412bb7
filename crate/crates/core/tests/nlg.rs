mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use emoface::nn::Module;

use emoface::data::{EncodeOptions, EncodedExample, TokenId, BOS, PAD};
use emoface::nlg::{
    evaluate, nlg_loss, train_nlg, GenerateOptions, NlgCheckpoint, NlgConfig, NlgModel, NlgTrainConfig,
    TeacherForcingSchedule, TrainOptions,
};

fn tiny(vocab: usize, seed: u64) -> NlgModel {
    let cfg = NlgConfig {
        vocab_size: vocab,
        embedding_dim: 6,
        hidden_dim: 8,
        max_decode_len: 10,
        ..Default::default()
    };
    NlgModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn full_teacher_forcing_feeds_the_gold_prefix() {
    let (vocab, examples) = common::synthetic_examples(&EncodeOptions::default());
    let model = tiny(vocab.len(), 0);
    let batch: Vec<&EncodedExample> = examples.iter().take(4).collect();
    let out = nlg_loss(&model, &batch, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    for (i, ex) in batch.iter().enumerate() {
        assert_eq!(out.fed[0][i], BOS);
        for (t, &gold) in ex.target.iter().enumerate().take(out.fed.len() - 1) {
            assert_eq!(out.fed[t + 1][i], gold, "row {i} step {}", t + 1);
        }
        for step in out.fed.iter().skip(ex.target.len() + 1) {
            assert_eq!(step[i], PAD);
        }
    }
    assert_eq!(out.tokens, batch.iter().map(|e| e.target.len()).sum::<usize>());
}

#[test]
fn zero_teacher_forcing_feeds_model_predictions() {
    let (vocab, examples) = common::synthetic_examples(&EncodeOptions::default());
    let model = tiny(vocab.len(), 3);
    let ex = &examples[0];
    let out = nlg_loss(&model, &[ex], 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let enc = model.encode_context(&ex.context).unwrap();
    let mut state = model.init_decoder(&enc.summary);
    let mut prev = BOS;
    let mut greedy = Vec::new();
    for _ in 1..ex.target.len() {
        let (next, logits) = model.decode_step(&state, &[prev]).unwrap();
        state = next;
        prev = logits.argmax_rows()[0] as TokenId;
        greedy.push(prev);
    }
    let fed: Vec<_> = out.fed.iter().skip(1).map(|s| s[0]).collect();
    assert_eq!(fed, greedy);
}

#[test]
fn loss_is_bit_identical_for_a_seed() {
    let (vocab, examples) = common::synthetic_examples(&EncodeOptions::default());
    let opts = TrainOptions {
        epochs: 2,
        batch_size: 8,
        lr: 1e-2,
        teacher_forcing: TeacherForcingSchedule {
            start: 1.0,
            end: 0.5,
            decay_epochs: None,
        },
        seed: 4,
        ..Default::default()
    };
    let run = || {
        let mut m = tiny(vocab.len(), 9);
        let hist = train_nlg(&mut m, &examples, &opts, |_| {}).unwrap();
        (hist, m.parameters().iter().map(|t| t.to_vec()).collect::<Vec<_>>())
    };
    let (a, wa) = run();
    let (b, wb) = run();
    assert_eq!(a, b);
    assert_eq!(wa, wb);
    assert!(a.iter().all(|m| m.loss.is_finite()));
}

#[test]
fn training_reduces_loss() {
    let (vocab, examples) = common::synthetic_examples(&EncodeOptions::default());
    let mut m = tiny(vocab.len(), 2);
    let before = evaluate(&m, &examples, 16).unwrap();
    let opts = TrainOptions {
        epochs: 15,
        batch_size: 8,
        lr: 1e-2,
        teacher_forcing: TeacherForcingSchedule::constant(1.0),
        ..Default::default()
    };
    train_nlg(&mut m, &examples, &opts, |_| {}).unwrap();
    let after = evaluate(&m, &examples, 16).unwrap();
    assert!(after.seq_ce < before.seq_ce, "{} -> {}", before.seq_ce, after.seq_ce);
    assert!(after.perplexity < before.perplexity);
}

#[test]
fn checkpoint_round_trip() {
    let mut ckpt = common::small_nlg(1);
    let dir = tempfile::tempdir().unwrap();
    ckpt.save(dir.path()).unwrap();
    let loaded = NlgCheckpoint::load(dir.path()).unwrap();
    assert_eq!(loaded.manifest, ckpt.manifest);
    assert_eq!(loaded.vocab.hash(), ckpt.vocab.hash());
    let turns = vec![vec!["i".to_string(), "am".into(), "happy".into()]];
    let opts = GenerateOptions { max_len: 8, min_len: 1 };
    assert_eq!(loaded.respond(&turns, opts).unwrap(), ckpt.respond(&turns, opts).unwrap());

    let weights = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "bin"))
        .unwrap();
    let mut bytes = std::fs::read(&weights).unwrap();
    bytes[0] ^= 1;
    std::fs::write(&weights, bytes).unwrap();
    assert!(NlgCheckpoint::load(dir.path()).is_err());
}

#[test]
fn generation_respects_length_limits() {
    let (vocab, examples) = common::synthetic_examples(&EncodeOptions::default());
    let model = tiny(vocab.len(), 5);
    for ex in examples.iter().take(5) {
        let p = model.generate(&ex.context, GenerateOptions { max_len: 4, min_len: 2 }).unwrap();
        assert!(p.tokens.len() <= 4);
        assert!(p.tokens.len() >= 2);
        assert!(!p.tokens[..1].contains(&emoface::data::EOS));
        assert_eq!(p.emotion_logits.len(), 8);
    }
}

#[test]
fn shipped_nlg_configs_parse() {
    for name in ["configs/nlg_full.json", "configs/nlg_overfit.json"] {
        let cfg: NlgTrainConfig = serde_json::from_slice(&std::fs::read(common::shipped(name)).unwrap()).unwrap();
        cfg.train.validate().unwrap();
    }
}
