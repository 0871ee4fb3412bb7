use proptest::prelude::*;

use autodiff::Tensor;
use emoface::au::AuVector;
use emoface::bridge::{validate_table, AuBridge, AuMappingTable};
use emoface::data::{detokenize, make_splits, tokenize, EmotionLabel, SplitRatios};
use emoface::face::{compose, FaceImage};
use emoface::synth;

fn unit(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, n)
}

fn signed(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..=1.0f64, n)
}

proptest! {
    #[test]
    fn composition_stays_between_its_inputs(a in unit(16), c in signed(48), i in signed(48)) {
        let at = Tensor::from_slice(&a, &[1, 1, 4, 4]);
        let out = compose(&at, &Tensor::from_slice(&c, &[1, 3, 4, 4]), &Tensor::from_slice(&i, &[1, 3, 4, 4]));
        for (k, &y) in out.data().iter().enumerate() {
            let (lo, hi) = (c[k].min(i[k]), c[k].max(i[k]));
            prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
            prop_assert!((-1.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn argmax_ignores_constant_shifts(v in prop::collection::vec(-50.0..50.0f64, 1..20), shift in -100.0..100.0f64) {
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let t = Tensor::from_slice(&v, &[1, v.len()]);
        prop_assert_eq!(autodiff::argmax(&v), autodiff::argmax(&shifted));
        let probs: f64 = t.log_softmax().data().iter().map(|l| l.exp()).sum();
        prop_assert!((probs - 1.0).abs() < 1e-9);
        let ls = t.log_softmax().to_vec();
        let ls2 = Tensor::from_slice(&shifted, &[1, v.len()]).log_softmax().to_vec();
        for (x, y) in ls.iter().zip(&ls2) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn au_vectors_accept_exactly_the_unit_interval(v in prop::collection::vec(-0.5..1.5f64, 17)) {
        let ok = v.iter().all(|x| (0.0..=1.0).contains(x));
        let parsed = AuVector::new(v.clone());
        prop_assert_eq!(parsed.is_ok(), ok);
        if let Ok(z) = parsed {
            let again = AuVector::from_named(&z.to_named()).unwrap();
            prop_assert_eq!(again, z);
        }
    }

    #[test]
    fn table_validation_is_stable_under_round_trip(scale in 0.0..=1.0f64, drop in 0usize..8) {
        let mut table = AuBridge::default().to_table();
        for row in table.0.values_mut() {
            for v in row.values_mut() {
                *v *= scale;
            }
        }
        let victim = EmotionLabel::ALL[drop].as_str().to_string();
        table.0.remove(&victim);
        let first = validate_table(&table);
        prop_assert!(!first.is_empty());
        let text = serde_json::to_string(&table).unwrap();
        let back: AuMappingTable = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(validate_table(&back), first);
    }

    #[test]
    fn tokenization_is_idempotent(text in "\\PC{0,60}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&detokenize(&once)), once.clone());
        prop_assert!(once.iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
    }

    #[test]
    fn png_round_trip_is_within_quantisation(px in prop::collection::vec(0u8..=255, 3 * 8 * 8)) {
        let data: Vec<f64> = px.iter().map(|&b| f64::from(b) / 127.5 - 1.0).collect();
        let img = FaceImage::new(8, data).unwrap();
        let back = FaceImage::decode_png(&img.encode_png()).unwrap();
        prop_assert!(img.mean_abs_diff(&back) < 1e-12);
        prop_assert_eq!(back.encode_png(), img.encode_png());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn splits_are_disjoint_and_complete(seed in any::<u64>()) {
        let dialogues = synth::synthetic_dialogues().unwrap();
        let faces: Vec<_> = synth::full_faces(8).into_iter().map(|f| f.record).collect();
        let s = make_splits(&dialogues, &faces, SplitRatios::default(), 3, seed).unwrap();
        let mut ids: Vec<&String> = s.parts().iter().flat_map(|(_, p)| p.dialogue_ids.iter()).collect();
        let total = ids.len();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), total);
        prop_assert_eq!(total, dialogues.len());
        let models = |p: &emoface::data::SplitPart| p.faces.iter().map(|f| f.model_id.clone()).collect::<std::collections::HashSet<_>>();
        prop_assert!(models(&s.train).is_disjoint(&models(&s.valid)));
        prop_assert!(models(&s.train).is_disjoint(&models(&s.test)));
        prop_assert!(models(&s.valid).is_disjoint(&models(&s.test)));
        prop_assert_eq!(s.train.faces.len() + s.valid.faces.len() + s.test.faces.len(), faces.len());
    }
}
