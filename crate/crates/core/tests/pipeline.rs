mod common;

use std::path::Path;

use emoface::au::AuVector;
use emoface::bridge::AuBridge;
use emoface::data::EmotionLabel;
use emoface::error::Error;
use emoface::face::{edit_face, FaceCheckpoint};
use emoface::nlg::NlgCheckpoint;
use emoface::pipeline::{synthesize_face, FaceTarget, Pipeline, PipelineConfig};

fn service(dir: &Path, seed: u64, persist: bool) -> Pipeline {
    let path = common::write_service(dir);
    let mut cfg = PipelineConfig::load(&path).unwrap();
    cfg.seed = Some(seed);
    if persist {
        cfg.sessions_dir = Some(dir.join("sessions"));
    }
    Pipeline::from_config(&cfg).unwrap()
}

fn reopen(dir: &Path, seed: u64) -> Pipeline {
    let mut cfg = PipelineConfig::load(&dir.join("serve.json")).unwrap();
    cfg.seed = Some(seed);
    cfg.sessions_dir = Some(dir.join("sessions"));
    Pipeline::from_config(&cfg).unwrap()
}

const LINES: [&str; 3] = ["hello there", "i feel great today", "what a terrible storm"];

#[test]
fn same_seed_same_conversation() {
    let dir = tempfile::tempdir().unwrap();
    let a = service(dir.path(), 7, false);
    let b = reopen_in_memory(dir.path(), 7);
    let sa = a.create_session(None).unwrap();
    let sb = b.create_session(None).unwrap();
    assert_eq!(sa.session_id, sb.session_id);
    assert_eq!(sa.base_face_id, sb.base_face_id);
    for line in LINES {
        let ra = a.respond(&sa.session_id, line, None).unwrap();
        let rb = b.respond(&sb.session_id, line, None).unwrap();
        assert_eq!((&ra.text, ra.emotion, &ra.au_target, &ra.face), (&rb.text, rb.emotion, &rb.au_target, &rb.face));
    }
}

fn reopen_in_memory(dir: &Path, seed: u64) -> Pipeline {
    let mut cfg = PipelineConfig::load(&dir.join("serve.json")).unwrap();
    cfg.seed = Some(seed);
    Pipeline::from_config(&cfg).unwrap()
}

#[test]
fn reply_is_the_composition_of_its_stages() {
    let dir = tempfile::tempdir().unwrap();
    let p = service(dir.path(), 1, false);
    let s = p.create_session(None).unwrap();
    let reply = p.respond(&s.session_id, LINES[1], None).unwrap();

    let nlg = NlgCheckpoint::load(&dir.path().join("nlg")).unwrap();
    let face = FaceCheckpoint::load(&dir.path().join("face")).unwrap();
    let turns = vec![emoface::data::tokenize(LINES[1])];
    let pred = nlg.respond(&turns, p.generate_options()).unwrap();
    assert_eq!(reply.text, nlg.vocab.decode(&pred.tokens));
    assert_eq!(reply.emotion, pred.emotion);
    let z = AuBridge::default().map_emotion_to_au(pred.emotion);
    assert_eq!(reply.au_target, z);
    assert_eq!(reply.face, edit_face(&face.generator, &s.base_face, &z).unwrap());
    assert_eq!(reply.au_target, p.bridge().map_emotion_to_au(reply.emotion));
    let l = reply.latency_ms;
    assert!(l.nlg >= 0.0 && l.bridge >= 0.0 && l.face >= 0.0);
    assert!(l.total >= l.nlg + l.bridge + l.face - 1e-9);
}

#[test]
fn override_changes_face_but_not_text() {
    let dir = tempfile::tempdir().unwrap();
    let p = service(dir.path(), 2, false);
    let q = reopen_in_memory(dir.path(), 2);
    let s = p.create_session(Some("id01_neutral")).unwrap();
    let t = q.create_session(Some("id01_neutral")).unwrap();
    let plain = p.respond(&s.session_id, LINES[0], None).unwrap();
    let forced = q.respond(&t.session_id, LINES[0], Some(EmotionLabel::Neutral)).unwrap();
    assert_eq!(plain.text, forced.text);
    assert_eq!(forced.emotion, EmotionLabel::Neutral);
    assert_eq!(forced.au_target, AuVector::zeros(17));
    let face = FaceCheckpoint::load(&dir.path().join("face")).unwrap();
    assert_eq!(forced.face, face.edit(&t.base_face, &AuVector::zeros(17)).unwrap());
}

#[test]
fn happiness_maps_to_cheek_raiser_and_lip_corner_puller() {
    let z = AuBridge::default().map_emotion_to_au(EmotionLabel::Happiness);
    for (i, name) in emoface::au::AU_NAMES.iter().enumerate() {
        let want = if ["AU06", "AU12"].contains(name) { 1.0 } else { 0.0 };
        assert_eq!(z.values()[i], want, "{name}");
    }
}

#[test]
fn out_of_range_targets_are_rejected() {
    let err = r#"{"AU06": 1.5}"#.parse::<FaceTarget>().unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
    assert!(r#"{"AU99": 0.5}"#.parse::<FaceTarget>().is_err());
    assert!("smug".parse::<FaceTarget>().is_err());
    let ok: FaceTarget = r#"{"AU06": 0.5}"#.parse().unwrap();
    let FaceTarget::Au(z) = &ok else { panic!("expected AU target") };
    assert_eq!(z.get("AU06"), Some(0.5));
    assert!(matches!("happiness".parse::<FaceTarget>().unwrap(), FaceTarget::Emotion(EmotionLabel::Happiness)));

    let dir = tempfile::tempdir().unwrap();
    let p = service(dir.path(), 0, false);
    let base = &p.base_faces()[0].image;
    let (z, img) = synthesize_face(p.face_checkpoint(), p.bridge(), base, &ok).unwrap();
    assert_eq!(img, p.face_checkpoint().edit(base, &z).unwrap());
}

#[test]
fn face_selection() {
    let dir = tempfile::tempdir().unwrap();
    let p = service(dir.path(), 3, false);
    let ids: Vec<&str> = p.base_faces().iter().map(|f| f.face_id.as_str()).collect();
    assert!(!ids.is_empty());
    assert!(p.base_faces().iter().all(|f| f.face_id.ends_with("neutral")));
    let s = p.create_session(Some(ids[0])).unwrap();
    assert_eq!(s.base_face_id, ids[0]);
    assert_eq!(s.base_face, p.base_faces()[0].image);
    assert!(s.history.is_empty());
    for _ in 0..10 {
        let r = p.create_session(Some("random")).unwrap();
        assert!(ids.contains(&r.base_face_id.as_str()));
    }
    assert!(matches!(p.create_session(Some("nobody")), Err(Error::NotFound(_))));
    assert!(matches!(p.respond("missing", "hi", None), Err(Error::NotFound(_))));
    assert!(matches!(p.respond(&s.session_id, "  ", None), Err(Error::Validation(_))));
}

#[test]
fn sessions_do_not_share_history() {
    let dir = tempfile::tempdir().unwrap();
    let serial = service(dir.path(), 5, false);
    let a = serial.create_session(Some("id00_neutral")).unwrap();
    let b = serial.create_session(Some("id02_neutral")).unwrap();
    let mut want = Vec::new();
    for line in LINES {
        want.push(serial.respond(&a.session_id, line, None).unwrap().text);
    }
    let interleaved = reopen_in_memory(dir.path(), 5);
    let a2 = interleaved.create_session(Some("id00_neutral")).unwrap();
    let b2 = interleaved.create_session(Some("id02_neutral")).unwrap();
    let mut got = Vec::new();
    for line in LINES {
        got.push(interleaved.respond(&a2.session_id, line, None).unwrap().text);
        interleaved.respond(&b2.session_id, "something unrelated", None).unwrap();
    }
    assert_eq!(got, want);
    let hist = interleaved.sessions().get(&a2.session_id).unwrap();
    let hist = hist.lock().unwrap();
    assert_eq!(hist.history.len(), 2 * LINES.len());
    assert_eq!(hist.history[0].speaker_id, "user");
    assert_eq!(hist.history[0].emotion, EmotionLabel::Neutral);
    assert_eq!(hist.history[1].speaker_id, "agent");
    let _ = b;
}

#[test]
fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let p = service(dir.path(), 6, true);
    let s = p.create_session(None).unwrap();
    let first = p.respond(&s.session_id, LINES[0], None).unwrap();
    let before = p.sessions().get(&s.session_id).unwrap().lock().unwrap().history.clone();
    drop(p);

    let q = reopen(dir.path(), 6);
    assert_eq!(q.sessions().len(), 1);
    let handle = q.sessions().get(&s.session_id).unwrap();
    {
        let restored = handle.lock().unwrap();
        assert_eq!(restored.history, before);
        assert_eq!(restored.base_face_id, s.base_face_id);
        assert_eq!(restored.history[1].text, first.text);
    }
    q.respond(&s.session_id, LINES[1], None).unwrap();
    assert_eq!(handle.lock().unwrap().history.len(), 4);
}
