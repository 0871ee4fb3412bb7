use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use emoface::bridge::{validate_table, AuBridge, AuMappingTable};
use emoface::data::{prepare, write_dialogues, FaceRecord, PrepConfig, PreparedData};
use emoface::face::{FaceCheckpoint, FaceDataset, FaceGan, FaceGanConfig, FaceImage};
use emoface::nlg::{evaluate, train_nlg, NlgCheckpoint, NlgModel, NlgTrainConfig};
use emoface::pipeline::{http, synthesize_face, FaceTarget, Pipeline, PipelineConfig};
use emoface::synth;

#[derive(Parser)]
#[command(name = "emoface", version, about = "Emotion-aware dialogue replies with synthesized faces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split and encode the raw corpora.
    Prep {
        #[arg(long)]
        dialogues: PathBuf,
        /// Face directory with index.csv and the images.
        #[arg(long)]
        faces: PathBuf,
        /// AU intensity CSV (defaults to au.csv in the face directory).
        #[arg(long)]
        au: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON preparation settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the dialogue model on prepared data.
    TrainNlg {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Train on every split (for overfitting runs).
        #[arg(long)]
        all_splits: bool,
    },
    /// Perplexity and emotion accuracy of a checkpoint on one split.
    EvalNlg {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Check an emotion to AU table; exits non-zero on violations.
    ValidateAuTable { file: PathBuf },
    /// Train the face generator.
    TrainFace {
        /// Prepared data directory (train split) or a face directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Progress line every this many steps.
        #[arg(long, default_value_t = 50)]
        log_every: usize,
    },
    /// Edit one face towards an emotion or an AU vector.
    Synthesize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Emotion name or JSON object such as '{"AU12": 0.8}'.
        #[arg(long)]
        au: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        au_table: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Chat on the terminal, writing the agent's face for every turn.
    Chat {
        #[arg(long)]
        config: PathBuf,
        /// Base face id or "random".
        #[arg(long, default_value = "random")]
        face: String,
        #[arg(long, default_value = "chat_faces")]
        out_dir: PathBuf,
    },
    /// Write the synthetic dialogue and face corpora.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Prep {
            dialogues,
            faces,
            au,
            out,
            seed,
            config,
        } => {
            let mut cfg: PrepConfig = match config {
                Some(p) => read_json(&p)?,
                None => PrepConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let au = au.unwrap_or_else(|| faces.join("au.csv"));
            let manifest = prepare(&dialogues, &faces, &au, &out, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::TrainNlg {
            data,
            config,
            out,
            all_splits,
        } => train_nlg_cmd(&data, config.as_deref(), &out, all_splits)?,
        Command::EvalNlg { checkpoint, data, split } => {
            let ckpt = NlgCheckpoint::load(&checkpoint)?;
            let data = PreparedData::load(&data)?;
            if data.vocab.hash() != ckpt.manifest.vocab_hash {
                bail!("prepared data and checkpoint use different vocabularies");
            }
            let examples = match split.as_str() {
                "train" => data.train(),
                "valid" => data.valid(),
                "test" => data.test(),
                other => bail!("unknown split {other:?} (train, valid or test)"),
            };
            let eval = evaluate(&ckpt.model, examples, 64)?;
            println!("{}", serde_json::to_string_pretty(&eval)?);
        }
        Command::ValidateAuTable { file } => {
            let table = AuMappingTable::load(&file)?;
            let violations = validate_table(&table);
            if violations.is_empty() {
                println!("{}: ok", file.display());
            } else {
                for v in &violations {
                    println!("{v}");
                }
                bail!("{} violation(s) in {}", violations.len(), file.display());
            }
        }
        Command::TrainFace {
            data,
            config,
            out,
            log_every,
        } => train_face_cmd(&data, config.as_deref(), &out, log_every)?,
        Command::Synthesize {
            checkpoint,
            image,
            au,
            out,
            au_table,
        } => {
            let face = FaceCheckpoint::load(&checkpoint)?;
            let bridge = match au_table {
                Some(p) => AuBridge::load(&p)?,
                None => AuBridge::default(),
            };
            let target: FaceTarget = au.parse()?;
            let base = FaceImage::load_png(&image)?;
            let (z, edited) = synthesize_face(&face, &bridge, &base, &target)?;
            edited.save_png(&out)?;
            println!("{}", serde_json::to_string(&z.to_named())?);
        }
        Command::Serve { config, port, host } => {
            let pipeline = Arc::new(load_pipeline(&config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let addr = SocketAddr::new(host, port);
                let listener = http::bind(addr).await?;
                eprintln!("listening on http://{addr}");
                http::serve(listener, pipeline).await
            })?;
        }
        Command::Chat { config, face, out_dir } => chat_cmd(&config, &face, &out_dir)?,
        Command::SynthData { out, size } => {
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_dialogues(&out.join("dialogues.jsonl"), &synth::synthetic_dialogues()?)?;
            synth::write_faces(&out.join("faces"), &synth::full_faces(size))?;
            synth::write_faces(&out.join("overfit16"), &synth::overfit_faces(size))?;
            println!("wrote synthetic corpora to {}", out.display());
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_metrics<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn train_nlg_cmd(data: &Path, config: Option<&Path>, out: &Path, all_splits: bool) -> Result<()> {
    let cfg: NlgTrainConfig = match config {
        Some(p) => read_json(p)?,
        None => NlgTrainConfig::default(),
    };
    let data = PreparedData::load(data)?;
    let mut model_cfg = cfg.model.clone();
    if model_cfg.vocab_size == 0 {
        model_cfg.vocab_size = data.vocab.len();
    } else if model_cfg.vocab_size != data.vocab.len() {
        bail!(
            "config vocab_size {} differs from the prepared vocabulary ({})",
            model_cfg.vocab_size,
            data.vocab.len()
        );
    }
    let examples = if all_splits {
        data.examples.concat()
    } else {
        data.train().to_vec()
    };
    let mut model = NlgModel::new(model_cfg, &mut ChaCha8Rng::seed_from_u64(cfg.train.seed))?;
    let epochs = cfg.train.epochs;
    let history = train_nlg(&mut model, &examples, &cfg.train, |m| {
        eprintln!(
            "epoch {}/{epochs} loss {:.4} seq {:.4} emo {:.4} tf {:.2}",
            m.epoch + 1,
            m.loss,
            m.seq_ce,
            m.emo_ce,
            m.teacher_forcing
        );
    })?;
    let mut ckpt = NlgCheckpoint::new(model, data.vocab.clone(), data.manifest.config.encode, epochs, cfg.train.seed)?;
    ckpt.save(out)?;
    write_metrics(&out.join("metrics.jsonl"), &history)?;
    if !data.valid().is_empty() {
        let eval = evaluate(&ckpt.model, data.valid(), 64)?;
        println!("{}", serde_json::to_string_pretty(&eval)?);
    }
    Ok(())
}

/// Face records and their directory: a prepared data directory gives its
/// training faces, anything else is read as a face directory.
fn face_records(data: &Path) -> Result<(Vec<FaceRecord>, PathBuf)> {
    if data.join("manifest.json").exists() {
        let prepared = PreparedData::load(data)?;
        Ok((prepared.faces[0].clone(), prepared.manifest.faces_root.clone()))
    } else {
        let records = emoface::data::load_face_corpus(&data.join("index.csv"), &data.join("au.csv"))?;
        Ok((records, data.to_path_buf()))
    }
}

fn train_face_cmd(data: &Path, config: Option<&Path>, out: &Path, log_every: usize) -> Result<()> {
    let cfg: FaceGanConfig = match config {
        Some(p) => read_json(p)?,
        None => FaceGanConfig::default(),
    };
    let (records, root) = face_records(data)?;
    if records.is_empty() {
        bail!("no training faces in {}", data.display());
    }
    let images = records
        .iter()
        .map(|r| FaceImage::load_png(&root.join(&r.image_path)))
        .collect::<emoface::Result<Vec<_>>>()?;
    if let Some(img) = images.iter().find(|i| i.size() != cfg.image_size) {
        bail!("faces are {}px but the config expects {}px", img.size(), cfg.image_size);
    }
    let dataset = FaceDataset::new(images, records.iter().map(|r| r.au.clone()).collect())?;
    let mut gan = FaceGan::new(cfg.clone())?;
    let steps = cfg.steps;
    let history = gan.train(&dataset, steps, |m| {
        if (m.step + 1) % log_every.max(1) == 0 || m.step + 1 == steps {
            eprintln!(
                "step {}/{steps} critic {:.4} gp {:.4} gen {:.4} cond {:.4} cycle {:.4} attn {:.3}",
                m.step + 1,
                m.critic_loss,
                m.gradient_penalty,
                m.generator_loss,
                m.generator.condition,
                m.generator.cycle,
                m.attention_mean
            );
        }
    })?;
    let mut ckpt = FaceCheckpoint::from_gan(&gan);
    ckpt.save(out)?;
    write_metrics(&out.join("metrics.jsonl"), &history)?;
    println!("saved face checkpoint to {}", out.display());
    Ok(())
}

fn load_pipeline(config: &Path) -> Result<Pipeline> {
    let mut cfg = PipelineConfig::load(config)?;
    cfg.apply_env()?;
    Ok(Pipeline::from_config(&cfg)?)
}

fn chat_cmd(config: &Path, face: &str, out_dir: &Path) -> Result<()> {
    let pipeline = load_pipeline(config)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let session = pipeline.create_session(Some(face))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "face: {}", session.base_face_id)?;
    session.base_face.save_png(&out_dir.join("base.png"))?;
    let mut turn = 0;
    for line in std::io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match pipeline.respond(&session.session_id, &line, None) {
            Ok(r) => r,
            Err(emoface::Error::Validation(msg)) => {
                writeln!(out, "! {msg}")?;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        turn += 1;
        let path = out_dir.join(format!("turn_{turn:03}.png"));
        reply.face.save_png(&path)?;
        writeln!(out, "agent [{}]: {}", reply.emotion, reply.text)?;
        out.flush()?;
    }
    Ok(())
}
