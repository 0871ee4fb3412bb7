//! Context to reply text, emotion, AU target and face, with sessions and
//! an HTTP front end.

mod config;
pub mod http;
mod service;
mod session;

pub use config::{BaseFacePolicy, PipelineConfig, SEED_ENV};
pub use service::{
    load_base_faces, synthesize_face, BaseFace, FaceTarget, Pipeline, PipelineOptions, Reply, StageLatency,
};
pub use session::{Session, SessionStore};
