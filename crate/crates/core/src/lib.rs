//! Emotion-aware dialogue responses rendered as facial expressions.
//!
//! A recurrent encoder-decoder produces the reply text and its emotion, a
//! lookup table turns the emotion into Action Unit targets, and an
//! attention-masked conditional GAN edits a neutral face to match them.

pub mod au;
pub mod bridge;
pub mod data;
pub mod error;
pub mod face;
pub mod nlg;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
