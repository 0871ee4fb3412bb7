//! Attention-masked conditional GAN for Action Unit driven face editing.

mod checkpoint;
mod config;
mod image;
mod losses;
mod model;
mod train;

pub use checkpoint::{FaceCheckpoint, FaceManifest};
pub use config::{AttentionNormSign, FaceGanConfig, GanHyperParams};
pub use image::FaceImage;
pub use losses::{
    adversarial_loss, attention_loss, attention_term, check_finite, combine, condition_loss, condition_residual,
    cycle_loss, full_objective, gradient_penalty, interpolate, total_variation, AdversarialLoss, LossParts,
};
pub use model::{compose, Critic, CriticOutput, Generator, MaskPair};
pub use train::{condition_error, edit_face, permuted_targets, FaceBatch, FaceDataset, FaceGan, StepMetrics};
