//! Multi-task recurrent encoder-decoder: response tokens plus emotion.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{NlgCheckpoint, NlgManifest};
pub use model::{DecoderState, EncoderOutput, GenerateOptions, NlgConfig, NlgModel, NlgPrediction};
pub use train::{
    emotion_cross_entropy, evaluate, nlg_loss, sequence_cross_entropy, train_epoch, train_nlg, EpochMetrics,
    NlgEval, NlgLoss, NlgTrainConfig, TeacherForcingSchedule, TrainOptions,
};
