//! Conversion network and its training.
//!
//! Input rows are `[L | f0 | vuv]` in baseline mode and `[L | f0 | vuv | P]`
//! in proposed mode, where `P` is the reference encoder's per-frame output
//! for the same utterance's mel spectrogram. The CBHG maps rows to the
//! 32-dimensional acoustic features.

mod cbhg;
mod config;
mod conversion;
mod input;
mod ref_encoder;
mod train;

pub use cbhg::{Cbhg, CbhgCache};
pub use config::{CbhgConfig, Mode, ModelConfig, RefEncoderConfig, TrainConfig};
pub use conversion::{ConversionCache, ConversionModel, ModelInputs};
pub use input::{assemble_input, encode_f0, InputFeatureMatrix, ProsodyEmbedding};
pub use ref_encoder::{ReferenceEncoder, ReferenceEncoderCache};
pub use train::{reconstruction_loss, StepStats, Trainer, TrainingExample};
