//! Signal processing, neural models and an LPC vocoder for any-to-one voice
//! conversion driven by phonetic posteriorgrams, pitch and per-frame prosody
//! embeddings.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, audio IO and the
//! command line live in the `prosovc` companion crate.
//!
//! Module map:
//!
//! * [`dsp`]: framing, mel and Bark cepstral analysis, pitch tracking, linear prediction.
//! * [`augment`]: WSOLA speed perturbation and manifest expansion.
//! * [`pitchstats`]: speaker log-f0 statistics and the linear log-f0 mapping.
//! * [`ppg`]: posteriorgram validation and a small frame-level phone classifier.
//! * [`nn`]: layers with hand-written backward passes, Adam, gradient clipping.
//! * [`models`]: reference encoder, CBHG conversion network, input assembly, training.
//! * [`vocoder`]: mixed-excitation LPC synthesis, batch and streaming.
//! * [`eval`]: mel-cepstral distortion with DTW, f0 and voicing metrics.
//! * [`toy`]: a deterministic formant synthesizer producing labelled speech-like corpora.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod augment;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod models;
pub mod nn;
pub mod pitchstats;
pub mod ppg;
pub mod toy;
pub mod vocoder;
pub mod waveform;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use waveform::Waveform;
