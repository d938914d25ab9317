//! Files, pipeline and command line around [`prosovc_core`].
//!
//! * [`wav`]: 16-bit PCM mono WAV IO.
//! * [`cache`]: the binary feature cache keyed by utterance, kind and extraction-config hash.
//! * [`checkpoint`]: self-describing model files with optimiser state.
//! * [`config`]: the TOML run configuration.
//! * [`stats`]: speaker pitch-statistics files.
//! * [`pipeline`]: extract, train, convert, and the toy corpus writer.
//! * [`report`]: objective evaluation, text report, plots, vocoder benchmark.

pub mod cache;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod stats;
pub mod wav;

pub use error::{Error, Result};
pub use prosovc_core as core;
