//! Deterministic signal analysis shared by feature extraction and the vocoder.
//!
//! All frame-based analyses sit on the same grid: frame `t` is centred on
//! sample `t * hop` and a signal of `n` samples yields `n / hop + 1` frames.

mod acoustic;
mod analysis;
mod dct;
mod fft;
mod filterbank;
mod frame;
mod lpc;
mod pitch;

pub use acoustic::{
    assemble_acoustic, denormalize_period, normalize_period, AcousticFeatures, ACOUSTIC_DIM,
    CORRELATION_COL, PERIOD_COL,
};
pub use analysis::{bfcc, stft_mel, Analyzer, MelSpectrogram, BFCC_DIM, LOG_FLOOR, MEL_DIM};
pub use dct::Dct;
pub use fft::Fft;
pub use filterbank::{bark_to_hz, hz_to_bark, hz_to_mel, mel_to_hz, Filterbank};
pub use frame::{FrameSpec, PowerSpectrogram, Stft, HOP_S};
pub use lpc::{
    autocorrelation, bfcc_to_lpc, levinson_durbin, reflection_to_predictor, BfccToLpc,
    LpcCoefficients, LPC_ORDER,
};
pub use pitch::{track_pitch, track_pitch_with, PitchConfig, PitchTrack, F0_MAX_HZ, F0_MIN_HZ};
