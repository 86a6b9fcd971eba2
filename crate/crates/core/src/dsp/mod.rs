//! Waveform and spectrogram conversion, WAV I/O and observation adding.

mod oa;
mod stft;
pub mod wav;

pub use oa::{observation_add, OaConfig};
pub use rustfft::num_complex::Complex64;
pub use stft::{istft, stft, ComplexSpectrogram, StftConfig, Window};
