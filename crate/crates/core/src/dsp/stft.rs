use std::f64::consts::PI;

use rustfft::num_complex::{Complex, Complex64};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann, `sin^2(pi n / N)`.
    #[default]
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| {
                    let s = (PI * n as f64 / len as f64).sin();
                    s * s
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_size: usize,
    #[serde(default)]
    pub window: Window,
}

impl Default for StftConfig {
    /// 32 ms frames with a 16 ms hop at 16 kHz.
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            fft_size: 512,
            hop_size: 256,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(config_err("stft.sample_rate must be positive"));
        }
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(config_err(format!(
                "stft.fft_size must be a power of two >= 2, got {}",
                self.fft_size
            )));
        }
        if self.hop_size == 0 || self.hop_size > self.fft_size {
            return Err(config_err(format!(
                "stft.hop_size must be in 1..={}, got {}",
                self.fft_size, self.hop_size
            )));
        }
        // Hann overlap-adds to a constant exactly when the hop divides the
        // frame into at least two pieces.
        if !self.fft_size.is_multiple_of(self.hop_size) || self.fft_size / self.hop_size < 2 {
            return Err(config_err(format!(
                "stft.hop_size {} does not give constant overlap-add for a {}-point Hann window",
                self.hop_size, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frame count produced by [`stft`] for a signal of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        1 + len.max(1) / self.hop_size
    }

    pub fn samples_for_seconds(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate as f64).round() as usize
    }
}

/// Complex time-frequency matrix stored bin-major: `data[bin * frames + frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(bins: usize, frames: usize) -> Self {
        Self {
            bins,
            frames,
            data: vec![Complex64::new(0.0, 0.0); bins * frames],
        }
    }

    pub fn from_vec(bins: usize, frames: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != bins * frames {
            return Err(shape_err(format!(
                "spectrogram data has {} values, expected {bins} x {frames}",
                data.len()
            )));
        }
        Ok(Self { bins, frames, data })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }

    pub fn set(&mut self, bin: usize, frame: usize, value: Complex64) {
        self.data[bin * self.frames + frame] = value;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.bins == other.bins && self.frames == other.frames
    }
}

fn pad_signal(signal: &[f32], pad: usize) -> Vec<f64> {
    let len = signal.len();
    let mut out = vec![0.0f64; len + 2 * pad];
    for (dst, &s) in out[pad..pad + len].iter_mut().zip(signal) {
        *dst = s as f64;
    }
    // Reflection needs `pad` samples on each side of the edge sample; shorter
    // signals are zero-padded instead.
    if len > pad {
        for i in 0..pad {
            out[pad - 1 - i] = signal[i + 1] as f64;
            out[pad + len + i] = signal[len - 2 - i] as f64;
        }
    }
    out
}

/// Short-time Fourier transform with centred frames.
///
/// The signal is reflect-padded by `fft_size / 2` on both sides, giving
/// `1 + len / hop` frames of `fft_size / 2 + 1` bins.
pub fn stft(signal: &[f32], cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    if let Some(pos) = signal.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite sample at index {pos}"
        )));
    }
    let n = cfg.fft_size;
    let bins = cfg.bins();
    let frames = cfg.frames_for(signal.len());
    let padded = pad_signal(signal, n / 2);
    let window = cfg.window.coefficients(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let mut spec = ComplexSpectrogram::zeros(bins, frames);
    let mut buf = vec![Complex::new(0.0f64, 0.0); n];
    for t in 0..frames {
        let start = t * cfg.hop_size;
        for (i, b) in buf.iter_mut().enumerate() {
            let s = padded.get(start + i).copied().unwrap_or(0.0);
            *b = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (f, v) in buf[..bins].iter().enumerate() {
            spec.set(f, t, *v);
        }
    }
    Ok(spec)
}

/// Inverse of [`stft`] by windowed overlap-add, normalized by the summed
/// squared window. The result is cropped or zero-extended to `out_len`.
pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig, out_len: usize) -> Result<Vec<f32>> {
    cfg.validate()?;
    let n = cfg.fft_size;
    if spec.bins() != cfg.bins() {
        return Err(config_err(format!(
            "spectrogram has {} bins but fft_size {} needs {}",
            spec.bins(),
            n,
            cfg.bins()
        )));
    }
    let frames = spec.frames();
    let window = cfg.window.coefficients(n);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let total = (frames.saturating_sub(1)) * cfg.hop_size + n;
    let mut acc = vec![0.0f64; total];
    let mut norm = vec![0.0f64; total];
    let mut buf = vec![Complex::new(0.0f64, 0.0); n];
    let half = n / 2;
    for t in 0..frames {
        for f in 0..=half {
            let v = spec.get(f, t);
            let c = v;
            if f == 0 || f == half {
                buf[f] = Complex::new(c.re, 0.0);
            } else {
                buf[f] = c;
                buf[n - f] = c.conj();
            }
        }
        ifft.process(&mut buf);
        let start = t * cfg.hop_size;
        for i in 0..n {
            let y = buf[i].re / n as f64;
            acc[start + i] += y * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    let mut out = vec![0.0f32; out_len];
    for (i, o) in out.iter_mut().enumerate() {
        let j = i + half;
        if j < total && norm[j] > 1e-11 {
            *o = (acc[j] / norm[j]) as f32;
        }
    }
    Ok(out)
}
