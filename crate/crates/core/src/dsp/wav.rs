//! Mono WAV input and output (16-bit PCM or 32-bit float).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone)]
pub struct WavAudio {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub encoding: WavEncoding,
}

fn hound_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::AudioFormat(other.to_string()),
    }
}

/// Reads a mono file at `expected_rate`; anything else is rejected.
pub fn read_wav(path: impl AsRef<Path>, expected_rate: u32) -> Result<WavAudio> {
    let reader = WavReader::open(path.as_ref()).map_err(hound_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::AudioFormat(format!(
            "mono required, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_rate != expected_rate {
        return Err(Error::AudioFormat(format!(
            "sample rate {} Hz not supported, expected {} Hz",
            spec.sample_rate, expected_rate
        )));
    }
    let (samples, encoding) = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => {
            let s = reader
                .into_samples::<i16>()
                .map(|s| s.map(|v| v as f32 / 32768.0))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(hound_err)?;
            (s, WavEncoding::Pcm16)
        }
        (SampleFormat::Float, 32) => {
            let s = reader
                .into_samples::<f32>()
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(hound_err)?;
            (s, WavEncoding::Float32)
        }
        (fmt, bits) => {
            return Err(Error::AudioFormat(format!(
                "unsupported sample encoding {fmt:?} {bits}-bit, expected PCM16 or float32"
            )))
        }
    };
    Ok(WavAudio {
        samples,
        sample_rate: spec.sample_rate,
        encoding,
    })
}

pub fn write_wav(
    path: impl AsRef<Path>,
    samples: &[f32],
    sample_rate: u32,
    encoding: WavEncoding,
) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path.as_ref(), spec).map_err(hound_err)?;
    for &s in samples {
        match encoding {
            WavEncoding::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(v).map_err(hound_err)?;
            }
            WavEncoding::Float32 => writer.write_sample(s).map_err(hound_err)?,
        }
    }
    writer.finalize().map_err(hound_err)
}
