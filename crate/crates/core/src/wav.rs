//! WAV reading and writing. Multi-channel input is averaged down to mono.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::invalid(format!(
                "unsupported WAV sample format {fmt:?} with {bits} bits"
            )))
        }
    };
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::invalid("WAV file declares zero channels"));
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|c| c.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Waveform::new(mono, spec.sample_rate)
}

pub fn write_wav(path: impl AsRef<Path>, signal: &Waveform, format: WavFormat) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in signal.samples() {
        match format {
            WavFormat::Pcm16 => {
                let v = (s * 32768.0)
                    .round()
                    .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
                writer.write_sample(v)?;
            }
            WavFormat::Float32 => writer.write_sample(s as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}
