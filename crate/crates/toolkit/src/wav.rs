//! WAV reading and writing at 16 kHz.

use std::path::Path;

use hound::{SampleFormat, WavSpec};
use lmfca_core::dsp::{Waveform, SAMPLE_RATE};

use crate::error::{Result, ToolkitError};

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Reads a 16-bit PCM or 32-bit float WAV. Other rates are rejected.
pub fn read_wav(path: &Path) -> Result<Waveform<f32>> {
    let mut r = hound::WavReader::open(path).map_err(|e| ToolkitError::wav(path, e))?;
    let spec = r.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(ToolkitError::SampleRate {
            path: path.to_path_buf(),
            rate: spec.sample_rate,
        });
    }
    let m = spec.channels as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => r
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| ToolkitError::wav(path, e))?,
        (SampleFormat::Float, 32) => r
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| ToolkitError::wav(path, e))?,
        (f, b) => {
            return Err(ToolkitError::Format(format!(
                "{}: unsupported sample format {f:?}/{b} bit",
                path.display()
            )))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / m.max(1)); m];
    for frame in interleaved.chunks_exact(m) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    let w = Waveform::new(channels, SAMPLE_RATE);
    w.validate()?;
    Ok(w)
}

pub fn write_wav(path: &Path, w: &Waveform<f32>, format: WavFormat) -> Result<()> {
    let spec = WavSpec {
        channels: w.num_channels() as u16,
        sample_rate: w.sample_rate,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut wr = hound::WavWriter::create(path, spec).map_err(|e| ToolkitError::wav(path, e))?;
    for i in 0..w.len() {
        for c in &w.channels {
            match format {
                WavFormat::Pcm16 => {
                    let v = (c[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    wr.write_sample(v)
                }
                WavFormat::Float32 => wr.write_sample(c[i]),
            }
            .map_err(|e| ToolkitError::wav(path, e))?;
        }
    }
    wr.finalize().map_err(|e| ToolkitError::wav(path, e))
}
