//! Splitting long signals into clips whose frame count is a multiple of 8.

use alloc::vec::Vec;

use num_traits::Float;

use super::stft::{frame_count, HOP};
use super::{Waveform, SAMPLE_RATE};
use crate::scalar::Real;

/// Smallest length `≥ len` whose STFT frame count is a multiple of 8.
pub fn padded_len(len: usize) -> usize {
    if frame_count(len) % 8 == 0 {
        return len;
    }
    let frames = frame_count(len).div_ceil(8) * 8;
    HOP * (frames - 1)
}

/// Clip length for roughly `seconds` of audio, rounded up to a whole
/// multiple-of-8 frame count.
pub fn segment_len(seconds: f64) -> usize {
    let target = Float::max(Float::round(seconds * SAMPLE_RATE as f64), 1.0) as usize;
    let frames = frame_count(target).div_ceil(8) * 8;
    HOP * (frames - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment<S> {
    /// Padded clip, all channels.
    pub wave: Waveform<S>,
    /// Number of original (unpadded) samples.
    pub valid: usize,
}

/// Cuts `w` into consecutive clips of [`segment_len`] samples; the tail clip
/// is zero-padded to [`padded_len`].
pub fn segment_and_pad<S: Real>(w: &Waveform<S>, seconds: f64) -> Vec<Segment<S>> {
    let n = w.len();
    let seg = segment_len(seconds);
    let mut out = Vec::new();
    let mut start = 0;
    while start < n || (n == 0 && out.is_empty()) {
        let end = (start + seg).min(n);
        let valid = end - start;
        let plen = padded_len(valid).max(HOP + 1);
        let channels = w
            .channels
            .iter()
            .map(|c| {
                let mut v = c[start..end].to_vec();
                v.resize(plen, S::zero());
                v
            })
            .collect();
        out.push(Segment {
            wave: Waveform::new(channels, w.sample_rate),
            valid,
        });
        if n == 0 {
            break;
        }
        start = end;
    }
    out
}

/// Drops the padding of every clip and concatenates channel-wise.
pub fn trim_and_join<S: Real>(clips: &[(Waveform<S>, usize)]) -> Waveform<S> {
    let m = clips.first().map_or(1, |c| c.0.num_channels());
    let rate = clips.first().map_or(SAMPLE_RATE, |c| c.0.sample_rate);
    let mut channels: Vec<Vec<S>> = (0..m).map(|_| Vec::new()).collect();
    for (w, valid) in clips {
        for (dst, src) in channels.iter_mut().zip(&w.channels) {
            dst.extend_from_slice(&src[..*valid]);
        }
    }
    Waveform::new(channels, rate)
}
