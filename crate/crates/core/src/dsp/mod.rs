//! Signal processing: STFT, input features, complex ratio masks and
//! segmentation.

mod fft;
mod mask;
mod segment;
mod stft;

pub use fft::{convolve, Fft};
pub use mask::{apply_mask, apply_mask_and_reconstruct, compute_cirm, normalize_and_stack, CirmParams};
pub use segment::{padded_len, segment_and_pad, segment_len, trim_and_join, Segment};
pub use stft::{frame_count, hann_periodic, istft, stft, Stft, HOP, N_BINS, WIN_LEN};

use alloc::vec::Vec;

use crate::error::{contract, Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const SAMPLE_RATE: u32 = 16_000;

/// Zero-based reference microphone of the six-channel array.
pub const REF_CHANNEL: usize = 4;

/// Reference channel for an `m`-microphone input (channel 0 when the array
/// has too few channels, e.g. mono).
pub fn reference_channel(m: usize) -> usize {
    if m > REF_CHANNEL {
        REF_CHANNEL
    } else {
        0
    }
}

/// Largest sample magnitude accepted at pipeline entry points.
pub const CLIP_GUARD: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<S> {
    pub channels: Vec<Vec<S>>,
    pub sample_rate: u32,
}

impl<S: Real> Waveform<S> {
    pub fn new(channels: Vec<Vec<S>>, sample_rate: u32) -> Self {
        Self {
            channels,
            sample_rate,
        }
    }

    pub fn mono(samples: Vec<S>) -> Self {
        Self::new(alloc::vec![samples], SAMPLE_RATE)
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, i: usize) -> &[S] {
        &self.channels[i]
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Checks the entry-point invariants: 16 kHz, equal channel lengths,
    /// finite samples within the clip guard.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(contract(
                "waveform",
                alloc::format!("sample rate {} Hz, expected {SAMPLE_RATE}", self.sample_rate),
            ));
        }
        let n = self.len();
        if self.channels.iter().any(|c| c.len() != n) {
            return Err(contract("waveform", "channels differ in length"));
        }
        let guard = S::of(CLIP_GUARD);
        if self
            .channels
            .iter()
            .flatten()
            .any(|v| !v.is_finite() || v.abs() > guard)
        {
            return Err(Error::Degenerate("sample out of range or non-finite"));
        }
        Ok(())
    }

    pub fn cast<T: Real>(&self) -> Waveform<T> {
        Waveform {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| T::of(v.f64())).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Complex STFT stored as two `F×T×M` planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram<S> {
    pub re: Tensor<S>,
    pub im: Tensor<S>,
}

impl<S: Real> ComplexSpectrogram<S> {
    pub fn new(re: Tensor<S>, im: Tensor<S>) -> Result<Self> {
        re.dims3("spectrogram")?;
        if re.shape() != im.shape() {
            return Err(contract("spectrogram", "real and imaginary planes differ in shape"));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(f: usize, t: usize, m: usize) -> Self {
        Self {
            re: Tensor::zeros(&[f, t, m]),
            im: Tensor::zeros(&[f, t, m]),
        }
    }

    /// `(F, T, M)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.re.shape();
        (s[0], s[1], s[2])
    }

    pub fn channel(&self, c: usize) -> Result<Self> {
        Ok(Self {
            re: self.re.channels(c, c + 1)?,
            im: self.im.channels(c, c + 1)?,
        })
    }

    /// Bin-major `F×T` planes of one channel.
    pub fn channel_planes(&self, c: usize) -> (Vec<S>, Vec<S>) {
        let (_, _, m) = self.dims();
        let re = self.re.data().iter().skip(c).step_by(m).copied().collect();
        let im = self.im.data().iter().skip(c).step_by(m).copied().collect();
        (re, im)
    }

    pub fn scaled(&self, k: S) -> Self {
        Self {
            re: self.re.map(|v| v * k),
            im: self.im.map(|v| v * k),
        }
    }
}

/// Real and imaginary mask planes, each `F×T×1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair<S> {
    pub re: Tensor<S>,
    pub im: Tensor<S>,
}

impl<S: Real> MaskPair<S> {
    pub fn unit(f: usize, t: usize) -> Self {
        Self {
            re: Tensor::full(&[f, t, 1], S::one()),
            im: Tensor::zeros(&[f, t, 1]),
        }
    }

    /// Splits an `F×T×2` network output (`[re, im]` per bin).
    pub fn from_stacked(x: &Tensor<S>) -> Result<Self> {
        let (f, t, c) = x.dims3("mask")?;
        if c != 2 {
            return Err(contract("mask", "stacked mask needs exactly two channels"));
        }
        let re = x.data().iter().step_by(2).copied().collect();
        let im = x.data().iter().skip(1).step_by(2).copied().collect();
        Ok(Self {
            re: Tensor::new(&[f, t, 1], re)?,
            im: Tensor::new(&[f, t, 1], im)?,
        })
    }

    pub fn to_stacked(&self) -> Tensor<S> {
        let s = self.re.shape();
        let mut d = Vec::with_capacity(2 * self.re.len());
        for (&r, &i) in self.re.data().iter().zip(self.im.data()) {
            d.push(r);
            d.push(i);
        }
        Tensor::new(&[s[0], s[1], 2], d).expect("mask planes are F×T×1")
    }

    pub fn magnitudes(&self) -> Vec<S> {
        self.re
            .data()
            .iter()
            .zip(self.im.data())
            .map(|(&r, &i)| (r * r + i * i).sqrt())
            .collect()
    }
}
