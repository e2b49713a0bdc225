//! STFT analysis and weighted overlap-add synthesis.
//!
//! Periodic Hann window of 510 samples, hop 255, centered frames with
//! reflect padding. Synthesis divides by the squared-window envelope, which
//! makes `istft(stft(x)) == x` for any signal longer than half a window.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;
use num_traits::Float;

use super::fft::Fft;
use super::{ComplexSpectrogram, Waveform, SAMPLE_RATE};
use crate::error::{contract, Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const WIN_LEN: usize = 510;
pub const HOP: usize = 255;
pub const N_BINS: usize = WIN_LEN / 2 + 1;

/// Number of centered frames for a signal of `len` samples.
pub const fn frame_count(len: usize) -> usize {
    1 + len / HOP
}

pub fn hann_periodic<S: Real>(n: usize) -> Vec<S> {
    (0..n)
        .map(|i| {
            let a = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
            S::of(0.5 - 0.5 * Float::cos(a))
        })
        .collect()
}

/// Reusable analysis/synthesis state (FFT plan and window).
pub struct Stft<S> {
    fft: Fft<S>,
    window: Vec<S>,
}

impl<S: Real> Default for Stft<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> Stft<S> {
    pub fn new() -> Self {
        Self {
            fft: Fft::new(WIN_LEN),
            window: hann_periodic(WIN_LEN),
        }
    }

    pub fn window(&self) -> &[S] {
        &self.window
    }

    /// One channel → `(re, im)` laid out `F×T` (bin-major).
    pub fn analyze(&self, x: &[S]) -> Result<(Vec<S>, Vec<S>, usize)> {
        let pad = WIN_LEN / 2;
        if x.is_empty() {
            return Err(contract("stft", "empty signal"));
        }
        if x.len() <= pad {
            return Err(contract(
                "stft",
                alloc::format!("signal of {} samples is shorter than the reflect padding", x.len()),
            ));
        }
        let n = x.len();
        let mut padded = Vec::with_capacity(n + 2 * pad);
        padded.extend((1..=pad).rev().map(|i| x[i]));
        padded.extend_from_slice(x);
        padded.extend((0..pad).map(|i| x[n - 2 - i]));
        let frames = frame_count(n);
        let mut re = vec![S::zero(); N_BINS * frames];
        let mut im = vec![S::zero(); N_BINS * frames];
        let mut frame = vec![S::zero(); WIN_LEN];
        for t in 0..frames {
            let seg = &padded[t * HOP..t * HOP + WIN_LEN];
            for ((d, &s), &w) in frame.iter_mut().zip(seg).zip(&self.window) {
                *d = s * w;
            }
            for (k, v) in self.fft.rfft(&frame).into_iter().enumerate() {
                re[k * frames + t] = v.re;
                im[k * frames + t] = v.im;
            }
        }
        Ok((re, im, frames))
    }

    /// Squared-window envelope over the padded timeline.
    fn envelope(&self, frames: usize) -> Vec<S> {
        let mut env = vec![S::zero(); (frames - 1) * HOP + WIN_LEN];
        for t in 0..frames {
            for (e, &w) in env[t * HOP..].iter_mut().zip(&self.window) {
                *e += w * w;
            }
        }
        env
    }

    /// `F×T` bin-major spectrum → `len` samples.
    pub fn synthesize(&self, re: &[S], im: &[S], frames: usize, len: usize) -> Vec<S> {
        let pad = WIN_LEN / 2;
        let env = self.envelope(frames);
        let mut acc = vec![S::zero(); env.len()];
        let mut bins = vec![Complex::new(S::zero(), S::zero()); N_BINS];
        for t in 0..frames {
            for (k, b) in bins.iter_mut().enumerate() {
                *b = Complex::new(re[k * frames + t], im[k * frames + t]);
            }
            let y = self.fft.irfft(&bins);
            for ((a, &v), &w) in acc[t * HOP..].iter_mut().zip(&y).zip(&self.window) {
                *a += v * w;
            }
        }
        let tiny = S::of(1e-11);
        (0..len)
            .map(|i| {
                let p = i + pad;
                if p < env.len() && env[p] > tiny {
                    acc[p] / env[p]
                } else {
                    S::zero()
                }
            })
            .collect()
    }

    /// Adjoint of [`Self::synthesize`]: maps a gradient on the output samples
    /// back to gradients on the real and imaginary bins.
    pub fn synthesize_adjoint(&self, grad: &[S], frames: usize) -> (Vec<S>, Vec<S>) {
        let pad = WIN_LEN / 2;
        let env = self.envelope(frames);
        let tiny = S::of(1e-11);
        let mut scaled = vec![S::zero(); env.len()];
        for (i, &g) in grad.iter().enumerate() {
            let p = i + pad;
            if p < env.len() && env[p] > tiny {
                scaled[p] = g / env[p];
            }
        }
        let n = S::of(WIN_LEN as f64);
        let mut dre = vec![S::zero(); N_BINS * frames];
        let mut dim = vec![S::zero(); N_BINS * frames];
        let mut frame = vec![S::zero(); WIN_LEN];
        for t in 0..frames {
            for ((d, &s), &w) in frame.iter_mut().zip(&scaled[t * HOP..]).zip(&self.window) {
                *d = s * w;
            }
            for (k, v) in self.fft.rfft(&frame).into_iter().enumerate() {
                let c = if k == 0 || k == N_BINS - 1 { S::one() } else { S::of(2.0) } / n;
                dre[k * frames + t] = v.re * c;
                dim[k * frames + t] = v.im * c;
            }
        }
        (dre, dim)
    }
}

/// Multi-channel STFT. Requires 16 kHz input.
pub fn stft<S: Real>(w: &Waveform<S>) -> Result<ComplexSpectrogram<S>> {
    if w.sample_rate != SAMPLE_RATE {
        return Err(contract(
            "stft",
            alloc::format!("sample rate {} Hz, expected {SAMPLE_RATE}", w.sample_rate),
        ));
    }
    if w.channels.is_empty() {
        return Err(contract("stft", "no channels"));
    }
    let plan = Stft::new();
    let m = w.channels.len();
    let mut per = Vec::with_capacity(m);
    for ch in &w.channels {
        per.push(plan.analyze(ch)?);
    }
    let frames = per[0].2;
    let mut re = vec![S::zero(); N_BINS * frames * m];
    let mut im = vec![S::zero(); N_BINS * frames * m];
    for (c, (r, i, _)) in per.iter().enumerate() {
        for idx in 0..N_BINS * frames {
            re[idx * m + c] = r[idx];
            im[idx * m + c] = i[idx];
        }
    }
    ComplexSpectrogram::new(
        Tensor::new(&[N_BINS, frames, m], re)?,
        Tensor::new(&[N_BINS, frames, m], im)?,
    )
}

/// Inverse STFT of every channel. `len` defaults to `hop·(T−1)`.
pub fn istft<S: Real>(spec: &ComplexSpectrogram<S>, len: Option<usize>) -> Result<Waveform<S>> {
    let (f, t, m) = spec.dims();
    if f != N_BINS {
        return Err(Error::Contract {
            op: "istft",
            detail: alloc::format!("expected {N_BINS} bins, got {f}"),
        });
    }
    let len = len.unwrap_or(HOP * (t - 1));
    let plan = Stft::new();
    let mut channels = Vec::with_capacity(m);
    for c in 0..m {
        let (re, im) = spec.channel_planes(c);
        channels.push(plan.synthesize(&re, &im, t, len));
    }
    Ok(Waveform::new(channels, SAMPLE_RATE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_second_clip_has_189_frames() {
        let x = Waveform::mono(vec![0.1f64; 48000]);
        let s = stft(&x).unwrap();
        assert_eq!(s.dims(), (256, 189, 1));
    }

    #[test]
    fn empty_signal_is_rejected() {
        let x = Waveform::<f64>::mono(Vec::new());
        assert!(matches!(stft(&x), Err(Error::Contract { .. })));
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let x = Waveform::new(vec![vec![0.0f32; 4000]], 8000);
        assert!(stft(&x).is_err());
    }
}
