//! Synthetic stand-ins for speech and noise recordings.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::SAMPLE_RATE;

/// Voiced syllables (harmonic series under a formant-like tilt) separated by
/// short pauses and occasional fricative noise bursts.
pub fn speech_like(seconds: f64, seed: u64) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let n = (seconds * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; n];
    let mut pos = 0usize;
    while pos < n {
        let dur = (rng.random_range(0.12..0.35) * fs) as usize;
        let voiced = rng.random_range(0.0..1.0) < 0.8;
        let f0 = rng.random_range(90.0..260.0);
        let glide = rng.random_range(-0.3..0.3);
        let formant = rng.random_range(400.0..1200.0);
        let gain = rng.random_range(0.3..1.0);
        let mut phase = 0.0f64;
        for i in 0..dur.min(n - pos) {
            let t = i as f64 / dur as f64;
            let env = Float::sin(core::f64::consts::PI * t) * gain;
            let v = if voiced {
                let f = f0 * (1.0 + glide * t);
                phase += core::f64::consts::TAU * f / fs;
                let mut s = 0.0;
                let mut h = 1.0;
                while h * f < 4000.0 {
                    let tilt = 1.0 / (1.0 + Float::powi((h * f - formant) / 600.0, 2));
                    s += tilt * Float::sin(h * phase) / h;
                    h += 1.0;
                }
                s
            } else {
                0.3 * rng.random_range(-1.0..1.0)
            };
            out[pos + i] = env * v;
        }
        pos += dur + (rng.random_range(0.02..0.12) * fs) as usize;
    }
    let peak = out.iter().fold(0.0f64, |a, &v| a.max(Float::abs(v)));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}

/// Low-pass tinted white noise with a slow amplitude wobble.
pub fn noise_like(seconds: f64, seed: u64) -> Vec<f64> {
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.random_range(0.3..0.95);
    let rate = rng.random_range(0.2..3.0);
    let mut y = 0.0;
    (0..n)
        .map(|i| {
            y = a * y + (1.0 - a) * rng.random_range(-1.0..1.0);
            let wob = 1.0 + 0.3 * Float::sin(core::f64::consts::TAU * rate * i as f64 / SAMPLE_RATE as f64);
            y * wob
        })
        .collect()
}
