//! Reverberant rendering and SNR-controlled noise mixing.

use alloc::vec::Vec;

use num_traits::Float;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rir::{direct_path_rir, image_method_rir};
use super::scene::RoomScene;
use crate::dsp::{convolve, reference_channel, Waveform, SAMPLE_RATE};
use crate::error::{contract, Error, Result};

/// One synthesized training or test example.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureExample {
    pub mixture: Waveform<f64>,
    /// Reverberant speech image at the reference microphone.
    pub clean_ref: Vec<f64>,
    /// Direct-path speech at the reference microphone.
    pub direct_ref: Vec<f64>,
    pub snr_db: f64,
}

pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// `10·log10(P_signal / P_noise)`.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    10.0 * Float::log10(power(signal) / power(noise))
}

/// Noise gain that puts `noise` at `snr_db` below `speech`.
pub fn noise_gain(speech: &[f64], noise: &[f64], snr_db: f64) -> f64 {
    let pn = power(noise);
    if pn == 0.0 {
        return 0.0;
    }
    Float::sqrt(power(speech) / (pn * Float::powf(10.0, snr_db / 10.0)))
}

/// `x` repeated and cut to `len`, starting at `offset`.
fn tiled(x: &[f64], len: usize, offset: usize) -> Vec<f64> {
    (0..len).map(|i| x[(i + offset) % x.len()]).collect()
}

/// Convolves `clean` with every microphone's RIR and adds noise at the
/// requested SNR (measured at the reference microphone).
///
/// Multi-channel noise must match the array; mono noise is copied to every
/// microphone with an independent random circular shift drawn from `seed`.
pub fn render_mixture(
    scene: &RoomScene,
    clean: &[f64],
    noise: &Waveform<f64>,
    snr_db: f64,
    seed: u64,
) -> Result<MixtureExample> {
    let m = scene.mics.len();
    let r = reference_channel(m);
    if clean.len() < SAMPLE_RATE as usize {
        return Err(contract("render_mixture", "clean speech must be at least 1 s long"));
    }
    if clean.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("clean speech is silent"));
    }
    let nc = noise.num_channels();
    if noise.is_empty() || (nc != 1 && nc != m) {
        return Err(contract("render_mixture", "noise must be mono or have one channel per microphone"));
    }
    let len = clean.len();
    let mut images = Vec::with_capacity(m);
    for mic in 0..m {
        let h = image_method_rir(scene, mic)?;
        images.push(convolve(clean, &h.taps, len));
    }
    let direct_ref = convolve(clean, &direct_path_rir(scene, r).taps, len);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noises: Vec<Vec<f64>> = (0..m)
        .map(|mic| {
            if nc == m {
                tiled(noise.channel(mic), len, 0)
            } else {
                let shift = rng.random_range(0..noise.len());
                tiled(noise.channel(0), len, shift)
            }
        })
        .collect();
    if power(&images[r]) == 0.0 {
        return Err(Error::Degenerate("reverberant speech image is silent"));
    }
    let g = noise_gain(&images[r], &noises[r], snr_db);
    let channels = images
        .iter()
        .zip(&noises)
        .map(|(s, v)| s.iter().zip(v).map(|(a, b)| a + g * b).collect())
        .collect();
    Ok(MixtureExample {
        mixture: Waveform::new(channels, SAMPLE_RATE),
        clean_ref: images.swap_remove(r),
        direct_ref,
        snr_db,
    })
}
