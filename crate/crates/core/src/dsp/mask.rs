use alloc::vec::Vec;

use num_traits::Float;

use super::{istft, ComplexSpectrogram, MaskPair, Waveform};
use crate::error::{contract, Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Stabilizer and magnitude clip for the complex ideal ratio mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirmParams {
    pub eps: f64,
    pub clip: f64,
}

impl Default for CirmParams {
    fn default() -> Self {
        Self { eps: 1e-8, clip: 5.0 }
    }
}

/// Divides every channel by the mean magnitude of `ref_channel` and
/// interleaves the planes as `[re_1, im_1, …, re_M, im_M]`.
pub fn normalize_and_stack<S: Real>(
    spec: &ComplexSpectrogram<S>,
    ref_channel: usize,
) -> Result<(Tensor<S>, S)> {
    let (f, t, m) = spec.dims();
    if ref_channel >= m {
        return Err(contract(
            "normalize_and_stack",
            alloc::format!("reference channel {ref_channel} but only {m} channels"),
        ));
    }
    let (re, im) = (spec.re.data(), spec.im.data());
    let mut sum = 0.0f64;
    for p in 0..f * t {
        let i = p * m + ref_channel;
        sum += Float::hypot(re[i].f64(), im[i].f64());
    }
    let norm = sum / (f * t) as f64;
    if !(norm > 0.0) || !Float::is_finite(norm) {
        return Err(Error::Degenerate("reference channel has zero magnitude"));
    }
    let inv = S::of(1.0 / norm);
    let mut out = Vec::with_capacity(f * t * 2 * m);
    for (r, i) in re.chunks_exact(m).zip(im.chunks_exact(m)) {
        for c in 0..m {
            out.push(r[c] * inv);
            out.push(i[c] * inv);
        }
    }
    Ok((Tensor::new(&[f, t, 2 * m], out)?, S::of(norm)))
}

fn single_channel<S: Real>(op: &'static str, s: &ComplexSpectrogram<S>) -> Result<()> {
    if s.dims().2 != 1 {
        return Err(contract(op, "expected a single-channel spectrogram"));
    }
    Ok(())
}

/// `Y = S·conj(X) / (|X|² + ε)`, magnitude clipped to `params.clip`.
pub fn compute_cirm<S: Real>(
    mix_ref: &ComplexSpectrogram<S>,
    clean: &ComplexSpectrogram<S>,
    params: CirmParams,
) -> Result<MaskPair<S>> {
    single_channel("compute_cirm", mix_ref)?;
    single_channel("compute_cirm", clean)?;
    if mix_ref.dims() != clean.dims() {
        return Err(contract("compute_cirm", "mixture and clean spectrograms differ in shape"));
    }
    let (f, t, _) = mix_ref.dims();
    let mut mr = Vec::with_capacity(f * t);
    let mut mi = Vec::with_capacity(f * t);
    let it = mix_ref
        .re
        .data()
        .iter()
        .zip(mix_ref.im.data())
        .zip(clean.re.data().iter().zip(clean.im.data()));
    for ((&xr, &xi), (&sr, &si)) in it {
        let (xr, xi, sr, si) = (xr.f64(), xi.f64(), sr.f64(), si.f64());
        let den = xr * xr + xi * xi + params.eps;
        let mut yr = (sr * xr + si * xi) / den;
        let mut yi = (si * xr - sr * xi) / den;
        let mag = Float::hypot(yr, yi);
        if mag > params.clip {
            let k = params.clip / mag;
            yr *= k;
            yi *= k;
        }
        mr.push(S::of(yr));
        mi.push(S::of(yi));
    }
    Ok(MaskPair {
        re: Tensor::new(&[f, t, 1], mr)?,
        im: Tensor::new(&[f, t, 1], mi)?,
    })
}

/// Bin-wise complex product `mask ⊙ mix_ref`.
pub fn apply_mask<S: Real>(
    mask: &MaskPair<S>,
    mix_ref: &ComplexSpectrogram<S>,
) -> Result<ComplexSpectrogram<S>> {
    single_channel("apply_mask", mix_ref)?;
    if mask.re.shape() != mix_ref.re.shape() {
        return Err(contract("apply_mask", "mask and spectrogram differ in shape"));
    }
    let n = mask.re.len();
    let (ar, ai) = (mask.re.data(), mask.im.data());
    let (xr, xi) = (mix_ref.re.data(), mix_ref.im.data());
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for k in 0..n {
        re.push(ar[k] * xr[k] - ai[k] * xi[k]);
        im.push(ar[k] * xi[k] + ai[k] * xr[k]);
    }
    let shape = mix_ref.re.shape();
    ComplexSpectrogram::new(Tensor::new(shape, re)?, Tensor::new(shape, im)?)
}

/// `ŝ = iSTFT(mask ⊙ X_ref)`, `len` samples long.
pub fn apply_mask_and_reconstruct<S: Real>(
    mask: &MaskPair<S>,
    mix_ref: &ComplexSpectrogram<S>,
    len: usize,
) -> Result<Waveform<S>> {
    istft(&apply_mask(mask, mix_ref)?, Some(len))
}
