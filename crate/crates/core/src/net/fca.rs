//! Fully-connected attention: dense reference forms and the decoupled
//! depthwise-1D implementation used by the network.

use alloc::vec;

use crate::error::{contract, Result};
use crate::graph::Ops;
use crate::kernels::Axis;
use crate::net::config::FcaKind;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Dense per-position attention weights.
///
/// `time` is `F̂×T̂×T̂×C` indexed `(f, t_out, t_in, c)`; `freq` is
/// `T̂×F̂×F̂×C` indexed `(t, f_out, f_in, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFcaWeights<S> {
    pub time: Option<Tensor<S>>,
    pub freq: Option<Tensor<S>>,
}

fn dense_time<S: Real>(z: &Tensor<S>, w: &Tensor<S>) -> Result<Tensor<S>> {
    let (f, t, c) = z.dims3("fca_attention_dense")?;
    if w.shape() != [f, t, t, c] {
        return Err(contract("fca_attention_dense", "time weights must be F̂×T̂×T̂×C"));
    }
    let wd = w.data();
    Ok(Tensor::from_fn(&[f, t, c], |i| {
        let (ff, tt, cc) = (i / (t * c), i / c % t, i % c);
        (0..t)
            .map(|tp| wd[((ff * t + tt) * t + tp) * c + cc] * z.at3(ff, tp, cc))
            .sum()
    }))
}

fn dense_freq<S: Real>(z: &Tensor<S>, w: &Tensor<S>) -> Result<Tensor<S>> {
    let (f, t, c) = z.dims3("fca_attention_dense")?;
    if w.shape() != [t, f, f, c] {
        return Err(contract("fca_attention_dense", "frequency weights must be T̂×F̂×F̂×C"));
    }
    let wd = w.data();
    Ok(Tensor::from_fn(&[f, t, c], |i| {
        let (ff, tt, cc) = (i / (t * c), i / c % t, i % c);
        (0..f)
            .map(|fp| wd[((tt * f + ff) * f + fp) * c + cc] * z.at3(fp, tt, cc))
            .sum()
    }))
}

/// Literal summation form of the attention on a pooled feature `z`.
/// Reference only; not used by the network.
pub fn fca_attention_dense<S: Real>(z: &Tensor<S>, kind: FcaKind, w: &DenseFcaWeights<S>) -> Result<Tensor<S>> {
    let need = |o: &Option<Tensor<S>>, what: &str| {
        o.clone()
            .ok_or_else(|| contract("fca_attention_dense", alloc::format!("{what} weights required")))
    };
    match kind {
        FcaKind::Time => dense_time(z, &need(&w.time, "time")?),
        FcaKind::Frequency => dense_freq(z, &need(&w.freq, "frequency")?),
        FcaKind::FrequencyTime => {
            let a = dense_time(z, &need(&w.time, "time")?)?;
            dense_freq(&a, &need(&w.freq, "frequency")?)
        }
    }
}

/// Axes of the two chained 1D convolutions for `kind`.
pub fn axes(kind: FcaKind) -> [Axis; 2] {
    match kind {
        FcaKind::Time => [Axis::Time, Axis::Time],
        FcaKind::Frequency => [Axis::Frequency, Axis::Frequency],
        FcaKind::FrequencyTime => [Axis::Time, Axis::Frequency],
    }
}

/// `D2(D1(z))` with both kernels `K×C`, linear, no bias.
pub fn fca_attention_decoupled<S: Real, O: Ops<S>>(
    o: &mut O,
    z: &O::V,
    kind: FcaKind,
    d1: &O::V,
    d2: &O::V,
) -> Result<O::V> {
    let [a1, a2] = axes(kind);
    let y = o.conv1d_axis(z, d1, a1)?;
    o.conv1d_axis(&y, d2, a2)
}

/// Attention map from an already pooled feature: decoupled FCA, sigmoid,
/// nearest upsampling back to full resolution.
pub fn fca_map_pooled<S: Real, O: Ops<S>>(
    o: &mut O,
    pooled: &O::V,
    kind: FcaKind,
    d1: &O::V,
    d2: &O::V,
) -> Result<O::V> {
    let a = fca_attention_decoupled(o, pooled, kind, d1, d2)?;
    let s = o.sigmoid(&a)?;
    o.upsample2(&s)
}

/// Average-pool, decoupled FCA, sigmoid, upsample. Values lie in `(0, 1)`.
pub fn fca_branch<S: Real, O: Ops<S>>(
    o: &mut O,
    x: &O::V,
    kind: FcaKind,
    d1: &O::V,
    d2: &O::V,
) -> Result<O::V> {
    let p = o.avg_pool2(x)?;
    fca_map_pooled(o, &p, kind, d1, d2)
}

/// Delta kernel (`K×C`, one at the centre tap).
pub fn delta_kernel<S: Real>(k: usize, c: usize) -> Tensor<S> {
    let mut d = vec![S::zero(); k * c];
    d[(k / 2) * c..(k / 2 + 1) * c].iter_mut().for_each(|v| *v = S::one());
    Tensor::new(&[k, c], d).expect("consistent shape")
}
