//! From waveforms to network inputs and back: segment preparation,
//! per-example gradients and full-signal enhancement.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dsp::{
    apply_mask_and_reconstruct, compute_cirm, normalize_and_stack, reference_channel, segment_and_pad, stft,
    trim_and_join, CirmParams, ComplexSpectrogram, MaskPair, Waveform,
};
use crate::error::{contract, Error, Result};
use crate::graph::{Eval, Graph};
use crate::loss::{composite_loss, composite_loss_graph, LossTerms, LossWeights};
use crate::net::{model_forward, ModelConfig};
use crate::params::ParameterStore;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Clip length used for training and inference.
pub const SEGMENT_SECONDS: f64 = 3.0;

/// Picks the channels a model with `mics` inputs consumes: all of them, or
/// only the reference channel for a mono model.
pub fn select_channels<S: Real>(w: &Waveform<S>, mics: usize) -> Result<Waveform<S>> {
    let m = w.num_channels();
    if m == mics {
        return Ok(w.clone());
    }
    if mics == 1 {
        return Ok(Waveform::new(alloc::vec![w.channel(reference_channel(m)).to_vec()], w.sample_rate));
    }
    Err(contract("select_channels", alloc::format!("model expects {mics} channels, input has {m}")))
}

/// Everything one training step needs for a single clip.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSegment<S> {
    /// Normalised stacked spectra, `F×T×2M`.
    pub input: Tensor<S>,
    /// Reference-microphone mixture spectrogram (not normalised).
    pub mix_ref: ComplexSpectrogram<S>,
    /// cIRM target, stacked `F×T×2`.
    pub target: Tensor<S>,
    /// Direct-path speech at the reference microphone, padded like the clip.
    pub direct_ref: Vec<S>,
    pub valid: usize,
}

/// Prepares one clip whose length already gives a multiple-of-8 frame count.
pub fn prepare_clip<S: Real>(mixture: &Waveform<S>, direct_ref: &[S], valid: usize) -> Result<PreparedSegment<S>> {
    if mixture.len() != direct_ref.len() {
        return Err(contract("prepare_clip", "mixture and direct reference differ in length"));
    }
    let r = reference_channel(mixture.num_channels());
    let spec = stft(mixture)?;
    let (input, _) = normalize_and_stack(&spec, r)?;
    let mix_ref = spec.channel(r)?;
    let direct = stft(&Waveform::new(alloc::vec![direct_ref.to_vec()], mixture.sample_rate))?;
    let target = compute_cirm(&mix_ref, &direct, CirmParams::default())?.to_stacked();
    Ok(PreparedSegment {
        input,
        mix_ref,
        target,
        direct_ref: direct_ref.to_vec(),
        valid,
    })
}

/// Cuts a long example into [`SEGMENT_SECONDS`] clips and prepares each.
/// Clips whose reference channel is silent are skipped.
pub fn prepare_example<S: Real>(
    mixture: &Waveform<S>,
    direct_ref: &[S],
    mics: usize,
) -> Result<Vec<PreparedSegment<S>>> {
    let mix = select_channels(mixture, mics)?;
    let mut joint = mix.clone();
    joint.channels.push(direct_ref.to_vec());
    joint.validate()?;
    let mut out = Vec::new();
    for seg in segment_and_pad(&joint, SEGMENT_SECONDS) {
        let mut w = seg.wave;
        let d = w.channels.pop().expect("direct channel appended");
        match prepare_clip(&w, &d, seg.valid) {
            Ok(p) => out.push(p),
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Mask estimate for one prepared clip (no tape).
pub fn estimate_mask<S: Real>(
    store: &ParameterStore<S>,
    cfg: &ModelConfig,
    input: &Tensor<S>,
) -> Result<MaskPair<S>> {
    let mut ev = Eval::new(store);
    let y = model_forward(&mut ev, cfg, input)?;
    MaskPair::from_stacked(&y)
}

/// Loss terms of one clip under the current parameters.
pub fn clip_loss<S: Real>(
    store: &ParameterStore<S>,
    cfg: &ModelConfig,
    seg: &PreparedSegment<S>,
    w: &LossWeights,
) -> Result<LossTerms> {
    let mask = estimate_mask(store, cfg, &seg.input)?;
    let target = MaskPair::from_stacked(&seg.target)?;
    composite_loss(&mask, &target, &seg.mix_ref, &seg.direct_ref, w)
}

/// Loss and parameter gradients of one clip.
pub fn clip_gradients<S: Real>(
    store: &ParameterStore<S>,
    cfg: &ModelConfig,
    seg: &PreparedSegment<S>,
    w: &LossWeights,
) -> Result<(LossTerms, Vec<(String, Vec<S>)>)> {
    let mut g = Graph::with_store(store);
    let x = g.input(seg.input.clone());
    let y = model_forward(&mut g, cfg, &x)?;
    let nodes = composite_loss_graph(&mut g, y, &seg.target, &seg.mix_ref, &seg.direct_ref, w)?;
    let terms = nodes.terms(&g);
    if !terms.total.is_finite() {
        return Err(Error::NonFinite("composite_loss"));
    }
    let grads = g.backward(nodes.total)?;
    Ok((terms, grads.params().map(|(n, v)| (n.into(), v)).collect()))
}

/// Where the mask applied during enhancement comes from.
pub enum MaskSource<'a, S> {
    Network {
        store: &'a ParameterStore<S>,
        cfg: &'a ModelConfig,
    },
    /// All-pass mask; output is the reference channel itself.
    Unit,
    /// cIRM computed against a known direct-path reference.
    Oracle { direct_ref: &'a [S] },
}

/// Enhances a multi-channel recording into a mono estimate of the same
/// length. Silent clips come out silent.
pub fn enhance<S: Real>(mixture: &Waveform<S>, source: &MaskSource<'_, S>) -> Result<Waveform<S>> {
    mixture.validate()?;
    let mut joint = match source {
        MaskSource::Network { cfg, .. } => select_channels(mixture, cfg.mics)?,
        _ => mixture.clone(),
    };
    let m = joint.num_channels();
    if let MaskSource::Oracle { direct_ref } = source {
        if direct_ref.len() != mixture.len() {
            return Err(contract("enhance", "oracle reference length differs from the mixture"));
        }
        joint.channels.push(direct_ref.to_vec());
    }
    let r = reference_channel(m);
    let mut clips = Vec::new();
    for seg in segment_and_pad(&joint, SEGMENT_SECONDS) {
        let mut w = seg.wave;
        let extra = (w.num_channels() > m).then(|| w.channels.pop().expect("extra channel"));
        let len = w.len();
        let spec = stft(&w)?;
        let mix_ref = spec.channel(r)?;
        let (f, t, _) = mix_ref.dims();
        let mask = match source {
            MaskSource::Network { store, cfg } => match normalize_and_stack(&spec, r) {
                Ok((input, _)) => estimate_mask(store, cfg, &input)?,
                Err(Error::Degenerate(_)) => MaskPair::unit(f, t),
                Err(e) => return Err(e),
            },
            MaskSource::Unit => MaskPair::unit(f, t),
            MaskSource::Oracle { .. } => {
                let d = extra.expect("oracle channel appended");
                let ds = stft(&Waveform::new(alloc::vec![d], w.sample_rate))?;
                compute_cirm(&mix_ref, &ds, CirmParams::default())?
            }
        };
        let out = apply_mask_and_reconstruct(&mask, &mix_ref, len)?;
        clips.push((out, seg.valid));
    }
    Ok(trim_and_join(&clips))
}
